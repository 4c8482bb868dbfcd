// roitomo: batch runner for forward simulation, reconstruction, verification,
// phantom generation and the null-space probe.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "roitomo/roitomo.hpp"

namespace fs = std::filesystem;
using namespace roitomo;

namespace {

enum Exit { kOk = 0, kConfig = 2, kGeometry = 3, kSolver = 4, kVerify = 5 };

struct Run {
    ExperimentConfig cfg;
    fs::path out;

    std::string file(const std::string& name) const { return (out / name).string(); }
};

std::map<MultiIndex, double> parse_poly(const std::string& text, int n) {
    std::map<MultiIndex, double> out;
    for (const std::string& term : detail::split(text, ';')) {
        if (term.find_first_not_of(" \t") == std::string::npos) continue;
        const auto colon = term.find(':');
        if (colon == std::string::npos) throw ConfigError("phantom.poly: term `" + term + "` lacks `:coef`");
        MultiIndex alpha;
        try {
            for (const std::string& a : detail::split(term.substr(0, colon), ',')) alpha.push_back(std::stoi(a));
            out[alpha] += std::stod(term.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw ConfigError("phantom.poly: malformed term `" + term + "`");
        }
        if (static_cast<int>(alpha.size()) != n) throw ConfigError("phantom.poly: multi-index length must equal grid.n");
    }
    return out;
}

PhantomSpec scalar_spec(const ExperimentConfig& c, int n) {
    PhantomSpec s;
    const std::string& kind = c.text("phantom.kind");
    if (kind == "gaussian") s.kind = PhantomKind::gaussian;
    else if (kind == "disk") s.kind = PhantomKind::disk_indicator;
    else if (kind == "bump") s.kind = PhantomKind::bump;
    else if (kind == "admissible_patch" || kind == "stream_patch") s.kind = PhantomKind::admissible_patch;
    s.center = c.point("phantom.center");
    s.sigma = c.real("phantom.sigma");
    s.radius = c.real("phantom.radius");
    s.amplitude = c.real("phantom.amplitude");
    const std::string& rule = c.choice("phantom.rule", {"polynomial", "polyharmonic", "plane_wave",
                                                        "coordinate_independent", "wave"});
    if (rule == "polynomial") s.rule = PatchRule::polynomial;
    else if (rule == "polyharmonic") s.rule = PatchRule::polyharmonic;
    else if (rule == "plane_wave") s.rule = PatchRule::plane_wave;
    else if (rule == "coordinate_independent") s.rule = PatchRule::coordinate_independent;
    else s.rule = PatchRule::wave;
    s.poly = parse_poly(c.text("phantom.poly"), n);
    s.v_radius = c.real("phantom.v_radius");
    s.taper_radius = c.real("phantom.taper_radius");
    s.degree = c.integer("phantom.degree");
    s.xi0 = c.point("phantom.xi0");
    s.phase = c.real("phantom.phase");
    s.axis = c.integer("phantom.axis");
    s.width = c.real("phantom.width");
    s.kappa = c.real("phantom.kappa");
    s.outer_center = c.point("phantom.outer_center");
    s.outer_radius = c.real("phantom.outer_radius");
    s.outer_amplitude = c.real("phantom.outer_amplitude");
    return s;
}

bool is_vector(const ExperimentConfig& c) { return c.choice("phantom.field", {"scalar", "vector"}) == "vector"; }

struct Truth {
    std::optional<ScalarField> scalar;
    std::optional<VectorField> vector;
    std::optional<PolyOp> annihilator;  ///< of f, or of the curl components of F
};

Truth make_truth(const ExperimentConfig& c, const Grid& g) {
    Truth t;
    if (!is_vector(c)) {
        const std::string& kind = c.choice("phantom.kind", {"zero", "gaussian", "disk", "bump", "admissible_patch"});
        if (kind == "zero") {
            t.scalar = ScalarField(g);
            return t;
        }
        PhantomSample s = sample_phantom(scalar_spec(c, g.n()), g);
        t.scalar = std::move(s.field);
        t.annihilator = std::move(s.annihilator);
        return t;
    }
    const std::string& kind = c.choice("phantom.kind", {"zero", "vortex", "stream_patch"});
    if (kind == "zero") {
        t.vector = VectorField(g);
    } else if (kind == "vortex") {
        t.vector = calibration_vortex(g, c.real("phantom.sigma"), c.point("phantom.center"));
        *t.vector *= c.real("phantom.amplitude");
    } else {
        // The patch is the stream function; the amplitude scales F.
        PhantomSpec s = scalar_spec(c, g.n());
        s.amplitude = 1.0;
        PhantomSample psi = sample_phantom(s, g);
        t.vector = stream_field(psi.field);
        *t.vector *= c.real("phantom.amplitude");
        // (dF)_01 = -Delta psi, which is annihilated whenever psi is.
        t.annihilator = psi.annihilator;
    }
    if (const double ga = c.real("phantom.gauge_amplitude"); ga != 0.0)
        t.vector->axpy(ga, gaussian_gradient(g, c.real("phantom.sigma"), c.point("phantom.center")));
    return t;
}

/// Full line set, restricted to the roi ball when roi.radius > 0.
LineSet make_lines(const ExperimentConfig& c, const Grid& g, std::optional<RegionMask>* roi_out = nullptr) {
    const int angles = c.integer("lines.angles"), offsets = c.integer("lines.offsets");
    if (angles < 1 || offsets < 2) throw ConfigError("lines.angles must be >= 1 and lines.offsets >= 2");
    LineSet ls = make_lineset(g, angles, offsets);
    if (c.real("roi.radius") > 0.0) {
        RegionMask roi = RegionMask::ball(g, c.point("roi.center"), c.real("roi.radius"));
        ls = filter_roi(ls, roi);
        if (roi_out) *roi_out = std::move(roi);
    }
    return ls;
}

void write_lines_and_sinogram(const Run& r, const Sinogram& s) {
    {
        auto os = detail::open_out(r.file("lines.csv"));
        write_lineset_csv(os, s.lines);
    }
    {
        auto os = detail::open_out(r.file("sinogram.csv"));
        write_sinogram_csv(os, s);
    }
    save_pgm(r.file("sinogram.pgm"), s);
}

void save_truth(const Run& r, const Truth& t) {
    if (t.scalar) {
        save_field(r.file("phantom.roif"), *t.scalar);
        save_pgm(r.file("phantom.pgm"), *t.scalar);
    } else {
        save_field(r.file("phantom.roiv"), *t.vector);
        for (int i = 0; i < t.vector->n(); ++i) save_pgm(r.file("phantom_" + std::to_string(i) + ".pgm"), (*t.vector)[i]);
    }
    if (t.annihilator) {
        auto os = detail::open_out(r.file("annihilator.txt"));
        write_polyop(os, *t.annihilator);
    }
}

int cmd_phantom(const Run& r) {
    const Grid g = r.cfg.grid();
    save_truth(r, make_truth(r.cfg, g));
    return kOk;
}

int cmd_forward(const Run& r) {
    const Grid g = r.cfg.grid();
    const Truth t = make_truth(r.cfg, g);
    const LineSet ls = make_lines(r.cfg, g);
    const Sinogram s = t.scalar ? xray_forward(*t.scalar, ls) : xray_vector_forward(*t.vector, ls);
    write_lines_and_sinogram(r, s);
    save_truth(r, t);
    return kOk;
}

Sinogram load_or_simulate(const ExperimentConfig& c, const Truth& t, const LineSet& ls) {
    if (const std::string& in = c.text("reconstruct.input"); !in.empty()) {
        auto is = detail::open_in(in);
        return read_sinogram_csv(is, ls);
    }
    return t.scalar ? xray_forward(*t.scalar, ls) : xray_vector_forward(*t.vector, ls);
}

ReconstructionOptions reconstruction_options(const ExperimentConfig& c) {
    ReconstructionOptions o;
    o.route = c.choice("reconstruct.route", {"offsets", "grid"}) == "offsets" ? HalfLaplacianRoute::offsets
                                                                             : HalfLaplacianRoute::grid;
    o.offset_pad = c.integer("reconstruct.offset_pad");
    o.support_factor = c.integer("reconstruct.support_factor");
    if (o.offset_pad < 1) throw ConfigError("reconstruct.offset_pad must be >= 1");
    return o;
}

int reconstruct_full(const Run& r, const Grid& g, const Truth& t) {
    const auto t0 = std::chrono::steady_clock::now();
    const LineSet ls = make_lines(r.cfg, g);
    const Sinogram data = load_or_simulate(r.cfg, t, ls);
    const ReconstructionOptions opt = reconstruction_options(r.cfg);
    const bool calibrated = r.cfg.choice("reconstruct.constants", {"analytic", "calibrated"}) == "calibrated";
    const ReconstructionConstants c = calibrated
                                          ? calibrate_constants(g, make_lineset(g, ls.n_angles(), ls.n_offsets()),
                                                                {0.15, {0.0, 0.0, 0.0}, opt})
                                          : analytic_constants(g.n());
    const bool have_truth = r.cfg.text("reconstruct.input").empty() || r.cfg.given("phantom.kind");
    auto os = detail::open_out(r.file("report.txt"));
    os << "mode=full\n"
       << "constants=" << to_string(c.provenance) << '\n'
       << "c0=" << detail::fmt(c.c0) << "\nc1=" << detail::fmt(c.c1) << '\n'
       << "c0_analytic=" << detail::fmt(c.c0_analytic) << "\nc1_analytic=" << detail::fmt(c.c1_analytic) << '\n'
       << "c0_residual=" << detail::fmt(c.c0_residual) << "\nc1_residual=" << detail::fmt(c.c1_residual) << '\n'
       << "line_count=" << ls.size() << '\n';
    if (t.scalar) {
        const ScalarField f = reconstruct_full_scalar(data, g, c, opt);
        save_field(r.file("reconstruction.roif"), f);
        save_pgm(r.file("reconstruction.pgm"), f);
        if (have_truth) {
            os << "rel_error=" << detail::fmt(relative_l2(f, *t.scalar)) << '\n';
            save_pgm(r.file("error.pgm"), f - *t.scalar);
        }
    } else {
        const VectorField F = reconstruct_full_solenoidal(data, g, c, opt);
        save_field(r.file("reconstruction.roiv"), F);
        for (int i = 0; i < g.n(); ++i) save_pgm(r.file("reconstruction_" + std::to_string(i) + ".pgm"), F[i]);
        if (have_truth) {
            const VectorField truth = solenoidal_decompose(*t.vector).solenoidal;
            os << "rel_error=" << detail::fmt(relative_l2(F, truth)) << '\n';
            save_pgm(r.file("error.pgm"), F[0] - truth[0]);
        }
    }
    os << "wall_time_s=" << detail::fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count())
       << '\n';
    return kOk;
}

SolverControls solver_controls(const ExperimentConfig& c) {
    SolverControls s;
    s.cg_tol = c.real("solver.cg_tol");
    s.max_iter = c.integer("solver.max_iter");
    s.restart_every = c.integer("solver.restart_every");
    s.preconditioner = c.choice("solver.preconditioner", {"none", "jacobi"}) == "none" ? Preconditioner::none
                                                                                       : Preconditioner::jacobi;
    s.support_radius = c.real("solver.support_radius");
    if (!(s.cg_tol > 0.0) || s.max_iter < 1 || s.restart_every < 1)
        throw ConfigError("solver.cg_tol must be positive, solver.max_iter and solver.restart_every >= 1");
    return s;
}

int reconstruct_partial(const Run& r, const Grid& g, const Truth& t) {
    const ExperimentConfig& c = r.cfg;
    if (!(c.real("roi.radius") > 0.0)) throw ConfigError("mode = partial needs roi.radius > 0");
    PartialDataProblem p;
    p.lambda_prior = c.real("solver.lambda_prior");
    p.lambda_tikhonov = c.real("solver.lambda_tikhonov");
    if (p.lambda_prior < 0.0 || p.lambda_tikhonov < 0.0) throw ConfigError("solver weights must be non-negative");
    if (const std::string& pf = c.text("prior.file"); !pf.empty()) p.prior = load_polyop(pf, g.n());
    if (p.lambda_prior > 0.0 && !p.prior) throw ConfigError("mode = partial with lambda_prior > 0 needs prior.file");
    p.controls = solver_controls(c);

    std::optional<RegionMask> roi;
    const LineSet ls = make_lines(c, g, &roi);
    p.roi = *roi;
    p.data = load_or_simulate(c, t, ls);
    const Point vc = c.text("v.center").empty() ? c.point("phantom.center") : c.point("v.center");
    const double vr = c.real("v.radius") > 0.0 ? c.real("v.radius") : c.real("phantom.v_radius");
    p.v = RegionMask::ball(g, vc, vr, p.prior ? stencil_erosion_radius(*p.prior, g) : 0.0);

    const bool have_truth = c.text("reconstruct.input").empty() || c.given("phantom.kind");
    auto write = [&](const SolveReport& rep) {
        auto os = detail::open_out(r.file("report.txt"));
        os << "mode=partial\n";
        write_report(os, rep);
    };
    auto save = [&](const std::vector<double>& x) {
        const std::size_t N = g.node_count();
        if (t.scalar) {
            const ScalarField f(g, x);
            save_field(r.file("reconstruction.roif"), f);
            save_pgm(r.file("reconstruction.pgm"), f);
            if (have_truth) save_pgm(r.file("error.pgm"), f - *t.scalar);
        } else {
            std::vector<ScalarField> comps;
            for (int i = 0; i < g.n(); ++i) comps.emplace_back(g, std::vector<double>(x.begin() + i * N, x.begin() + (i + 1) * N));
            const VectorField F(std::move(comps));
            save_field(r.file("reconstruction.roiv"), F);
            const VectorField sol = solenoidal_decompose(F).solenoidal;
            for (int i = 0; i < g.n(); ++i) save_pgm(r.file("solenoidal_" + std::to_string(i) + ".pgm"), sol[i]);
        }
    };
    try {
        if (t.scalar) {
            auto [f, rep] = solve_scalar_partial(p, g, have_truth ? &*t.scalar : nullptr);
            write(rep);
            save(std::vector<double>(f.values().begin(), f.values().end()));
        } else {
            auto [F, rep] = solve_vector_partial(p, g, have_truth ? &*t.vector : nullptr);
            write(rep);
            std::vector<double> x;
            for (int i = 0; i < g.n(); ++i) x.insert(x.end(), F[i].values().begin(), F[i].values().end());
            save(x);
        }
    } catch (const SolverFailure& e) {
        write(e.report());
        save(e.best_iterate());
        throw;
    }
    return kOk;
}

int cmd_reconstruct(const Run& r) {
    const Grid g = r.cfg.grid();
    const Truth t = make_truth(r.cfg, g);
    return r.cfg.choice("reconstruct.mode", {"full", "partial"}) == "full" ? reconstruct_full(r, g, t)
                                                                          : reconstruct_partial(r, g, t);
}

int cmd_verify(const Run& r) {
    VerifyOptions o;
    o.size = r.cfg.integer("verify.size");
    o.identity_size = r.cfg.integer("verify.identity_size");
    o.angles = r.cfg.integer("lines.angles");
    o.offsets = r.cfg.integer("lines.offsets");
    const int samples = r.cfg.integer("verify.samples");
    if (o.size < 8 || o.identity_size < 8 || samples < 1) throw ConfigError("verify sizes must be >= 8, samples >= 1");
    o.zero_set_samples = static_cast<std::size_t>(samples);
    auto os = detail::open_out(r.file("verify.txt"));
    bool all = true;
    run_property_suite(o, [&](const PropertyCheck& c) {
        all = all && c.pass;
        os << c.name << " value=" << detail::fmt(c.value) << " threshold=" << detail::fmt(c.threshold) << ' '
           << (c.pass ? "PASS" : "FAIL") << "  # " << c.note << '\n';
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ' ' << c.value << " (< " << c.threshold << ")\n";
    });
    return all ? kOk : kVerify;
}

int cmd_probe(const Run& r) {
    const Grid g = r.cfg.grid();
    const double rho = r.cfg.real("roi.radius") > 0.0 ? r.cfg.real("roi.radius") : g.support_radius();
    const RegionMask roi = RegionMask::ball(g, r.cfg.point("roi.center"), rho);
    ProbeOptions o;
    o.n_angles = r.cfg.integer("lines.angles");
    o.n_offsets = r.cfg.integer("lines.offsets");
    o.band = r.cfg.real("probe.band");
    o.block = r.cfg.integer("probe.block");
    const ProbeResult p = null_space_probe(roi, g, r.cfg.integer("probe.iters"), o);
    save_field(r.file("probe.roif"), p.field);
    save_pgm(r.file("probe.pgm"), p.field);
    auto os = detail::open_out(r.file("probe.txt"));
    os << "rayleigh=" << detail::fmt(p.rayleigh) << "\nrayleigh_min=" << detail::fmt(p.rayleigh_min)
       << "\nrayleigh_max=" << detail::fmt(p.rayleigh_max) << "\niterations=" << p.iterations
       << "\nconverged=" << (p.converged ? "true" : "false") << "\nsupport_fallback=" << (p.support_fallback ? "true" : "false")
       << "\nsupport_nodes=" << p.support_nodes << "\nsupport_violation=" << p.support_violation
       << "\nline_count=" << p.line_count << "\nwall_time_s=" << detail::fmt(p.wall_time_s) << '\n';
    return kOk;
}

void write_versions(const Run& r) {
    auto os = detail::open_out(r.file("versions.txt"));
    os << "roitomo=" << ROITOMO_VERSION << '\n'
       << "fftw=" << fftw_version << '\n'
       << "eigen=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n'
       << "compiler=" << __VERSION__ << '\n'
       << "threads=" << thread_count() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"roitomo: partial-data X-ray tomography experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<int> threads;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--threads", threads, "worker threads (fallback: ROITOMO_THREADS)");
    app.fallthrough();

    const std::map<std::string, int (*)(const Run&)> commands = {
        {"forward", cmd_forward}, {"reconstruct", cmd_reconstruct}, {"verify", cmd_verify},
        {"phantom", cmd_phantom}, {"probe", cmd_probe},
    };
    const std::map<std::string, std::string> help = {
        {"forward", "simulate line data of the configured phantom"},
        {"reconstruct", "full-data inversion or penalised partial-data solve"},
        {"verify", "run the property suite"},
        {"phantom", "sample the configured phantom"},
        {"probe", "near-null-space probe outside the roi"},
    };
    for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        Run r;
        if (!config_path.empty()) r.cfg = ExperimentConfig::load(config_path);
        if (const std::string& c = r.cfg.text("command"); !c.empty() && c != command)
            throw ConfigError("config says command = " + c + " but `" + command + "` was requested");
        r.cfg.set("command", command);
        if (!out_dir.empty()) r.cfg.set("output.dir", out_dir);
        if (threads) {
            r.cfg.set("threads", std::to_string(*threads));
        } else if (const char* env = std::getenv("ROITOMO_THREADS")) {
            r.cfg.set("threads", env);
        }
        if (r.cfg.integer("threads") < 0) throw ConfigError("threads must be >= 0");
        set_thread_count(r.cfg.integer("threads"));

        r.out = r.cfg.text("output.dir");
        std::error_code ec;
        fs::create_directories(r.out, ec);
        if (ec) throw ConfigError("cannot create output directory " + r.out.string() + ": " + ec.message());
        {
            auto os = detail::open_out(r.file("config.resolved"));
            r.cfg.write_resolved(os);
        }
        write_versions(r);
        return commands.at(command)(r);
    } catch (const ConfigError& e) {
        std::cerr << "roitomo: config error: " << e.what() << '\n';
        return kConfig;
    } catch (const SolverError& e) {
        std::cerr << "roitomo: solver error: " << e.what() << '\n';
        return kSolver;
    } catch (const Error& e) {
        std::cerr << "roitomo: " << e.what() << '\n';
        return kGeometry;
    } catch (const std::exception& e) {
        std::cerr << "roitomo: " << e.what() << '\n';
        return 1;
    }
}
