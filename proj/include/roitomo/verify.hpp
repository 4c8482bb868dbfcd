#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "roitomo/fraclap.hpp"
#include "roitomo/lines.hpp"
#include "roitomo/pdo.hpp"
#include "roitomo/phantom.hpp"
#include "roitomo/polyop.hpp"
#include "roitomo/vector_ops.hpp"
#include "roitomo/xray.hpp"

namespace roitomo {

struct PropertyCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;  ///< what `value` measures
};

struct VerifyOptions {
    int size = 128;           ///< grid of the adjoint, route and gauge checks
    int identity_size = 256;  ///< grid of the curl identity check
    int angles = 180;
    int offsets = 192;
    std::size_t zero_set_samples = 1000000;
    std::uint64_t seed = 7;
};

namespace detail {

inline double relative_gap(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m > 0.0 ? std::abs(a - b) / m : 0.0;
}

/// Zero-mean trigonometric field, periodic on the grid box, with integer
/// wave numbers up to kmax along each axis.
inline ScalarField random_trig_field(const Grid& g, std::mt19937_64& rng, int kmax, int terms = 6) {
    std::uniform_int_distribution<int> k(-kmax, kmax);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi), amp(-1.0, 1.0);
    ScalarField f(g);
    const int n = g.n();
    for (int t = 0; t < terms; ++t) {
        int w[kMaxDim] = {0, 0, 0};
        bool zero = true;
        while (zero) {
            for (int a = 0; a < n; ++a) w[a] = k(rng);
            zero = w[0] == 0 && w[1] == 0 && (n < 3 || w[2] == 0);
        }
        const double p = ph(rng), c = amp(rng);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const Index idx = g.unflat(i);
            double arg = p;
            for (int a = 0; a < n; ++a) arg += 2.0 * std::numbers::pi * w[a] * idx[a] / g.size(a);
            f[i] += c * std::cos(arg);
        }
    }
    return f;
}

/// Sum of a few gaussian bumps per component, well inside the support ball.
inline VectorField random_bump_field(const Grid& g, std::mt19937_64& rng, double sigma = 0.12) {
    std::uniform_real_distribution<double> c(-0.3, 0.3), a(-1.0, 1.0);
    const int n = g.n();
    VectorField F(g);
    for (int comp = 0; comp < n; ++comp)
        for (int b = 0; b < 3; ++b) {
            Point ctr{0.0, 0.0, 0.0};
            for (int i = 0; i < n; ++i) ctr[i] = c(rng);
            const double amp = a(rng);
            for (std::size_t k = 0; k < g.node_count(); ++k) {
                const Point x = g.position(k);
                double r2 = 0.0;
                for (int i = 0; i < n; ++i) r2 += (x[i] - ctr[i]) * (x[i] - ctr[i]);
                F[comp][k] += amp * std::exp(-r2 / (2.0 * sigma * sigma));
            }
        }
    return F;
}

}  // namespace detail

/// max over random pairs of |<X0 f, g> - <f, X0* g>| / max(|.|, |.|), and the
/// X1 analogue.
inline std::pair<double, double> adjoint_defects(const Grid& g, const LineSet& ls, int pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    double s_def = 0.0, v_def = 0.0;
    for (int p = 0; p < pairs; ++p) {
        auto f = ScalarField::sample(g, [&](const Point&) { return d(rng); });
        Sinogram s(ls);
        for (double& v : s.values) v = d(rng);
        s_def = std::max(s_def, detail::relative_gap(inner_product(xray_forward(f, ls), s),
                                                     inner_product(f, xray_backproject(s, g))));
        VectorField F(g);
        for (int i = 0; i < g.n(); ++i) F[i] = ScalarField::sample(g, [&](const Point&) { return d(rng); });
        v_def = std::max(v_def, detail::relative_gap(inner_product(xray_vector_forward(F, ls), s),
                                                     inner_product(F, xray_vector_backproject(s, g))));
    }
    return {s_def, v_def};
}

/// Semigroup and inverse-pair defects of (-Delta)^s on zero-mean
/// trigonometric fields of the periodic (pad 1) grid.
inline std::pair<double, double> fractional_algebra_defects(const Grid& g, std::uint64_t seed) {
    const Grid p1 = g.with_pad(1);
    std::mt19937_64 rng(seed);
    double semi = 0.0, inv = 0.0;
    for (int t = 0; t < 5; ++t) {
        const ScalarField f = detail::random_trig_field(p1, rng, p1.size(0) / 4);
        const FracExponent s(0.3), u(0.45), su(0.75), ms(-0.3);
        const ScalarField a = fractional_laplacian(fractional_laplacian(f, s), u);
        const ScalarField b = fractional_laplacian(f, su);
        semi = std::max(semi, relative_l2(a, b));
        inv = std::max(inv, relative_l2(fractional_laplacian(fractional_laplacian(f, s), ms), f));
    }
    return {semi, inv};
}

/// One patch of every closed-form rule, all on the same V. The plane waves are
/// axis aligned so that the difference stencils annihilate them exactly.
inline std::vector<PhantomSpec> admissible_family() {
    std::vector<PhantomSpec> v(6);
    for (auto& s : v) s.kind = PhantomKind::admissible_patch;
    v[0].rule = PatchRule::polynomial;
    v[0].poly = {{{0, 0}, 1.0}, {{2, 0}, 2.0}, {{1, 1}, -1.0}};
    v[1].rule = PatchRule::polyharmonic;
    v[1].degree = 3;
    v[2].rule = PatchRule::plane_wave;
    v[2].xi0 = {10.0, 0.0, 0.0};
    v[3].rule = PatchRule::coordinate_independent;
    v[4].rule = PatchRule::wave;
    v[5].rule = PatchRule::plane_wave;
    v[5].xi0 = {0.0, 7.0, 0.0};
    v[5].phase = 0.3;
    return v;
}

/// max over pairs (i < j) of the residual of f_i + lambda f_j under the
/// composed annihilator on the shared V.
inline double admissible_pair_residual(const Grid& g, double lambda) {
    const auto fam = admissible_family();
    std::vector<PhantomSample> samples;
    for (const auto& s : fam) samples.push_back(sample_phantom(s, g));
    double worst = 0.0;
    for (std::size_t i = 0; i < fam.size(); ++i)
        for (std::size_t j = i + 1; j < fam.size(); ++j) {
            const PolyOp P = samples[i].annihilator->compose(*samples[j].annihilator);
            ScalarField sum = samples[i].field;
            sum.axpy(lambda, samples[j].field);
            worst = std::max(worst, is_admissible(sum, P, patch_region(fam[i], g, P)).residual);
        }
    return worst;
}

/// Five fixed symbols with zero sets of different shapes: a point, a point of
/// higher order, a hyperplane, a cone and a curved hypersurface.
inline std::vector<PolyOp> zero_set_polynomials() {
    auto mono = [](int a0, int a1, Complex c) { return PolyOp(2, {{MultiIndex{a0, a1}, c}}); };
    return {
        PolyOp::neg_laplacian_power(2, 1),
        PolyOp::neg_laplacian_power(2, 2),
        mono(1, 0, Complex(0.0, 1.0)),
        mono(2, 0, 1.0) + mono(0, 2, -1.0),
        mono(3, 0, 1.0) + mono(1, 1, 2.0) + mono(0, 0, -1.0),
    };
}

struct ZeroSetSummary {
    std::vector<double> fractions;  ///< at eps, one per polynomial
    double worst = 0.0;
    bool monotone = true;  ///< no fraction grew over five halvings of eps
};

inline ZeroSetSummary zero_set_survey(std::size_t samples, double eps) {
    ZeroSetSummary z;
    for (const PolyOp& p : zero_set_polynomials()) {
        double prev = zero_set_fraction(p, samples, eps);
        z.fractions.push_back(prev);
        z.worst = std::max(z.worst, prev);
        double e = eps;
        for (int k = 0; k < 5; ++k) {
            e *= 0.5;
            const double next = zero_set_fraction(p, samples, e);
            z.monotone = z.monotone && next <= prev;
            prev = next;
        }
    }
    return z;
}

/// All property suites with their thresholds.
inline std::vector<PropertyCheck> run_property_suite(const VerifyOptions& opt,
                                                     const std::function<void(const PropertyCheck&)>& progress = {}) {
    std::vector<PropertyCheck> out;
    auto add = [&](std::string name, double value, double threshold, std::string note, bool below = true) {
        PropertyCheck c{std::move(name), value, threshold, below ? value < threshold : value > threshold, std::move(note)};
        out.push_back(c);
        if (progress) progress(out.back());
    };

    const Grid g(2, opt.size);
    const LineSet ls = make_lineset(g, opt.angles, opt.offsets);

    const auto [sdef, vdef] = adjoint_defects(g, ls, 20, opt.seed);
    add("adjoint_scalar", sdef, 1e-12, "relative defect of <X0 f, g> vs <f, X0* g>, 20 random pairs");
    add("adjoint_vector", vdef, 1e-12, "relative defect of <X1 F, g> vs <F, X1* g>, 20 random pairs");

    const auto [semi, inv] = fractional_algebra_defects(g, opt.seed);
    add("fraclap_semigroup", semi, 1e-10, "(-Delta)^0.3 (-Delta)^0.45 vs (-Delta)^0.75, periodic grid");
    add("fraclap_inverse_pair", inv, 1e-10, "(-Delta)^-0.3 (-Delta)^0.3 vs identity, zero-mean fields");

    {
        const ScalarField f = calibration_gaussian(g, 0.15);
        add("normal_route_agreement", relative_l2(normal_scalar(f, ls), normal_scalar_conv(f)), 5e-2,
            "composition vs convolution N0 on a gaussian");
    }
    {
        const VectorField d = gaussian_gradient(g, 0.15, {0.1, 0.0, 0.0});
        ScalarField mag(g);
        for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(d[0][k], d[1][k]);
        add("gauge_invariance", l2_norm(xray_vector_forward(d, ls)) / l2_norm(xray_forward(mag, ls)), 1e-6,
            "||X1 d(phi)|| / ||X0 |d(phi)|||, gaussian phi");
    }
    {
        const ScalarField phi = calibration_gaussian(g, 0.15, {0.1, -0.05, 0.0});
        const VectorField F = spectral_gradient(phi);
        ScalarField ref = phi;
        const double m = ref.mean();
        for (double& v : ref.values()) v -= m;
        add("potential_round_trip", relative_l2(recover_potential(F), ref), 1e-6, "recover_potential(d phi) vs phi - mean");
    }
    {
        std::mt19937_64 rng(opt.seed);
        const Grid gi(2, opt.identity_size);
        const VectorField F = detail::random_bump_field(gi, rng);
        add("curl_normal_identity", curl_normal_identity_defect(F, make_lineset(gi, 1, 1)).relative, 5e-2,
            "||d(N1 F) - N0(dF)/(n-1)|| relative, convolution routes");
    }
    {
        const ZeroSetSummary z = zero_set_survey(opt.zero_set_samples, 1e-6);
        add("zero_set_fraction", z.worst, 1e-4, "largest fraction at eps = 1e-6 over five polynomials");
        add("zero_set_monotone", z.monotone ? 0.0 : 1.0, 0.5, "1 if a fraction grew over five halvings of eps");
    }
    {
        const Grid gp(2, 64);
        add("admissible_vector_space", admissible_pair_residual(gp, 0.37), 1e-6,
            "largest residual of f1 + 0.37 f2 under P1 P2 over all patch pairs");
    }
    return out;
}

}  // namespace roitomo
