#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roitomo/error.hpp"
#include "roitomo/grid.hpp"

namespace roitomo {

/// Plain `key = value` experiment configuration. Every key has a default;
/// unknown keys are rejected. Keys of kind `path` are resolved against the
/// directory of the file they were read from.
class ExperimentConfig {
public:
    enum class Kind { text, integer, real, list, path };

    struct Key {
        const char* name;
        Kind kind;
        const char* fallback;
        const char* doc;
    };

    static const std::vector<Key>& schema() {
        static const std::vector<Key> keys = {
            {"command", Kind::text, "", "forward | reconstruct | verify | phantom | probe (optional cross-check)"},
            {"grid.n", Kind::integer, "2", "dimension, 2 or 3"},
            {"grid.size", Kind::integer, "128", "nodes per axis"},
            {"grid.extent", Kind::real, "1", "half-width e of [-e, e]^n"},
            {"grid.pad", Kind::integer, "2", "zero-padding factor of spectral transforms"},
            {"phantom.field", Kind::text, "scalar", "scalar | vector"},
            {"phantom.kind", Kind::text, "gaussian",
             "scalar: zero | gaussian | disk | bump | admissible_patch; vector: zero | vortex | stream_patch"},
            {"phantom.center", Kind::list, "0,0,0", "centre"},
            {"phantom.sigma", Kind::real, "0.15", "gaussian / vortex width"},
            {"phantom.radius", Kind::real, "0.5", "disk or bump radius"},
            {"phantom.amplitude", Kind::real, "1", "amplitude"},
            {"phantom.rule", Kind::text, "polynomial",
             "admissible patch rule: polynomial | polyharmonic | plane_wave | coordinate_independent | wave"},
            {"phantom.poly", Kind::text, "0,0:1;2,0:1;0,2:-0.5", "polynomial terms `a1,..,an:coef` separated by `;`"},
            {"phantom.v_radius", Kind::real, "0.2", "radius of V, where the rule holds"},
            {"phantom.taper_radius", Kind::real, "0.33", "radius at which the patch has decayed"},
            {"phantom.degree", Kind::integer, "3", "polyharmonic degree"},
            {"phantom.xi0", Kind::list, "10,0,0", "plane-wave frequency"},
            {"phantom.phase", Kind::real, "0", "plane-wave phase"},
            {"phantom.axis", Kind::integer, "0", "coordinate_independent: ignored axis"},
            {"phantom.width", Kind::real, "0.1", "profile width"},
            {"phantom.kappa", Kind::real, "8", "wave profile frequency"},
            {"phantom.outer_center", Kind::list, "0,0,0", "outer bump centre"},
            {"phantom.outer_radius", Kind::real, "0", "outer bump radius, 0 disables"},
            {"phantom.outer_amplitude", Kind::real, "0", "outer bump amplitude"},
            {"phantom.gauge_amplitude", Kind::real, "0", "vector: amplitude of a gradient d(bump) added to F"},
            {"lines.angles", Kind::integer, "180", "directions on the half sphere"},
            {"lines.offsets", Kind::integer, "192", "offsets per perpendicular axis"},
            {"roi.center", Kind::list, "0,0,0", "roi ball centre"},
            {"roi.radius", Kind::real, "0", "roi ball radius; 0 keeps every line"},
            {"v.center", Kind::list, "", "V ball centre; empty takes phantom.center"},
            {"v.radius", Kind::real, "0", "V ball radius; 0 takes phantom.v_radius"},
            {"prior.file", Kind::path, "", "PolyOp text file (partial mode)"},
            {"solver.lambda_prior", Kind::real, "1", "prior weight"},
            {"solver.lambda_tikhonov", Kind::real, "1e-6", "Tikhonov weight"},
            {"solver.cg_tol", Kind::real, "1e-8", "relative residual tolerance"},
            {"solver.max_iter", Kind::integer, "2000", "CG iteration cap"},
            {"solver.restart_every", Kind::integer, "200", "exact residual recomputation period"},
            {"solver.preconditioner", Kind::text, "jacobi", "none | jacobi"},
            {"solver.support_radius", Kind::real, "0", "unknown support ball; 0 is the grid support ball"},
            {"reconstruct.mode", Kind::text, "full", "full | partial"},
            {"reconstruct.input", Kind::path, "", "sinogram CSV; empty simulates the phantom"},
            {"reconstruct.constants", Kind::text, "calibrated", "analytic | calibrated"},
            {"reconstruct.route", Kind::text, "offsets", "offsets | grid"},
            {"reconstruct.offset_pad", Kind::integer, "32", "padding of the per-projection filter"},
            {"reconstruct.support_factor", Kind::integer, "3", "grid route enlargement"},
            {"probe.iters", Kind::integer, "50", "LOBPCG iterations"},
            {"probe.band", Kind::real, "0.25", "frequency cut as a fraction of Nyquist"},
            {"probe.block", Kind::integer, "4", "LOBPCG block size"},
            {"verify.size", Kind::integer, "128", "grid size for the property suite"},
            {"verify.identity_size", Kind::integer, "256", "grid size of the curl identity check"},
            {"verify.samples", Kind::integer, "1000000", "Monte Carlo samples for zero-set fractions"},
            {"output.dir", Kind::path, "out", "output directory (overridden by --out)"},
            {"threads", Kind::integer, "0", "worker threads, 0 leaves the default"},
        };
        return keys;
    }

    ExperimentConfig() {
        for (const Key& k : schema()) values_[k.name] = k.fallback;
    }

    /// Parses `key = value` lines; `#` starts a comment.
    static ExperimentConfig parse(std::istream& is, const std::filesystem::path& base_dir = {}) {
        ExperimentConfig c;
        std::string row;
        int line = 0;
        while (std::getline(is, row)) {
            ++line;
            if (const auto h = row.find('#'); h != std::string::npos) row.erase(h);
            const std::string t = trim(row);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
            const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
            c.set(key, value, base_dir);
        }
        return c;
    }

    static ExperimentConfig load(const std::filesystem::path& file) {
        std::ifstream is(file);
        if (!is) throw ConfigError("cannot read config " + file.string());
        return parse(is, std::filesystem::absolute(file).parent_path());
    }

    /// Sets a key, validating its type; paths are made absolute.
    void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir = {}) {
        const Key* k = find(key);
        if (!k) throw ConfigError("unknown config key `" + key + "`");
        switch (k->kind) {
            case Kind::integer:
                parse_int(key, value);
                break;
            case Kind::real:
                parse_real(key, value);
                break;
            case Kind::list:
                if (!value.empty()) parse_list(key, value);
                break;
            default:
                break;
        }
        if (k->kind == Kind::path && !value.empty()) {
            std::filesystem::path p(value);
            if (p.is_relative()) p = (base_dir.empty() ? std::filesystem::current_path() : base_dir) / p;
            values_[key] = p.lexically_normal().string();
        } else {
            values_[key] = value;
        }
        explicit_[key] = true;
    }

    const std::string& text(const std::string& key) const { return at(key); }
    int integer(const std::string& key) const { return parse_int(key, at(key)); }
    double real(const std::string& key) const { return parse_real(key, at(key)); }
    Point point(const std::string& key) const { return parse_list(key, at(key)); }
    bool given(const std::string& key) const { return explicit_.count(key) > 0; }

    /// One of `choices`, or a config error naming them.
    const std::string& choice(const std::string& key, std::initializer_list<const char*> choices) const {
        const std::string& v = at(key);
        std::string all;
        for (const char* c : choices) {
            if (v == c) return v;
            all += std::string(all.empty() ? "" : ", ") + c;
        }
        throw ConfigError(key + " = " + v + ": expected one of " + all);
    }

    Grid grid() const {
        const int n = integer("grid.n");
        if (n != 2 && n != 3) throw ConfigError("grid.n must be 2 or 3");
        if (integer("grid.size") < 4) throw ConfigError("grid.size must be >= 4");
        if (!(real("grid.extent") > 0.0)) throw ConfigError("grid.extent must be positive");
        if (integer("grid.pad") < 1) throw ConfigError("grid.pad must be >= 1");
        return Grid(n, integer("grid.size"), real("grid.extent"), integer("grid.pad"));
    }

    /// Every key with its effective value, in schema order.
    void write_resolved(std::ostream& os) const {
        os << "# resolved configuration\n";
        for (const Key& k : schema()) os << k.name << " = " << at(k.name) << '\n';
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static const Key* find(const std::string& key) {
        for (const Key& k : schema())
            if (key == k.name) return &k;
        return nullptr;
    }

    const std::string& at(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key `" + key + "`");
        return it->second;
    }

    static int parse_int(const std::string& key, const std::string& v) {
        std::size_t used = 0;
        int out = 0;
        try {
            out = std::stoi(v, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (v.empty() || used != v.size()) throw ConfigError(key + ": expected an integer, got `" + v + "`");
        return out;
    }

    static double parse_real(const std::string& key, const std::string& v) {
        std::size_t used = 0;
        double out = 0.0;
        try {
            out = std::stod(v, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (v.empty() || used != v.size()) throw ConfigError(key + ": expected a number, got `" + v + "`");
        return out;
    }

    static Point parse_list(const std::string& key, const std::string& v) {
        Point p{0.0, 0.0, 0.0};
        std::istringstream is(v);
        std::string item;
        int i = 0;
        while (std::getline(is, item, ',')) {
            if (i >= kMaxDim) throw ConfigError(key + ": at most 3 components");
            p[i++] = parse_real(key, trim(item));
        }
        if (i == 0) throw ConfigError(key + ": empty list");
        return p;
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

}  // namespace roitomo
