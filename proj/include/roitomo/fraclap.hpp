#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <string>
#include <string_view>

#include "roitomo/grid.hpp"
#include "roitomo/lines.hpp"
#include "roitomo/spectral.hpp"
#include "roitomo/xray.hpp"

namespace roitomo {

/// Exponent of (-Delta)^s. Integer exponents are classical Laplacian powers
/// and must be asked for explicitly.
class FracExponent {
public:
    explicit FracExponent(double s, bool allow_integer = false) : s_(s), allow_integer_(allow_integer) {
        if (!std::isfinite(s)) throw DomainError("fractional exponent must be finite");
        if (!allow_integer && s == std::round(s))
            throw DomainError("integer exponent " + std::to_string(s) + " requires allow_integer");
    }
    double value() const { return s_; }
    bool allow_integer() const { return allow_integer_; }

    /// The multiplier |xi|^{2s} is locally integrable only for s > -n/2.
    void check_dimension(int n) const {
        if (!(s_ > -0.5 * n)) throw DomainError("fractional exponent must exceed -n/2");
    }

private:
    double s_;
    bool allow_integer_;
};

/// Multiplies the padded spectrum by |xi|^{2s}; the DC bin is set to zero.
inline Spectrum& apply_fractional_multiplier(Spectrum& sp, const FracExponent& s) {
    s.check_dimension(sp.grid().n());
    const int n = sp.grid().n();
    const double e = s.value();
    return sp.multiply([&](const Point& xi, std::size_t) {
        const double r = norm(xi, n);
        return r == 0.0 ? 0.0 : std::pow(r, 2.0 * e);
    });
}

inline ScalarField fractional_laplacian(const ScalarField& f, const FracExponent& s) {
    Spectrum sp = spectral_forward(f);
    apply_fractional_multiplier(sp, s);
    return spectral_inverse(std::move(sp)).field;
}

inline VectorField fractional_laplacian(const VectorField& F, const FracExponent& s) {
    std::vector<ScalarField> out;
    for (int i = 0; i < F.n(); ++i) out.push_back(fractional_laplacian(F[i], s));
    return VectorField(std::move(out));
}

enum class ConstantsProvenance { analytic, calibrated };

inline std::string_view to_string(ConstantsProvenance p) {
    return p == ConstantsProvenance::analytic ? "analytic" : "calibrated";
}

struct ReconstructionConstants {
    int n = 2;
    double c0 = 0.0;
    double c1 = 0.0;
    ConstantsProvenance provenance = ConstantsProvenance::analytic;
    double c0_analytic = 0.0;
    double c1_analytic = 0.0;
    double c0_residual = 0.0;  ///< ||c0 (-Delta)^{1/2} N0 f - f|| / ||f|| on the calibration phantom
    double c1_residual = 0.0;

    void validate() const {
        if (!(c0 > 0.0) || !(c1 > 0.0)) throw DomainError("reconstruction constants must be positive");
    }
};

/// c0 = Gamma((n-1)/2) / (4 pi^{(n+1)/2}); c1 = (n-1) c0 from the symbol
/// relation between the scalar and vector normal operators.
inline ReconstructionConstants analytic_constants(int n) {
    if (n < 2) throw DomainError("reconstruction constants need n >= 2");
    ReconstructionConstants c;
    c.n = n;
    c.c0 = std::tgamma(0.5 * (n - 1)) / (4.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)));
    c.c1 = (n - 1) * c.c0;
    c.c0_analytic = c.c0;
    c.c1_analytic = c.c1;
    c.provenance = ConstantsProvenance::analytic;
    return c;
}

using WarningSink = std::function<void(std::string_view)>;

inline void warn_to_stderr(std::string_view msg) { std::cerr << "roitomo: warning: " << msg << '\n'; }

/// Where (-Delta)^{1/2} acts. Both compute (-Delta)^{1/2} X0* g:
/// `offsets` applies the half Laplacian of the offset variable to every
/// projection and back-projects the result (the two commute), `grid`
/// back-projects onto an enlarged grid and applies it there.
enum class HalfLaplacianRoute { offsets, grid };

struct ReconstructionOptions {
    HalfLaplacianRoute route = HalfLaplacianRoute::offsets;
    /// offsets route: zero-padding factor of the per-projection transform.
    int offset_pad = 32;
    /// grid route: the back-projection runs on a grid this many times wider
    /// (same spacing), so the slowly decaying N0 f is not cut at the box edge.
    int support_factor = 3;
};

namespace detail {

inline Grid reconstruction_grid(const Grid& g, const ReconstructionOptions& opt) {
    if (opt.support_factor < 1) throw DomainError("support_factor must be >= 1");
    if (opt.support_factor % 2 == 0)
        for (int a = 0; a < g.n(); ++a)
            if (g.size(a) % 2) throw GeometryError("even support_factor needs even grid sizes");
    return g.enlarged(opt.support_factor).with_pad(std::max(2, g.pad()));
}

inline const FracExponent& half_power() {
    static const FracExponent s(0.5);
    return s;
}

/// (-Delta_z)^{1/2} applied to every projection over its offset lattice.
inline Sinogram half_laplacian_offsets(const Sinogram& g, int pad) {
    const LineSet& ls = g.lines;
    if (ls.empty()) return g;
    const int m = ls.n(), no = ls.n_offsets();
    if (no < 8) throw GeometryError("offset lattice too coarse for the projection filter");
    const Grid lattice(m - 1, no, ls.offset_span(), pad);
    const auto table = lattice_table(g);
    const std::size_t per_angle = lattice.node_count();
    std::vector<double> filtered(table.size());
    for (int a = 0; a < ls.n_angles(); ++a) {
        ScalarField p(lattice, std::vector<double>(table.begin() + a * per_angle, table.begin() + (a + 1) * per_angle));
        const ScalarField q = fractional_laplacian(p, half_power());
        std::copy(q.values().begin(), q.values().end(), filtered.begin() + a * per_angle);
    }
    Sinogram out(ls);
    for (std::size_t i = 0; i < ls.size(); ++i)
        out.values[i] = filtered[static_cast<std::size_t>(ls[i].angle_index) * per_angle + ls[i].offset_index];
    return out;
}

/// (-Delta)^{1/2} X0* g on `grid`.
inline ScalarField half_laplacian_backprojection(const Sinogram& g, const Grid& grid, const ReconstructionOptions& opt) {
    if (opt.route == HalfLaplacianRoute::offsets)
        return xray_backproject_interp(half_laplacian_offsets(g, opt.offset_pad), grid);
    const Grid big = reconstruction_grid(grid, opt);
    return crop(fractional_laplacian(xray_backproject_interp(g, big), half_power()), grid);
}

inline VectorField half_laplacian_backprojection_vector(const Sinogram& g, const Grid& grid,
                                                        const ReconstructionOptions& opt) {
    if (opt.route == HalfLaplacianRoute::offsets)
        return xray_vector_backproject_interp(half_laplacian_offsets(g, opt.offset_pad), grid);
    const Grid big = reconstruction_grid(grid, opt);
    const VectorField b = xray_vector_backproject_interp(g, big);
    std::vector<ScalarField> out;
    for (int i = 0; i < grid.n(); ++i) out.push_back(crop(fractional_laplacian(b[i], half_power()), grid));
    return VectorField(std::move(out));
}

/// argmin_c ||c u - f|| and the relative residual at the minimiser.
inline std::pair<double, double> least_squares_scale(double uf, double uu, double ff) {
    if (!(uu > 0.0) || !(ff > 0.0)) throw DomainError("calibration phantom is degenerate");
    const double c = uf / uu;
    const double r2 = std::max(0.0, ff - 2.0 * c * uf + c * c * uu);
    return {c, std::sqrt(r2 / ff)};
}

}  // namespace detail

/// f = c0 (-Delta)^{1/2} X0* g. Full (unfiltered) line data is assumed.
inline ScalarField reconstruct_full_scalar(const Sinogram& g, const Grid& grid, const ReconstructionConstants& c,
                                           const ReconstructionOptions& opt = {},
                                           const WarningSink& warn = warn_to_stderr) {
    c.validate();
    if (g.lines.n() != grid.n()) throw GeometryError("reconstruct_full_scalar: dimension mismatch");
    if (g.lines.is_filtered() && warn)
        warn("reconstruct_full_scalar: line set is ROI-filtered; the inversion formula assumes full data");
    ScalarField f = detail::half_laplacian_backprojection(g, grid, opt);
    f *= c.c0;
    return f;
}

/// F_sol = c1 (-Delta)^{1/2} X1* g.
inline VectorField reconstruct_full_solenoidal(const Sinogram& g, const Grid& grid, const ReconstructionConstants& c,
                                               const ReconstructionOptions& opt = {},
                                               const WarningSink& warn = warn_to_stderr) {
    c.validate();
    if (g.lines.n() != grid.n()) throw GeometryError("reconstruct_full_solenoidal: dimension mismatch");
    if (g.lines.is_filtered() && warn)
        warn("reconstruct_full_solenoidal: line set is ROI-filtered; the inversion formula assumes full data");
    VectorField F = detail::half_laplacian_backprojection_vector(g, grid, opt);
    F *= c.c1;
    return F;
}

/// Gaussian calibration phantom exp(-|x - center|^2 / 2 sigma^2).
inline ScalarField calibration_gaussian(const Grid& g, double sigma, const Point& center = {0.0, 0.0, 0.0}) {
    const int n = g.n();
    return ScalarField::sample(g, [&](const Point& x) {
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
        return std::exp(-r2 / (2.0 * sigma * sigma));
    });
}

/// Divergence-free vortex (-d2 psi, d1 psi, 0) of the gaussian stream
/// function psi, sampled analytically.
inline VectorField calibration_vortex(const Grid& g, double sigma, const Point& center = {0.0, 0.0, 0.0}) {
    if (g.n() < 2) throw DomainError("vortex needs n >= 2");
    const int n = g.n();
    VectorField F(g);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const Point x = g.position(k);
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
        const double psi = std::exp(-r2 / (2.0 * sigma * sigma));
        const double s2 = sigma * sigma;
        F[0][k] = (x[1] - center[1]) / s2 * psi;
        F[1][k] = -(x[0] - center[0]) / s2 * psi;
    }
    return F;
}

struct CalibrationOptions {
    double sigma = 0.15;
    Point center{0.0, 0.0, 0.0};
    ReconstructionOptions reconstruction{};
};

/// Least-squares fit of c0 and c1 on smooth phantoms pushed through the
/// discrete transforms and the reconstruction formulas. The analytic values
/// are recorded alongside.
inline ReconstructionConstants calibrate_constants(const Grid& grid, const LineSet& ls, const CalibrationOptions& opt = {}) {
    if (ls.n() != grid.n()) throw GeometryError("calibrate_constants: dimension mismatch");
    ReconstructionConstants c = analytic_constants(grid.n());

    const ScalarField f = calibration_gaussian(grid, opt.sigma, opt.center);
    const ScalarField u = detail::half_laplacian_backprojection(xray_forward(f, ls), grid, opt.reconstruction);
    std::tie(c.c0, c.c0_residual) =
        detail::least_squares_scale(inner_product(u, f), inner_product(u, u), inner_product(f, f));

    const VectorField F = calibration_vortex(grid, opt.sigma, opt.center);
    const VectorField U =
        detail::half_laplacian_backprojection_vector(xray_vector_forward(F, ls), grid, opt.reconstruction);
    std::tie(c.c1, c.c1_residual) =
        detail::least_squares_scale(inner_product(U, F), inner_product(U, U), inner_product(F, F));

    c.provenance = ConstantsProvenance::calibrated;
    c.validate();
    return c;
}

}  // namespace roitomo
