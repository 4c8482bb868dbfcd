#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "roitomo/grid.hpp"
#include "roitomo/polyop.hpp"

namespace roitomo {

/// Closed-form rule that an admissible patch follows exactly on V.
enum class PatchRule {
    polynomial,              ///< real polynomial sum c_alpha (x - c)^alpha
    polyharmonic,            ///< Re((x1 + i x2)^degree) about c, harmonic in the plane
    plane_wave,              ///< cos(xi0 . (x - c) + phase)
    coordinate_independent,  ///< exp(-(x_b - c_b)^2 / 2w^2) summed over axes b != axis
    wave,                    ///< d'Alembert profile g(x1 - x2) + g(x1 + x2), g(u) = cos(kappa u)e^{-u^2/2w^2}
};

enum class PhantomKind { gaussian, disk_indicator, bump, admissible_patch };

struct PhantomSpec {
    PhantomKind kind = PhantomKind::gaussian;
    Point center{0.0, 0.0, 0.0};
    double sigma = 0.15;   ///< gaussian width
    double radius = 0.5;   ///< disk or bump radius
    double amplitude = 1.0;

    // admissible_patch
    PatchRule rule = PatchRule::polynomial;
    double v_radius = 0.2;       ///< V = open ball(center, v_radius); the rule holds exactly there
    double taper_radius = 0.33;  ///< the patch has decayed to zero at this radius
    /// Polynomial coefficients keyed by multi-index (polynomial rule).
    std::map<MultiIndex, double> poly;
    int degree = 3;               ///< polyharmonic degree
    Point xi0{10.0, 0.0, 0.0};    ///< plane-wave frequency
    double phase = 0.0;
    int axis = 0;                 ///< coordinate_independent: the variable f ignores
    double width = 0.1;           ///< coordinate_independent / wave profile width
    double kappa = 8.0;           ///< wave profile frequency
    // Outer part, blended in where the patch cutoff is below one.
    Point outer_center{0.0, 0.0, 0.0};
    double outer_radius = 0.0;  ///< 0 disables the outer bump
    double outer_amplitude = 0.0;
};

struct PhantomSample {
    ScalarField field;
    std::optional<PolyOp> annihilator;  ///< P with P(D)f = 0 on V (admissible_patch only)
};

namespace detail {

inline double smooth_psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

/// C-infinity step: 1 for r <= r1, 0 for r >= r2.
inline double smooth_cutoff(double r, double r1, double r2) {
    if (r <= r1) return 1.0;
    if (r >= r2) return 0.0;
    const double t = (r - r1) / (r2 - r1);
    const double a = smooth_psi(1.0 - t);
    return a / (a + smooth_psi(t));
}

/// C-infinity bump supported in |x| < radius, equal to 1 at the centre.
inline double bump(double r, double radius) {
    if (r >= radius) return 0.0;
    const double q = r / radius;
    return std::exp(1.0 - 1.0 / (1.0 - q * q));
}

inline double distance(const Point& a, const Point& b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double patch_rule_value(const PhantomSpec& s, const Point& x, int n) {
    Point d{0.0, 0.0, 0.0};
    for (int i = 0; i < n; ++i) d[i] = x[i] - s.center[i];
    switch (s.rule) {
        case PatchRule::polynomial: {
            double v = 0.0;
            for (const auto& [alpha, c] : s.poly) {
                double m = c;
                for (int j = 0; j < n; ++j) m *= std::pow(d[j], alpha[j]);
                v += m;
            }
            return v;
        }
        case PatchRule::polyharmonic:
            return std::pow(std::complex<double>(d[0], d[1]), s.degree).real();
        case PatchRule::plane_wave:
            return std::cos(dot(s.xi0, d, n) + s.phase);
        case PatchRule::coordinate_independent: {
            double v = 0.0;
            for (int b = 0; b < n; ++b)
                if (b != s.axis) v += std::exp(-d[b] * d[b] / (2 * s.width * s.width));
            return v;
        }
        case PatchRule::wave: {
            auto g = [&](double u) { return std::cos(s.kappa * u) * std::exp(-u * u / (2 * s.width * s.width)); };
            return g(d[0] - d[1]) + g(d[0] + d[1]);
        }
    }
    return 0.0;
}

inline PolyOp patch_annihilator(const PhantomSpec& s, int n) {
    switch (s.rule) {
        case PatchRule::polynomial: {
            int deg = 0;
            for (const auto& [alpha, c] : s.poly)
                if (c != 0.0) deg = std::max(deg, PolyOp::total(alpha));
            // (-Delta)^k annihilates every polynomial of degree < 2k.
            return PolyOp::neg_laplacian_power(n, deg / 2 + 1);
        }
        case PatchRule::polyharmonic:
            return PolyOp::neg_laplacian_power(n, 1);
        case PatchRule::plane_wave: {
            // Directional derivative along a vector orthogonal to xi0: P(xi0) = 0.
            PolyOp::Terms t;
            MultiIndex a0(n, 0), a1(n, 0);
            a0[0] = 1;
            a1[1] = 1;
            t[a0] = -s.xi0[1];
            t[a1] = s.xi0[0];
            return PolyOp(n, t);
        }
        case PatchRule::coordinate_independent:
            return PolyOp::derivative(n, s.axis);
        case PatchRule::wave: {
            // D1^2 - D2^2: the wave operator with x2 as time.
            PolyOp::Terms t;
            MultiIndex a(n, 0), b(n, 0);
            a[0] = 2;
            b[1] = 2;
            t[a] = 1.0;
            t[b] = -1.0;
            return PolyOp(n, t);
        }
    }
    throw DomainError("unknown patch rule");
}

}  // namespace detail

/// Radius, about the grid origin, outside which the phantom vanishes
/// (gaussians count out to four widths).
inline double phantom_support_radius(const PhantomSpec& s, int n) {
    const Point o{0.0, 0.0, 0.0};
    const double c = detail::distance(s.center, o, n);
    switch (s.kind) {
        case PhantomKind::gaussian:
            return c + 4.0 * s.sigma;
        case PhantomKind::disk_indicator:
        case PhantomKind::bump:
            return c + s.radius;
        case PhantomKind::admissible_patch: {
            double r = c + s.taper_radius;
            if (s.outer_radius > 0.0) r = std::max(r, detail::distance(s.outer_center, o, n) + s.outer_radius);
            return r;
        }
    }
    return c;
}

/// Samples the closed-form phantom on the grid. Admissible patches are
/// chi * rule + (1 - chi) * outer with chi = 1 on V, so f equals the rule on V
/// and the outer part vanishes there.
inline PhantomSample sample_phantom(const PhantomSpec& s, const Grid& g) {
    const int n = g.n();
    if (s.kind == PhantomKind::gaussian && !(s.sigma > 0.0)) throw GeometryError("gaussian sigma must be positive");
    if ((s.kind == PhantomKind::disk_indicator || s.kind == PhantomKind::bump) && !(s.radius > 0.0))
        throw GeometryError("phantom radius must be positive");
    if (s.kind == PhantomKind::admissible_patch) {
        if (!(s.v_radius > 0.0) || !(s.taper_radius > s.v_radius))
            throw GeometryError("admissible patch needs 0 < v_radius < taper_radius");
        if (s.rule == PatchRule::polyharmonic && n != 2) throw GeometryError("polyharmonic rule is planar");
        if ((s.rule == PatchRule::plane_wave || s.rule == PatchRule::wave) && n < 2)
            throw GeometryError("rule needs n >= 2");
        if (s.rule == PatchRule::coordinate_independent && (s.axis < 0 || s.axis >= n))
            throw GeometryError("coordinate_independent axis out of dimension");
        for (const auto& [alpha, c] : s.poly)
            if (static_cast<int>(alpha.size()) != n) throw GeometryError("polynomial multi-index length mismatch");
    }
    if (phantom_support_radius(s, n) > g.support_radius() + 1e-12)
        throw GeometryError("phantom extends beyond 0.9 * extent");

    PhantomSample out{ScalarField(g), std::nullopt};
    for (std::size_t k = 0; k < out.field.size(); ++k) {
        const Point x = g.position(k);
        const double r = detail::distance(x, s.center, n);
        double v = 0.0;
        switch (s.kind) {
            case PhantomKind::gaussian:
                v = s.amplitude * std::exp(-r * r / (2.0 * s.sigma * s.sigma));
                break;
            case PhantomKind::disk_indicator:
                v = r < s.radius ? s.amplitude : 0.0;
                break;
            case PhantomKind::bump:
                v = s.amplitude * detail::bump(r, s.radius);
                break;
            case PhantomKind::admissible_patch: {
                const double chi = detail::smooth_cutoff(r, s.v_radius, s.taper_radius);
                double outer = 0.0;
                if (s.outer_radius > 0.0 && chi < 1.0)
                    outer = s.outer_amplitude * detail::bump(detail::distance(x, s.outer_center, n), s.outer_radius);
                const double inner = chi > 0.0 ? detail::patch_rule_value(s, x, n) : 0.0;
                v = s.amplitude * chi * inner + (1.0 - chi) * outer;
                break;
            }
        }
        out.field[k] = v;
    }
    if (s.kind == PhantomKind::admissible_patch) out.annihilator = detail::patch_annihilator(s, n);
    return out;
}

/// The region V of an admissible patch, eroded for its annihilator's stencil.
inline RegionMask patch_region(const PhantomSpec& s, const Grid& g, const PolyOp& p) {
    return RegionMask::ball(g, s.center, s.v_radius, 1.5 * p.stencil_radius() * g.h());
}

}  // namespace roitomo
