#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "roitomo/fraclap.hpp"
#include "roitomo/grid.hpp"
#include "roitomo/spectral.hpp"
#include "roitomo/xray.hpp"

namespace roitomo {

/// (dF)_{ij} = d_i F_j - d_j F_i, stored for i < j in the order
/// (0,1), (0,2), (1,2).
class SkewField {
public:
    SkewField() = default;
    explicit SkewField(const Grid& g) : grid_(g), comps_(pair_count(g.n()), ScalarField(g)) {}

    static int pair_count(int n) { return n * (n - 1) / 2; }

    /// Slot of the pair (i, j), i < j.
    static int slot(int n, int i, int j) {
        int k = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b, ++k)
                if (a == i && b == j) return k;
        throw GeometryError("skew component index out of range");
    }

    const Grid& grid() const { return grid_; }
    int n() const { return grid_.n(); }
    int size() const { return static_cast<int>(comps_.size()); }
    ScalarField& component(int k) { return comps_[k]; }
    const ScalarField& component(int k) const { return comps_[k]; }

    /// Entry (i, j) at node k with the antisymmetric convention.
    double at(int i, int j, std::size_t k) const {
        if (i == j) return 0.0;
        return i < j ? comps_[slot(n(), i, j)][k] : -comps_[slot(n(), j, i)][k];
    }

    SkewField& operator-=(const SkewField& o) {
        for (int k = 0; k < size(); ++k) comps_[k] -= o.comps_[k];
        return *this;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& c : comps_) m = std::max(m, c.max_abs());
        return m;
    }

private:
    Grid grid_;
    std::vector<ScalarField> comps_;
};

inline double l2_norm(const SkewField& s) {
    double t = 0.0;
    for (int k = 0; k < s.size(); ++k) t += inner_product(s.component(k), s.component(k));
    return std::sqrt(t);
}

/// Second-order finite difference d f / d x_axis: central inside,
/// one-sided three-point at the two boundary layers.
inline ScalarField partial_derivative(const ScalarField& f, int axis) {
    const Grid& g = f.grid();
    if (axis < 0 || axis >= g.n()) throw GeometryError("derivative axis out of dimension");
    const int N = g.size(axis);
    const double h = g.h();
    std::size_t stride = 1;
    for (int a = g.n() - 1; a > axis; --a) stride *= g.size(a);
    ScalarField out(g);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const int i = g.unflat(k)[axis];
        double d;
        if (i == 0)
            d = (-3.0 * f[k] + 4.0 * f[k + stride] - f[k + 2 * stride]) / (2.0 * h);
        else if (i == N - 1)
            d = (3.0 * f[k] - 4.0 * f[k - stride] + f[k - 2 * stride]) / (2.0 * h);
        else
            d = (f[k + stride] - f[k - stride]) / (2.0 * h);
        out[k] = d;
    }
    return out;
}

inline SkewField exterior_derivative(const VectorField& F) {
    const Grid& g = F.grid();
    const int n = g.n();
    SkewField out(g);
    // d_i F_j for every ordered pair, then antisymmetrise.
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++k) out.component(k) = partial_derivative(F[j], i) - partial_derivative(F[i], j);
    return out;
}

/// Spectral gradient on the padded grid, cropped.
inline VectorField spectral_gradient(const ScalarField& phi) {
    const Grid& g = phi.grid();
    const Spectrum s = spectral_forward(phi);
    std::vector<ScalarField> comps;
    for (int a = 0; a < g.n(); ++a) {
        Spectrum d = s;
        d.multiply([&](const Point& xi, std::size_t k) { return d.on_nyquist(k, a) ? Complex(0.0) : Complex(0.0, xi[a]); });
        comps.push_back(spectral_inverse(std::move(d)).field);
    }
    return VectorField(std::move(comps));
}

/// Analytic gradient of the gaussian exp(-|x - c|^2 / 2 sigma^2).
inline VectorField gaussian_gradient(const Grid& g, double sigma, const Point& c = {0.0, 0.0, 0.0}) {
    const int n = g.n();
    VectorField F(g);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const Point x = g.position(k);
        double r2 = 0.0;
        for (int i = 0; i < n; ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
        const double p = std::exp(-r2 / (2.0 * sigma * sigma));
        for (int i = 0; i < n; ++i) F[i][k] = -(x[i] - c[i]) / (sigma * sigma) * p;
    }
    return F;
}

/// (d_1 psi, -d_0 psi, 0): divergence free, with (dF)_01 = -Delta_{01} psi.
inline VectorField stream_field(const ScalarField& psi) {
    if (psi.grid().n() < 2) throw DomainError("stream field needs n >= 2");
    const VectorField grad = spectral_gradient(psi);
    VectorField F(psi.grid());
    F[0] = grad[1];
    F[1] = grad[0];
    F[1] *= -1.0;
    return F;
}

struct HelmholtzParts {
    VectorField solenoidal;  ///< F_sol, divergence free
    ScalarField potential;   ///< phi with zero DC bin
    VectorField gradient;    ///< d phi, so that F = solenoidal + gradient
};

/// F = F_sol + d phi by the projection (I - xi xi^T / |xi|^2) on the padded
/// spectrum. The DC bin stays with F_sol; Nyquist planes, where the
/// derivative symbol is not real, also stay with F_sol.
inline HelmholtzParts solenoidal_decompose(const VectorField& F) {
    const Grid& g = F.grid();
    const int n = g.n();
    std::vector<Spectrum> fs;
    for (int i = 0; i < n; ++i) fs.push_back(spectral_forward(F[i]));
    Spectrum phi = Spectrum::zeros(g);
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const Point xi = phi.frequency(k);
        bool nyq = false;
        for (int a = 0; a < n; ++a) nyq = nyq || phi.on_nyquist(k, a);
        const double r2 = dot(xi, xi, n);
        if (r2 == 0.0 || nyq) continue;
        Complex div(0.0, 0.0);
        for (int a = 0; a < n; ++a) div += xi[a] * fs[a][k];
        phi[k] = Complex(0.0, -1.0) * div / r2;  // i xi phi_hat = xi (xi . F_hat) / |xi|^2
    }
    std::vector<ScalarField> grad;
    for (int a = 0; a < n; ++a) {
        Spectrum d = phi;
        d.multiply([&](const Point& xi, std::size_t) { return Complex(0.0, xi[a]); });
        grad.push_back(spectral_inverse(std::move(d)).field);
    }
    HelmholtzParts out{F, spectral_inverse(std::move(phi)).field, VectorField(std::move(grad))};
    out.solenoidal -= out.gradient;
    return out;
}

/// Relative curl defect ||dF|| / (sqrt(2) * ||Jacobian||) below which F
/// counts as a gradient.
inline constexpr double kGradientTolerance = 1e-2;

inline double curl_defect(const VectorField& F) {
    const int n = F.n();
    double jac = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const ScalarField d = partial_derivative(F[j], i);
            jac += inner_product(d, d);
        }
    const double curl = l2_norm(exterior_derivative(F));
    if (jac == 0.0) return curl == 0.0 ? 0.0 : INFINITY;
    return curl / std::sqrt(2.0 * jac);
}

/// phi with d phi = F and zero grid mean. Rejects fields with a curl.
inline ScalarField recover_potential(const VectorField& F, double tol = kGradientTolerance) {
    const double defect = curl_defect(F);
    if (!(defect < tol))
        throw NotAGradientError("field is not a gradient: relative curl defect " + std::to_string(defect));
    ScalarField phi = solenoidal_decompose(F).potential;
    const double m = phi.mean();
    for (double& v : phi.values()) v -= m;
    return phi;
}

// ---------------------------------------------------------------------------

struct IdentityDefect {
    double relative = 0.0;  ///< ||lhs - rhs|| / max(||lhs||, ||rhs||)
    double scaled = 0.0;    ///< ||lhs - rhs|| / scale
    double scale = 0.0;     ///< (n-1)^{-1} ||N0 applied to every entry of the Jacobian of F||
    double lhs_norm = 0.0;
    double rhs_norm = 0.0;
};

enum class IdentityRoute { convolution, composition };

/// Compares d(N1 F) with (n-1)^{-1} N0 applied to each component of dF.
inline IdentityDefect curl_normal_identity_defect(const VectorField& F, const LineSet& ls,
                                                  IdentityRoute route = IdentityRoute::convolution) {
    const Grid& g = F.grid();
    const int n = g.n();
    if (n < 2) throw DomainError("identity needs n >= 2");
    auto N0 = [&](const ScalarField& f) {
        return route == IdentityRoute::convolution ? normal_scalar_conv(f) : normal_scalar(f, ls);
    };
    const VectorField N1F = route == IdentityRoute::convolution ? normal_vector_conv(F) : normal_vector(F, ls);
    SkewField lhs = exterior_derivative(N1F);
    const SkewField dF = exterior_derivative(F);
    SkewField rhs(g);
    for (int k = 0; k < dF.size(); ++k) {
        rhs.component(k) = N0(dF.component(k));
        rhs.component(k) *= 1.0 / (n - 1);
    }
    IdentityDefect out;
    out.lhs_norm = l2_norm(lhs);
    out.rhs_norm = l2_norm(rhs);
    double s2 = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const ScalarField c = N0(partial_derivative(F[j], i));
            s2 += inner_product(c, c);
        }
    out.scale = std::sqrt(s2) / (n - 1);
    lhs -= rhs;
    const double diff = l2_norm(lhs);
    const double m = std::max(out.lhs_norm, out.rhs_norm);
    out.relative = m > 0.0 ? diff / m : 0.0;
    out.scaled = out.scale > 0.0 ? diff / out.scale : 0.0;
    return out;
}

}  // namespace roitomo
