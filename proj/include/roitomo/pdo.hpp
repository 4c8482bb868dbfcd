#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "roitomo/grid.hpp"
#include "roitomo/polyop.hpp"

namespace roitomo {

/// Complex values of P(D)f on the nodes where the operator was evaluated.
struct MaskedComplexField {
    Grid grid;
    std::vector<std::size_t> nodes;
    std::vector<Complex> values;

    double l2_norm() const {
        double s = 0.0;
        for (const Complex& v : values) s += std::norm(v);
        return std::sqrt(s * grid.cell_volume());
    }
    double max_abs() const {
        double m = 0.0;
        for (const Complex& v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

namespace detail {

/// Second-order central stencil for d^k/dx^k: delta^(k mod 2) (delta^2)^(k/2).
inline std::vector<double> central_stencil(int k, double h) {
    std::vector<double> s{1.0};
    auto conv = [](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> c(a.size() + b.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
        return c;
    };
    const std::vector<double> d1{-0.5 / h, 0.0, 0.5 / h};
    const std::vector<double> d2{1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)};
    if (k % 2) s = conv(s, d1);
    for (int i = 0; i < k / 2; ++i) s = conv(s, d2);
    return s;  // centred, radius (s.size()-1)/2
}

}  // namespace detail

/// P(D) as a merged list of node offsets and complex weights on a grid.
class CompiledStencil {
public:
    struct Tap {
        Index offset;
        Complex weight;
    };

    CompiledStencil(const PolyOp& p, const Grid& grid) : grid_(grid) {
        if (p.n() != grid.n()) throw GeometryError("operator dimension does not match grid");
        const int n = grid.n();
        const double h = grid.h();
        std::map<Index, Complex> merged;
        for (const auto& [alpha, a] : p.terms()) {
            // D^alpha = (-i)^|alpha| d^alpha
            Complex c = a;
            for (int e = 0; e < PolyOp::total(alpha); ++e) c *= Complex(0.0, -1.0);
            std::vector<std::vector<double>> axis(n);
            for (int j = 0; j < n; ++j) axis[j] = detail::central_stencil(alpha[j], h);
            Index off{0, 0, 0};
            std::function<void(int, Complex)> rec = [&](int j, Complex w) {
                if (j == n) {
                    merged[off] += w;
                    return;
                }
                const int r = static_cast<int>(axis[j].size() - 1) / 2;
                for (int i = 0; i < static_cast<int>(axis[j].size()); ++i) {
                    if (axis[j][i] == 0.0) continue;
                    off[j] = i - r;
                    rec(j + 1, w * axis[j][i]);
                }
                off[j] = 0;
            };
            rec(0, c);
        }
        for (const auto& [o, w] : merged)
            if (w != Complex(0.0, 0.0)) taps_.push_back({o, w});
    }

    const std::vector<Tap>& taps() const { return taps_; }

    /// sum |w|, the max-norm bound of the discrete operator.
    double weight_norm() const {
        double s = 0.0;
        for (const Tap& t : taps_) s += std::abs(t.weight);
        return s;
    }
    const Grid& grid() const { return grid_; }

    /// Nodes of interior(mask) whose every tap lands inside the grid and the mask.
    std::vector<std::size_t> evaluation_nodes(const RegionMask& mask) const {
        require_same_grid(grid_, mask.grid(), "apply_fd");
        const RegionMask inner = mask.interior();
        std::vector<std::size_t> nodes;
        for (std::size_t k = 0; k < inner.inside().size(); ++k) {
            if (!inner.contains(k)) continue;
            const Index idx = grid_.unflat(k);
            bool ok = true;
            for (const Tap& t : taps_) {
                Index q{idx[0] + t.offset[0], idx[1] + t.offset[1], idx[2] + t.offset[2]};
                if (!grid_.contains(q) || !mask.contains(grid_.flat(q))) {
                    ok = false;
                    break;
                }
            }
            if (ok) nodes.push_back(k);
        }
        return nodes;
    }

    std::vector<Complex> apply(std::span<const double> f, std::span<const std::size_t> nodes) const {
        std::vector<Complex> out(nodes.size());
        const auto deltas = flat_deltas();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            Complex s(0.0, 0.0);
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(nodes[i]);
            for (std::size_t t = 0; t < taps_.size(); ++t) s += taps_[t].weight * f[base + deltas[t]];
            out[i] = s;
        }
        return out;
    }

    /// Transpose with respect to the real pairing Re sum conj(r) (Lf):
    /// out(x + o) += Re(conj(w_o) r_x).
    void apply_adjoint_add(std::span<const Complex> r, std::span<const std::size_t> nodes, std::span<double> out) const {
        const auto deltas = flat_deltas();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(nodes[i]);
            for (std::size_t t = 0; t < taps_.size(); ++t)
                out[base + deltas[t]] += (std::conj(taps_[t].weight) * r[i]).real();
        }
    }

private:
    std::vector<std::ptrdiff_t> flat_deltas() const {
        std::vector<std::ptrdiff_t> d;
        d.reserve(taps_.size());
        for (const Tap& t : taps_) {
            std::ptrdiff_t k = 0;
            for (int a = 0; a < grid_.n(); ++a) k = k * grid_.size(a) + t.offset[a];
            d.push_back(k);
        }
        return d;
    }

    Grid grid_;
    std::vector<Tap> taps_;
};

/// Second-order finite-difference P(D)f on the stencil-safe part of interior(mask).
inline MaskedComplexField apply_fd(const PolyOp& p, const ScalarField& f, const RegionMask& mask) {
    require_same_grid(f.grid(), mask.grid(), "apply_fd");
    CompiledStencil st(p, f.grid());
    MaskedComplexField out{f.grid(), st.evaluation_nodes(mask), {}};
    if (out.nodes.empty()) throw RegionError("apply_fd: no node of the region interior can host the stencil");
    out.values = st.apply(f.values(), out.nodes);
    return out;
}

/// Erosion radius that keeps the stencil of P inside V.
inline double stencil_erosion_radius(const PolyOp& p, const Grid& g) { return 1.5 * p.stencil_radius() * g.h(); }

/// Fraction of uniform samples xi in [-10, 10]^n with |P(xi)| < eps (1 + |xi|^m).
/// A fixed seed makes the sample set, and so the sublevel sets, nested in eps.
inline double zero_set_fraction(const PolyOp& p, std::size_t samples, double eps, std::uint64_t seed = 20240917) {
    if (samples == 0) throw DomainError("zero_set_fraction needs at least one sample");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    const int n = p.n();
    const int m = p.order();
    std::vector<double> xi(n);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        double r2 = 0.0;
        for (int j = 0; j < n; ++j) {
            xi[j] = u(rng);
            r2 += xi[j] * xi[j];
        }
        if (std::abs(p.symbol(xi)) < eps * (1.0 + std::pow(std::sqrt(r2), m))) ++hits;
    }
    return static_cast<double>(hits) / samples;
}

struct AdmissibilityResult {
    bool admissible = false;
    double residual = 0.0;
};

/// residual = ||P(D)f||_V / (||P_h|| ||f||_V) with ||P_h|| the weight norm
/// of the compiled stencil, evaluated on the nodes hosting the stencil. The
/// stencil norm keeps the residual independent of h and of the operator order,
/// so exactly annihilated fields sit at rounding level. A field vanishing
/// there is admissible with residual 0.
inline AdmissibilityResult is_admissible(const ScalarField& f, const PolyOp& p, const RegionMask& v, double tol = 1e-6) {
    require_same_grid(f.grid(), v.grid(), "is_admissible");
    const CompiledStencil st(p, f.grid());
    const std::vector<std::size_t> nodes = st.evaluation_nodes(v);
    if (nodes.empty()) throw RegionError("is_admissible: no node of the region interior can host the stencil");
    const std::vector<Complex> pf = st.apply(f.values(), nodes);
    double num = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        num += std::norm(pf[i]);
        fn += f[nodes[i]] * f[nodes[i]];
    }
    num = std::sqrt(num);
    fn = std::sqrt(fn);
    const double res = fn > 0.0 ? num / (st.weight_norm() * fn) : (num > 0.0 ? INFINITY : 0.0);
    return {res < tol, res};
}

}  // namespace roitomo
