#pragma once

#include <complex>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "roitomo/grid.hpp"

namespace roitomo {

using Complex = std::complex<double>;
using MultiIndex = std::vector<int>;

/// Constant-coefficient operator P(D) = sum_alpha a_alpha D^alpha with
/// D_j = -i d/dx_j, so that P(D) e^{i x.xi} = P(xi) e^{i x.xi}.
class PolyOp {
public:
    using Terms = std::map<MultiIndex, Complex>;

    PolyOp(int n, Terms terms) : n_(n) {
        for (auto& [alpha, a] : terms) {
            if (static_cast<int>(alpha.size()) != n) throw GeometryError("multi-index length does not match dimension");
            for (int e : alpha)
                if (e < 0) throw GeometryError("multi-index entries must be non-negative");
            if (a != Complex(0.0, 0.0)) terms_[alpha] += a;
        }
        std::erase_if(terms_, [](const auto& kv) { return kv.second == Complex(0.0, 0.0); });
        if (terms_.empty()) throw DomainError("the zero polynomial is not an admissible operator");
    }

    /// Constant operator c (c != 0).
    static PolyOp constant(int n, Complex c = 1.0) { return PolyOp(n, {{MultiIndex(n, 0), c}}); }

    /// D_j alone. Throws if j is not an axis of R^n.
    static PolyOp derivative(int n, int j) {
        if (j < 0 || j >= n) throw GeometryError("derivative axis out of dimension");
        MultiIndex a(n, 0);
        a[j] = 1;
        return PolyOp(n, {{a, 1.0}});
    }

    /// (-Delta)^k, symbol |xi|^{2k}.
    static PolyOp neg_laplacian_power(int n, int k) {
        PolyOp lap(n, [&] {
            Terms t;
            for (int j = 0; j < n; ++j) {
                MultiIndex a(n, 0);
                a[j] = 2;
                t[a] = 1.0;
            }
            return t;
        }());
        PolyOp out = constant(n);
        for (int i = 0; i < k; ++i) out = out.compose(lap);
        return out;
    }

    int n() const { return n_; }
    const Terms& terms() const { return terms_; }

    int order() const {
        int m = 0;
        for (const auto& [alpha, a] : terms_) m = std::max(m, total(alpha));
        return m;
    }

    /// Largest power of a single D_j over all terms.
    int max_axis_power() const {
        int m = 0;
        for (const auto& [alpha, a] : terms_)
            for (int e : alpha) m = std::max(m, e);
        return m;
    }

    /// Cells reached by the composed central stencils along one axis.
    int stencil_radius() const { return (max_axis_power() + 1) / 2; }

    /// Euclidean coefficient norm sqrt(sum |a_alpha|^2).
    double coefficient_norm() const {
        double s = 0.0;
        for (const auto& [alpha, a] : terms_) s += std::norm(a);
        return std::sqrt(s);
    }

    Complex symbol(std::span<const double> xi) const {
        if (static_cast<int>(xi.size()) < n_) throw GeometryError("frequency vector shorter than dimension");
        Complex s(0.0, 0.0);
        for (const auto& [alpha, a] : terms_) {
            double mono = 1.0;
            for (int j = 0; j < n_; ++j)
                for (int e = 0; e < alpha[j]; ++e) mono *= xi[j];
            s += a * mono;
        }
        return s;
    }

    Complex symbol(std::span<const Complex> xi) const {
        Complex s(0.0, 0.0);
        for (const auto& [alpha, a] : terms_) {
            Complex mono = 1.0;
            for (int j = 0; j < n_; ++j)
                for (int e = 0; e < alpha[j]; ++e) mono *= xi[j];
            s += a * mono;
        }
        return s;
    }

    /// Operator product; the symbol of the result is the pointwise product.
    PolyOp compose(const PolyOp& o) const {
        if (o.n_ != n_) throw GeometryError("compose: dimension mismatch");
        Terms t;
        for (const auto& [a1, c1] : terms_)
            for (const auto& [a2, c2] : o.terms_) {
                MultiIndex a(n_);
                for (int j = 0; j < n_; ++j) a[j] = a1[j] + a2[j];
                t[a] += c1 * c2;
            }
        return PolyOp(n_, std::move(t));
    }

    PolyOp operator+(const PolyOp& o) const {
        if (o.n_ != n_) throw GeometryError("sum: dimension mismatch");
        Terms t = terms_;
        for (const auto& [a, c] : o.terms_) t[a] += c;
        return PolyOp(n_, std::move(t));
    }

    PolyOp scaled(Complex c) const {
        Terms t = terms_;
        for (auto& [a, v] : t) v *= c;
        return PolyOp(n_, std::move(t));
    }

    bool operator==(const PolyOp& o) const { return n_ == o.n_ && terms_ == o.terms_; }

    static int total(const MultiIndex& a) {
        int s = 0;
        for (int e : a) s += e;
        return s;
    }

private:
    int n_;
    Terms terms_;
};

inline Complex symbol_eval(const PolyOp& p, std::span<const double> xi) { return p.symbol(xi); }
inline PolyOp compose(const PolyOp& a, const PolyOp& b) { return a.compose(b); }

}  // namespace roitomo
