#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "roitomo/error.hpp"

namespace roitomo {

inline constexpr int kMaxDim = 3;

/// Point or direction in R^n, n <= 3. Unused trailing coordinates are zero.
using Point = std::array<double, kMaxDim>;
using Index = std::array<int, kMaxDim>;

inline double dot(const Point& a, const Point& b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Point& a, int n) { return std::sqrt(dot(a, a, n)); }

/// Regular cell-vertex grid over the box prod_a [-extent_a, extent_a).
///
/// Node i on axis a sits at -extent_a + i*h. With an even size the node
/// size/2 is the origin. Spectral operators work on a zero-padded copy of the
/// grid that is pad times larger along every axis.
class Grid {
public:
    Grid() = default;

    Grid(int n, int size, double extent = 1.0, int pad = 2) : n_(n), pad_(pad) {
        for (int a = 0; a < kMaxDim; ++a) {
            size_[a] = a < n ? size : 1;
            extent_[a] = a < n ? extent : 0.0;
        }
        validate();
    }

    Grid(int n, Index size, Point extent, int pad) : n_(n), size_(size), extent_(extent), pad_(pad) {
        for (int a = n; a < kMaxDim; ++a) {
            size_[a] = 1;
            extent_[a] = 0.0;
        }
        validate();
    }

    int n() const { return n_; }
    int size(int axis) const { return size_[axis]; }
    const Index& sizes() const { return size_; }
    double extent(int axis) const { return extent_[axis]; }
    const Point& extents() const { return extent_; }
    int pad() const { return pad_; }

    double h() const { return 2.0 * extent_[0] / size_[0]; }
    double cell_volume() const { return std::pow(h(), n_); }

    std::size_t node_count() const {
        std::size_t c = 1;
        for (int a = 0; a < n_; ++a) c *= static_cast<std::size_t>(size_[a]);
        return c;
    }

    /// Largest half-width over the axes.
    double max_extent() const { return *std::max_element(extent_.begin(), extent_.begin() + n_); }

    /// Radius of the ball circumscribing the box.
    double ball_radius() const {
        double s = 0.0;
        for (int a = 0; a < n_; ++a) s += extent_[a] * extent_[a];
        return std::sqrt(s);
    }

    /// Phantoms must live inside this ball.
    double support_radius() const { return 0.9 * max_extent(); }

    double coord(int axis, int i) const { return -extent_[axis] + i * h(); }

    Point position(const Index& idx) const {
        Point p{0.0, 0.0, 0.0};
        for (int a = 0; a < n_; ++a) p[a] = coord(a, idx[a]);
        return p;
    }

    /// Row-major flat index; the last axis varies fastest.
    std::size_t flat(const Index& idx) const {
        std::size_t k = 0;
        for (int a = 0; a < n_; ++a) k = k * size_[a] + idx[a];
        return k;
    }

    Index unflat(std::size_t k) const {
        Index idx{0, 0, 0};
        for (int a = n_ - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(k % size_[a]);
            k /= size_[a];
        }
        return idx;
    }

    Point position(std::size_t k) const { return position(unflat(k)); }

    bool contains(const Index& idx) const {
        for (int a = 0; a < n_; ++a)
            if (idx[a] < 0 || idx[a] >= size_[a]) return false;
        return true;
    }

    /// Same spacing, sizes multiplied by factor, centred on the same origin.
    Grid enlarged(int factor) const {
        Index s = size_;
        Point e = extent_;
        for (int a = 0; a < n_; ++a) {
            s[a] *= factor;
            e[a] *= factor;
        }
        return Grid(n_, s, e, pad_);
    }

    Grid with_pad(int pad) const { return Grid(n_, size_, extent_, pad); }

    bool same_geometry(const Grid& o) const {
        if (n_ != o.n_) return false;
        for (int a = 0; a < n_; ++a) {
            if (size_[a] != o.size_[a]) return false;
            if (std::abs(extent_[a] - o.extent_[a]) > 1e-12 * std::max(1.0, extent_[a])) return false;
        }
        return true;
    }

    bool operator==(const Grid& o) const { return same_geometry(o) && pad_ == o.pad_; }

private:
    void validate() const {
        if (n_ < 1 || n_ > kMaxDim) throw GeometryError("grid dimension must be 1, 2 or 3");
        if (pad_ < 1) throw GeometryError("pad factor must be >= 1");
        for (int a = 0; a < n_; ++a) {
            if (size_[a] < 8) throw GeometryError("grid size must be >= 8 per axis");
            if (!(extent_[a] > 0.0)) throw GeometryError("grid extent must be positive");
        }
        const double h0 = 2.0 * extent_[0] / size_[0];
        for (int a = 1; a < n_; ++a) {
            const double ha = 2.0 * extent_[a] / size_[a];
            if (std::abs(ha - h0) > 1e-12 * h0) throw GeometryError("grid spacing must agree across axes");
        }
    }

    int n_ = 2;
    Index size_{128, 128, 1};
    Point extent_{1.0, 1.0, 0.0};
    int pad_ = 2;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_geometry(b)) throw GeometryError(std::string(what) + ": grid mismatch");
}

/// Real samples of a scalar field on a Grid.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(Grid grid) : grid_(std::move(grid)), values_(grid_.node_count(), 0.0) {}
    ScalarField(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.node_count()) throw GeometryError("field value count does not match grid");
    }

    template <class F>
    static ScalarField sample(const Grid& grid, F&& fn) {
        ScalarField out(grid);
        for (std::size_t k = 0; k < out.size(); ++k) out.values_[k] = fn(grid.position(k));
        return out;
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t k) const { return values_[k]; }
    double& operator[](std::size_t k) { return values_[k]; }
    double at(const Index& idx) const { return values_[grid_.flat(idx)]; }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "field +=");
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "field -=");
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    ScalarField& operator*=(double c) {
        for (double& v : values_) v *= c;
        return *this;
    }
    /// this += c * o
    ScalarField& axpy(double c, const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "field axpy");
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += c * o.values_[k];
        return *this;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    double mean() const {
        return values_.empty() ? 0.0 : std::accumulate(values_.begin(), values_.end(), 0.0) / values_.size();
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double c, ScalarField a) { return a *= c; }

/// L2 pairing h^n * sum a_i b_i.
inline double inner_product(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "inner_product");
    double s = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
    return a.grid().cell_volume() * s;
}

inline double l2_norm(const ScalarField& a) { return std::sqrt(inner_product(a, a)); }

inline double relative_l2(const ScalarField& approx, const ScalarField& truth) {
    const double d = l2_norm(approx - truth);
    const double t = l2_norm(truth);
    return t > 0.0 ? d / t : d;
}

/// Components F_1..F_n on one shared grid.
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const Grid& grid) : components_(grid.n(), ScalarField(grid)) {}
    explicit VectorField(std::vector<ScalarField> comps) : components_(std::move(comps)) {
        if (components_.empty()) throw GeometryError("vector field needs at least one component");
        for (const auto& c : components_) require_same_grid(components_[0].grid(), c.grid(), "VectorField");
        if (static_cast<int>(components_.size()) != components_[0].grid().n())
            throw GeometryError("vector field needs n components");
    }

    const Grid& grid() const { return components_.at(0).grid(); }
    int n() const { return static_cast<int>(components_.size()); }
    const ScalarField& operator[](int i) const { return components_[i]; }
    ScalarField& operator[](int i) { return components_[i]; }
    const std::vector<ScalarField>& components() const { return components_; }

    VectorField& operator+=(const VectorField& o) {
        for (int i = 0; i < n(); ++i) components_[i] += o.components_[i];
        return *this;
    }
    VectorField& operator-=(const VectorField& o) {
        for (int i = 0; i < n(); ++i) components_[i] -= o.components_[i];
        return *this;
    }
    VectorField& operator*=(double c) {
        for (auto& comp : components_) comp *= c;
        return *this;
    }
    VectorField& axpy(double c, const VectorField& o) {
        for (int i = 0; i < n(); ++i) components_[i].axpy(c, o.components_[i]);
        return *this;
    }

private:
    std::vector<ScalarField> components_;
};

inline VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
inline VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
inline VectorField operator*(double c, VectorField a) { return a *= c; }

inline double inner_product(const VectorField& a, const VectorField& b) {
    double s = 0.0;
    for (int i = 0; i < a.n(); ++i) s += inner_product(a[i], b[i]);
    return s;
}

inline double l2_norm(const VectorField& a) { return std::sqrt(inner_product(a, a)); }

inline double relative_l2(const VectorField& approx, const VectorField& truth) {
    const double d = l2_norm(approx - truth);
    const double t = l2_norm(truth);
    return t > 0.0 ? d / t : d;
}

/// Boolean node set marking an open region, plus the erosion radius that
/// defines its stencil-safe interior.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(Grid grid, std::vector<std::uint8_t> inside, double erosion_radius = 0.0)
        : grid_(std::move(grid)), inside_(std::move(inside)), erosion_radius_(erosion_radius) {
        if (inside_.size() != grid_.node_count()) throw GeometryError("mask size does not match grid");
    }

    static RegionMask all(const Grid& grid) { return RegionMask(grid, std::vector<std::uint8_t>(grid.node_count(), 1)); }
    static RegionMask none(const Grid& grid) { return RegionMask(grid, std::vector<std::uint8_t>(grid.node_count(), 0)); }

    /// Open ball |x - c| < radius.
    static RegionMask ball(const Grid& grid, const Point& center, double radius, double erosion_radius = 0.0) {
        std::vector<std::uint8_t> in(grid.node_count(), 0);
        for (std::size_t k = 0; k < in.size(); ++k) {
            Point p = grid.position(k);
            double d2 = 0.0;
            for (int a = 0; a < grid.n(); ++a) d2 += (p[a] - center[a]) * (p[a] - center[a]);
            in[k] = d2 < radius * radius ? 1 : 0;
        }
        RegionMask m(grid, std::move(in), erosion_radius);
        m.is_ball_ = true;
        m.center_ = center;
        m.radius_ = radius;
        return m;
    }

    const Grid& grid() const { return grid_; }
    std::span<const std::uint8_t> inside() const { return inside_; }
    bool contains(std::size_t k) const { return inside_[k] != 0; }
    double erosion_radius() const { return erosion_radius_; }

    RegionMask with_erosion(double r) const {
        RegionMask m = *this;
        m.erosion_radius_ = r;
        return m;
    }

    std::size_t count() const { return static_cast<std::size_t>(std::count(inside_.begin(), inside_.end(), 1)); }
    bool empty() const { return count() == 0; }
    bool is_full() const { return count() == inside_.size(); }

    /// Closed-form description, when the mask came from ball().
    bool is_ball() const { return is_ball_; }
    const Point& center() const { return center_; }
    double radius() const { return radius_; }

    RegionMask complement() const {
        std::vector<std::uint8_t> in(inside_.size());
        for (std::size_t k = 0; k < in.size(); ++k) in[k] = inside_[k] ? 0 : 1;
        return RegionMask(grid_, std::move(in), erosion_radius_);
    }

    RegionMask intersect(const RegionMask& o) const {
        require_same_grid(grid_, o.grid_, "mask intersect");
        std::vector<std::uint8_t> in(inside_.size());
        for (std::size_t k = 0; k < in.size(); ++k) in[k] = (inside_[k] && o.inside_[k]) ? 1 : 0;
        return RegionMask(grid_, std::move(in), erosion_radius_);
    }

    bool subset_of(const RegionMask& o) const {
        for (std::size_t k = 0; k < inside_.size(); ++k)
            if (inside_[k] && !o.inside_[k]) return false;
        return true;
    }

    /// Nodes of the mask whose closed erosion_radius neighbourhood (restricted
    /// to the grid) lies inside the mask.
    RegionMask interior() const {
        const int n = grid_.n();
        const double h = grid_.h();
        const int r = static_cast<int>(std::floor(erosion_radius_ / h + 1e-9));
        std::vector<Index> offsets;
        Index lo{0, 0, 0}, hi{0, 0, 0};
        for (int a = 0; a < n; ++a) {
            lo[a] = -r;
            hi[a] = r;
        }
        for (int i = lo[0]; i <= hi[0]; ++i)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int l = lo[2]; l <= hi[2]; ++l) {
                    const double d = std::sqrt(double(i * i + j * j + l * l)) * h;
                    if (d <= erosion_radius_ + 1e-12 && (i || j || l)) offsets.push_back({i, j, l});
                }
        std::vector<std::uint8_t> out(inside_.size(), 0);
        for (std::size_t k = 0; k < inside_.size(); ++k) {
            if (!inside_[k]) continue;
            const Index idx = grid_.unflat(k);
            bool ok = true;
            for (const Index& o : offsets) {
                Index q{idx[0] + o[0], idx[1] + o[1], idx[2] + o[2]};
                if (!grid_.contains(q)) continue;
                if (!inside_[grid_.flat(q)]) {
                    ok = false;
                    break;
                }
            }
            out[k] = ok ? 1 : 0;
        }
        return RegionMask(grid_, std::move(out), 0.0);
    }

    /// Zero the field outside the mask.
    ScalarField apply(ScalarField f) const {
        require_same_grid(grid_, f.grid(), "mask apply");
        for (std::size_t k = 0; k < inside_.size(); ++k)
            if (!inside_[k]) f[k] = 0.0;
        return f;
    }

private:
    Grid grid_;
    std::vector<std::uint8_t> inside_;
    double erosion_radius_ = 0.0;
    bool is_ball_ = false;
    Point center_{0.0, 0.0, 0.0};
    double radius_ = 0.0;
};

/// Node offset of `inner` inside `outer` when both share spacing and origin.
inline Index nested_offset(const Grid& outer, const Grid& inner) {
    if (outer.n() != inner.n() || std::abs(outer.h() - inner.h()) > 1e-12 * inner.h())
        throw GeometryError("nested grids must share dimension and spacing");
    Index off{0, 0, 0};
    for (int a = 0; a < inner.n(); ++a) {
        const double d = (outer.extent(a) - inner.extent(a)) / inner.h();
        off[a] = static_cast<int>(std::lround(d));
        if (std::abs(d - off[a]) > 1e-9 || off[a] < 0 || off[a] + inner.size(a) > outer.size(a))
            throw GeometryError("grid is not nested node-for-node");
    }
    return off;
}

/// Restriction of a field to a nested sub-grid.
inline ScalarField crop(const ScalarField& f, const Grid& inner) {
    const Index off = nested_offset(f.grid(), inner);
    ScalarField out(inner);
    for (std::size_t k = 0; k < out.size(); ++k) {
        Index i = inner.unflat(k);
        for (int a = 0; a < inner.n(); ++a) i[a] += off[a];
        out[k] = f[f.grid().flat(i)];
    }
    return out;
}

/// Zero extension of a field to an enclosing grid.
inline ScalarField embed(const ScalarField& f, const Grid& outer) {
    const Index off = nested_offset(outer, f.grid());
    ScalarField out(outer);
    for (std::size_t k = 0; k < f.size(); ++k) {
        Index i = f.grid().unflat(k);
        for (int a = 0; a < outer.n(); ++a) i[a] += off[a];
        out[outer.flat(i)] = f[k];
    }
    return out;
}

}  // namespace roitomo
