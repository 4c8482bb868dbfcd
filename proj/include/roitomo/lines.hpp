#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "roitomo/grid.hpp"

namespace roitomo {

/// Oriented line z + s*theta with |theta| = 1 and z orthogonal to theta.
struct Line {
    Point theta{1.0, 0.0, 0.0};
    Point z{0.0, 0.0, 0.0};
    int angle_index = 0;
    int offset_index = 0;  ///< flattened (j * n_offsets + l) for n = 3
};

/// Sampled line manifold: directions on a half sphere (orientation quotiented
/// out) times a uniform offset lattice over [-R, R]^(n-1), R = sqrt(n)*extent.
class LineSet {
public:
    LineSet() = default;

    int n() const { return data_->n; }
    int n_angles() const { return static_cast<int>(data_->directions.size()); }
    int n_offsets() const { return data_->n_offsets; }
    double offset_span() const { return data_->span; }
    double offset_spacing() const { return 2.0 * data_->span / data_->n_offsets; }
    std::size_t size() const { return lines_->size(); }
    bool empty() const { return lines_->empty(); }
    const Line& operator[](std::size_t i) const { return (*lines_)[i]; }
    const std::vector<Line>& lines() const { return *lines_; }
    const Point& direction(int angle_index) const { return data_->directions[angle_index]; }
    /// Orthonormal basis of theta-perp for an angle (one vector when n = 2).
    const std::array<Point, 2>& perp_basis(int angle_index) const { return data_->perp[angle_index]; }
    double offset_value(int j) const { return -data_->span + (j + 0.5) * offset_spacing(); }

    /// Quadrature weight of each line: solid-angle weight times offset cell.
    /// The half-sphere sample stands for both orientations.
    double weight() const { return data_->angle_weight * std::pow(offset_spacing(), data_->n - 1); }
    double angle_weight() const { return data_->angle_weight; }

    /// True when some lines of the parent lattice were dropped.
    bool is_filtered() const { return lines_->size() != full_count(); }
    std::size_t full_count() const {
        return data_->directions.size() * static_cast<std::size_t>(std::pow(data_->n_offsets, data_->n - 1));
    }

    /// Same lattice, a chosen subset of lines (order as given).
    LineSet subset(std::vector<Line> keep) const {
        LineSet out;
        out.data_ = data_;
        out.lines_ = std::make_shared<const std::vector<Line>>(std::move(keep));
        return out;
    }

    bool same_lattice(const LineSet& o) const { return data_ == o.data_; }

    friend LineSet make_lineset(const Grid& grid, int n_angles, int n_offsets);

private:
    struct Data {
        int n = 2;
        int n_offsets = 1;
        double span = 1.0;
        double angle_weight = 0.0;
        std::vector<Point> directions;
        std::vector<std::array<Point, 2>> perp;
    };
    std::shared_ptr<const Data> data_;
    std::shared_ptr<const std::vector<Line>> lines_;
};

inline LineSet make_lineset(const Grid& grid, int n_angles, int n_offsets) {
    if (n_angles < 1 || n_offsets < 1) throw GeometryError("line set needs at least one angle and one offset");
    const int n = grid.n();
    if (n != 2 && n != 3) throw GeometryError("line sets are defined for n = 2 and n = 3");
    LineSet ls;
    auto data = std::make_shared<LineSet::Data>();
    data->n = n;
    data->n_offsets = n_offsets;
    data->span = std::sqrt(static_cast<double>(n)) * grid.max_extent();
    const double pi = std::numbers::pi;
    if (n == 2) {
        data->angle_weight = 2.0 * pi / n_angles;
        for (int a = 0; a < n_angles; ++a) {
            const double phi = a * pi / n_angles;
            Point th{std::cos(phi), std::sin(phi), 0.0};
            data->directions.push_back(th);
            data->perp.push_back({Point{-th[1], th[0], 0.0}, Point{0.0, 0.0, 0.0}});
        }
    } else {
        data->angle_weight = 4.0 * pi / n_angles;
        const double golden = pi * (3.0 - std::sqrt(5.0));
        for (int a = 0; a < n_angles; ++a) {
            const double zc = 1.0 - (a + 0.5) / n_angles;  // upper hemisphere, equal-area
            const double rho = std::sqrt(std::max(0.0, 1.0 - zc * zc));
            const double phi = a * golden;
            Point th{rho * std::cos(phi), rho * std::sin(phi), zc};
            // Gram-Schmidt against the axis least aligned with theta.
            Point ref = std::abs(th[0]) < 0.9 ? Point{1.0, 0.0, 0.0} : Point{0.0, 1.0, 0.0};
            const double c = dot(ref, th, 3);
            Point u{ref[0] - c * th[0], ref[1] - c * th[1], ref[2] - c * th[2]};
            const double un = norm(u, 3);
            for (double& x : u) x /= un;
            Point v{th[1] * u[2] - th[2] * u[1], th[2] * u[0] - th[0] * u[2], th[0] * u[1] - th[1] * u[0]};
            data->directions.push_back(th);
            data->perp.push_back({u, v});
        }
    }
    ls.data_ = data;

    auto lines = std::make_shared<std::vector<Line>>();
    const double dz = 2.0 * data->span / n_offsets;
    auto off = [&](int j) { return -data->span + (j + 0.5) * dz; };
    for (int a = 0; a < n_angles; ++a) {
        const auto& [u, v] = data->perp[a];
        if (n == 2) {
            for (int j = 0; j < n_offsets; ++j) {
                Line l{data->directions[a], {off(j) * u[0], off(j) * u[1], 0.0}, a, j};
                lines->push_back(l);
            }
        } else {
            for (int j = 0; j < n_offsets; ++j)
                for (int m = 0; m < n_offsets; ++m) {
                    Line l{data->directions[a], {}, a, j * n_offsets + m};
                    for (int i = 0; i < 3; ++i) l.z[i] = off(j) * u[i] + off(m) * v[i];
                    lines->push_back(l);
                }
        }
    }
    ls.lines_ = std::move(lines);
    return ls;
}

/// Closed form for a ball: perpendicular distance from the centre below the
/// radius. Tangent lines do not meet the (open) ball.
inline bool line_meets_ball(const Line& line, const Point& center, double radius, int n) {
    Point w{0.0, 0.0, 0.0};
    for (int i = 0; i < n; ++i) w[i] = center[i] - line.z[i];
    const double along = dot(w, line.theta, n);
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double c = w[i] - along * line.theta[i];
        d2 += c * c;
    }
    return d2 < radius * radius;
}

/// Sampled test: walk the line with step h/2 and look at the nearest node.
inline bool line_meets_region(const Line& line, const RegionMask& mask) {
    const Grid& g = mask.grid();
    const int n = g.n();
    const double h = g.h();
    const double reach = g.ball_radius() + h;
    const int K = static_cast<int>(std::ceil(reach / (0.5 * h)));
    for (int k = -K; k <= K; ++k) {
        const double s = 0.5 * h * k;
        Index idx{0, 0, 0};
        bool in = true;
        for (int a = 0; a < n; ++a) {
            const double p = line.z[a] + s * line.theta[a];
            idx[a] = static_cast<int>(std::lround((p + g.extent(a)) / h));
            if (idx[a] < 0 || idx[a] >= g.size(a)) {
                in = false;
                break;
            }
        }
        if (in && mask.contains(g.flat(idx))) return true;
    }
    return false;
}

/// Lines of ls that meet the mask, in their original order. Ball masks use the
/// closed-form test; a full mask keeps every line.
inline LineSet filter_roi(const LineSet& ls, const RegionMask& mask) {
    if (mask.grid().n() != ls.n()) throw GeometryError("filter_roi: dimension mismatch");
    if (mask.is_full()) return ls;
    std::vector<Line> keep;
    if (!mask.empty()) {
        for (const Line& l : ls.lines()) {
            const bool hit = mask.is_ball() ? line_meets_ball(l, mask.center(), mask.radius(), ls.n())
                                            : line_meets_region(l, mask);
            if (hit) keep.push_back(l);
        }
    }
    return ls.subset(std::move(keep));
}

}  // namespace roitomo
