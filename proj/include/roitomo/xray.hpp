#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <span>
#include <vector>

#include "roitomo/grid.hpp"
#include "roitomo/lines.hpp"
#include "roitomo/parallel.hpp"
#include "roitomo/spectral.hpp"

namespace roitomo {

/// One value per line of a LineSet.
struct Sinogram {
    LineSet lines;
    std::vector<double> values;

    Sinogram() = default;
    explicit Sinogram(LineSet ls) : lines(std::move(ls)), values(lines.size(), 0.0) {}
    Sinogram(LineSet ls, std::vector<double> v) : lines(std::move(ls)), values(std::move(v)) {
        if (values.size() != lines.size()) throw GeometryError("sinogram value count does not match line count");
    }

    Sinogram& axpy(double c, const Sinogram& o) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += c * o.values[i];
        return *this;
    }
};

/// <a, b>_Gamma with the angle x offset quadrature weight of the lattice.
inline double inner_product(const Sinogram& a, const Sinogram& b) {
    if (a.values.size() != b.values.size()) throw GeometryError("sinogram pairing: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return a.lines.empty() ? 0.0 : a.lines.weight() * s;
}

inline double l2_norm(const Sinogram& a) { return std::sqrt(inner_product(a, a)); }

namespace detail {

/// Visits every (node, weight) pair of the discrete line integral: samples
/// s_k = k h/2 with |s_k| <= grid ball radius, multilinear interpolation,
/// weight (h/2) * interpolation weight. Nodes outside the grid are skipped.
template <class Visit>
void trace_line(const Line& l, const Grid& g, Visit&& visit) {
    const int n = g.n();
    const double h = g.h();
    const double step = 0.5 * h;
    const double rb = g.ball_radius();
    // Parameter range where the sample can touch a node: box grown by one cell.
    double smin = -rb, smax = rb;
    for (int a = 0; a < n; ++a) {
        const double lo = -g.extent(a) - h;
        const double hi = g.coord(a, g.size(a) - 1) + h;
        const double t = l.theta[a];
        if (std::abs(t) < 1e-15) {
            if (l.z[a] <= lo || l.z[a] >= hi) return;
            continue;
        }
        double s0 = (lo - l.z[a]) / t, s1 = (hi - l.z[a]) / t;
        if (s0 > s1) std::swap(s0, s1);
        smin = std::max(smin, s0);
        smax = std::min(smax, s1);
    }
    if (smin > smax) return;
    const int K = static_cast<int>(std::floor(rb / step + 1e-9));
    const int k0 = std::max(-K, static_cast<int>(std::ceil(smin / step)));
    const int k1 = std::min(K, static_cast<int>(std::floor(smax / step)));
    for (int k = k0; k <= k1; ++k) {
        const double s = k * step;
        int base[kMaxDim] = {0, 0, 0};
        double frac[kMaxDim] = {0.0, 0.0, 0.0};
        for (int a = 0; a < n; ++a) {
            const double u = (l.z[a] + s * l.theta[a] + g.extent(a)) / h;
            const double fl = std::floor(u);
            base[a] = static_cast<int>(fl);
            frac[a] = u - fl;
        }
        for (int corner = 0; corner < (1 << n); ++corner) {
            double w = step;
            std::size_t flat = 0;
            bool ok = true;
            for (int a = 0; a < n; ++a) {
                const int bit = (corner >> a) & 1;
                const int i = base[a] + bit;
                if (i < 0 || i >= g.size(a)) {
                    ok = false;
                    break;
                }
                w *= bit ? frac[a] : 1.0 - frac[a];
                flat = flat * g.size(a) + i;
            }
            if (ok && w != 0.0) visit(flat, w);
        }
    }
}

inline constexpr int kScatterBlocks = 16;

/// Runs a deterministic blocked scatter: each block of lines accumulates into
/// its own buffer and buffers are summed in block order, so the rounding does
/// not depend on the thread count.
template <class Body>
std::vector<double> blocked_scatter(std::size_t n_lines, std::size_t n_nodes, Body&& body) {
    const int blocks = static_cast<int>(std::min<std::size_t>(kScatterBlocks, std::max<std::size_t>(1, n_lines)));
    std::vector<std::vector<double>> bufs(blocks);
    parallel_for(blocks, [&](std::size_t b) {
        bufs[b].assign(n_nodes, 0.0);
        const std::size_t lo = n_lines * b / blocks, hi = n_lines * (b + 1) / blocks;
        for (std::size_t i = lo; i < hi; ++i) body(i, bufs[b]);
    });
    std::vector<double> out = std::move(bufs[0]);
    for (int b = 1; b < blocks; ++b)
        for (std::size_t k = 0; k < n_nodes; ++k) out[k] += bufs[b][k];
    return out;
}

}  // namespace detail

/// Discrete X-ray transform: composite quadrature with step h/2 along each line.
inline Sinogram xray_forward(const ScalarField& f, const LineSet& ls) {
    if (ls.n() != f.grid().n()) throw GeometryError("xray_forward: line set / grid dimension mismatch");
    Sinogram out(ls);
    const Grid& g = f.grid();
    auto fv = f.values();
    parallel_for(ls.size(), [&](std::size_t i) {
        double s = 0.0;
        detail::trace_line(ls[i], g, [&](std::size_t k, double w) { s += w * fv[k]; });
        out.values[i] = s;
    });
    return out;
}

/// Exact transpose of xray_forward on `grid` under the weighted pairings:
/// <X f, g>_Gamma = <f, X* g>. Lines carrying exact zeros are skipped.
inline ScalarField xray_backproject(const Sinogram& sino, const Grid& grid) {
    const LineSet& ls = sino.lines;
    if (ls.n() != grid.n()) throw GeometryError("xray_backproject: line set / grid dimension mismatch");
    if (sino.values.size() != ls.size()) throw GeometryError("xray_backproject: value count mismatch");
    const double scale = ls.empty() ? 0.0 : ls.weight() / grid.cell_volume();
    auto acc = detail::blocked_scatter(ls.size(), grid.node_count(), [&](std::size_t i, std::vector<double>& buf) {
        const double v = sino.values[i];
        if (v == 0.0) return;
        const double c = scale * v;
        detail::trace_line(ls[i], grid, [&](std::size_t k, double w) { buf[k] += c * w; });
    });
    return ScalarField(grid, std::move(acc));
}

namespace detail {

/// Sinogram values on the dense (angle, offset lattice) table; lines absent
/// from a filtered set read as zero.
inline std::vector<double> lattice_table(const Sinogram& g) {
    const LineSet& ls = g.lines;
    const std::size_t per_angle = static_cast<std::size_t>(std::pow(ls.n_offsets(), ls.n() - 1));
    std::vector<double> t(static_cast<std::size_t>(ls.n_angles()) * per_angle, 0.0);
    for (std::size_t i = 0; i < ls.size(); ++i)
        t[static_cast<std::size_t>(ls[i].angle_index) * per_angle + ls[i].offset_index] = g.values[i];
    return t;
}

/// Linear interpolation of one angle's offset table at theta-perp coordinates.
inline double interp_offsets(const LineSet& ls, const double* row, double t0, double t1) {
    const int m = ls.n_offsets();
    const double dz = ls.offset_spacing();
    auto locate = [&](double t, int& j, double& w) {
        const double u = (t + ls.offset_span()) / dz - 0.5;
        j = static_cast<int>(std::floor(u));
        w = u - j;
    };
    int j0;
    double w0;
    locate(t0, j0, w0);
    auto at = [&](int j) { return j >= 0 && j < m; };
    if (ls.n() == 2) {
        double v = 0.0;
        if (at(j0)) v += (1.0 - w0) * row[j0];
        if (at(j0 + 1)) v += w0 * row[j0 + 1];
        return v;
    }
    int j1;
    double w1;
    locate(t1, j1, w1);
    double v = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const int ja = j0 + a, jb = j1 + b;
            if (at(ja) && at(jb)) v += (a ? w0 : 1.0 - w0) * (b ? w1 : 1.0 - w1) * row[ja * m + jb];
        }
    return v;
}

}  // namespace detail

/// Pixel-driven quadrature of the continuum back-projection: for every node
/// and direction, the sinogram is interpolated linearly in the offset. It is
/// smooth in x where the matched transpose carries a lattice moire, which is
/// what (-Delta)^{1/2} needs; it is not the transpose of xray_forward.
inline ScalarField xray_backproject_interp(const Sinogram& g, const Grid& grid) {
    const LineSet& ls = g.lines;
    if (ls.n() != grid.n()) throw GeometryError("xray_backproject_interp: dimension mismatch");
    ScalarField out(grid);
    if (ls.empty()) return out;
    const auto table = detail::lattice_table(g);
    const std::size_t per_angle = table.size() / ls.n_angles();
    const int n = grid.n();
    const double w = ls.angle_weight();
    parallel_for(grid.node_count(), [&](std::size_t k) {
        const Point x = grid.position(k);
        double s = 0.0;
        for (int a = 0; a < ls.n_angles(); ++a) {
            const auto& [u, v] = ls.perp_basis(a);
            s += detail::interp_offsets(ls, table.data() + a * per_angle, dot(x, u, n), n == 3 ? dot(x, v, n) : 0.0);
        }
        out[k] = w * s;
    });
    return out;
}

/// Vector counterpart: component i carries theta_i.
inline VectorField xray_vector_backproject_interp(const Sinogram& g, const Grid& grid) {
    const LineSet& ls = g.lines;
    if (ls.n() != grid.n()) throw GeometryError("xray_vector_backproject_interp: dimension mismatch");
    VectorField out(grid);
    if (ls.empty()) return out;
    const auto table = detail::lattice_table(g);
    const std::size_t per_angle = table.size() / ls.n_angles();
    const int n = grid.n();
    const double w = ls.angle_weight();
    parallel_for(grid.node_count(), [&](std::size_t k) {
        const Point x = grid.position(k);
        Point s{0.0, 0.0, 0.0};
        for (int a = 0; a < ls.n_angles(); ++a) {
            const auto& [u, v] = ls.perp_basis(a);
            const double val =
                detail::interp_offsets(ls, table.data() + a * per_angle, dot(x, u, n), n == 3 ? dot(x, v, n) : 0.0);
            const Point& th = ls.direction(a);
            for (int c = 0; c < n; ++c) s[c] += val * th[c];
        }
        for (int c = 0; c < n; ++c) out[c][k] = w * s[c];
    });
    return out;
}

/// Composition route N0 = X0* X0 (matched, used by the solvers).
inline ScalarField normal_scalar(const ScalarField& f, const LineSet& ls) {
    return xray_backproject(xray_forward(f, ls), f.grid());
}

/// Average of |x|^{1-n} over the central cell [-h/2, h/2]^n.
inline double central_cell_average_radial(int n, double h) {
    if (n == 2) return 4.0 * std::log(1.0 + std::sqrt(2.0)) / h;
    if (n == 3) {
        // int_{[0,1]^2} dp dq / (1 + p^2 + q^2) = int_0^1 atan(1/sqrt(1+p^2)) / sqrt(1+p^2) dp,
        // by composite Simpson on a smooth integrand.
        const int m = 2000;
        double s = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double p = static_cast<double>(i) / m;
            const double r = std::sqrt(1.0 + p * p);
            const double v = std::atan(1.0 / r) / r;
            s += (i == 0 || i == m ? 1.0 : (i % 2 ? 4.0 : 2.0)) * v;
        }
        const double J = s / (3.0 * m);
        return 12.0 * J / (h * h);
    }
    throw DomainError("radial cell average defined for n = 2, 3");
}

/// Kernel 2|x|^{1-n} with the central value replaced by its cell average.
inline double normal_kernel_scalar(const Point& x, int n, double h) {
    const double r = norm(x, n);
    if (r < 0.5 * h) return 2.0 * central_cell_average_radial(n, h);
    return 2.0 * std::pow(r, 1.0 - n);
}

/// Spectrum of the sampled scalar normal-operator kernel on the padded box.
inline Spectrum normal_kernel_spectrum(const Grid& g) {
    if (g.n() < 2) throw DomainError("normal operator needs n >= 2");
    return kernel_spectrum(g, [&](const Point& x) { return Complex(normal_kernel_scalar(x, g.n(), g.h()), 0.0); });
}

/// Convolution route N0 f = 2 (f * |x|^{1-n}) on the padded grid.
inline ScalarField normal_scalar_conv(const ScalarField& f) {
    if (f.grid().n() < 2) throw DomainError("normal_scalar_conv: n = 1 is not supported");
    Spectrum s = spectral_forward(f);
    const Spectrum k = normal_kernel_spectrum(f.grid());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= k[i];
    return spectral_inverse(std::move(s)).field;
}

// ---------------------------------------------------------------------------
// Vector fields

/// X1 F(z, theta) = int F(z + s theta) . theta ds.
inline Sinogram xray_vector_forward(const VectorField& F, const LineSet& ls) {
    const Grid& g = F.grid();
    if (ls.n() != g.n()) throw GeometryError("xray_vector_forward: dimension mismatch");
    Sinogram out(ls);
    const int n = g.n();
    parallel_for(ls.size(), [&](std::size_t i) {
        const Line& l = ls[i];
        double s = 0.0;
        detail::trace_line(l, g, [&](std::size_t k, double w) {
            double v = 0.0;
            for (int c = 0; c < n; ++c) v += l.theta[c] * F[c][k];
            s += w * v;
        });
        out.values[i] = s;
    });
    return out;
}

/// Matched transpose of xray_vector_forward; component i carries theta_i.
inline VectorField xray_vector_backproject(const Sinogram& sino, const Grid& grid) {
    const LineSet& ls = sino.lines;
    if (ls.n() != grid.n()) throw GeometryError("xray_vector_backproject: dimension mismatch");
    if (sino.values.size() != ls.size()) throw GeometryError("xray_vector_backproject: value count mismatch");
    const int n = grid.n();
    const double scale = ls.empty() ? 0.0 : ls.weight() / grid.cell_volume();
    const std::size_t N = grid.node_count();
    // Components interleaved in one buffer: index k * n + c.
    auto acc = detail::blocked_scatter(ls.size(), N * n, [&](std::size_t i, std::vector<double>& buf) {
        const double v = sino.values[i];
        if (v == 0.0) return;
        const Line& l = ls[i];
        const double c0 = scale * v;
        detail::trace_line(l, grid, [&](std::size_t k, double w) {
            for (int c = 0; c < n; ++c) buf[k * n + c] += c0 * w * l.theta[c];
        });
    });
    VectorField out(grid);
    for (std::size_t k = 0; k < N; ++k)
        for (int c = 0; c < n; ++c) out[c][k] = acc[k * n + c];
    return out;
}

/// Composition route N1 = X1* X1.
inline VectorField normal_vector(const VectorField& F, const LineSet& ls) {
    return xray_vector_backproject(xray_vector_forward(F, ls), F.grid());
}

/// Convolution route (N1 F)_i = sum_j 2 x_i x_j / |x|^{n+1} * F_j. The central
/// cell takes the cell average: zero off the diagonal, 1/n of the scalar
/// kernel's average on it.
inline VectorField normal_vector_conv(const VectorField& F) {
    const Grid& g = F.grid();
    const int n = g.n();
    if (n < 2) throw DomainError("normal_vector_conv: n = 1 is not supported");
    const double h = g.h();
    std::vector<Spectrum> fs;
    for (int j = 0; j < n; ++j) fs.push_back(spectral_forward(F[j]));
    VectorField out(g);
    for (int i = 0; i < n; ++i) {
        Spectrum acc = Spectrum::zeros(g);
        for (int j = 0; j < n; ++j) {
            const Spectrum k = kernel_spectrum(g, [&](const Point& x) {
                const double r = norm(x, n);
                if (r < 0.5 * h) return Complex(i == j ? 2.0 * central_cell_average_radial(n, h) / n : 0.0, 0.0);
                return Complex(2.0 * x[i] * x[j] / std::pow(r, n + 1), 0.0);
            });
            for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += k[b] * fs[j][b];
        }
        out[i] = spectral_inverse(std::move(acc)).field;
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Sparse form of the discrete X-ray transform for a fixed (line set, grid):
/// row i holds the merged (node, weight) pairs of line i. Used by the
/// iterative solvers, where the same operator is applied thousands of times.
class ProjectionMatrix {
public:
    ProjectionMatrix(const LineSet& ls, const Grid& g) : lines_(ls), grid_(g) {
        if (ls.n() != g.n()) throw GeometryError("projection matrix: dimension mismatch");
        row_ptr_.assign(ls.size() + 1, 0);
        std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(ls.size());
        parallel_for(ls.size(), [&](std::size_t i) {
            auto& r = rows[i];
            detail::trace_line(ls[i], g, [&](std::size_t k, double w) { r.emplace_back(static_cast<std::uint32_t>(k), w); });
            std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            std::size_t out = 0;
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (out > 0 && r[out - 1].first == r[j].first)
                    r[out - 1].second += r[j].second;
                else
                    r[out++] = r[j];
            }
            r.resize(out);
        });
        for (std::size_t i = 0; i < rows.size(); ++i) row_ptr_[i + 1] = row_ptr_[i] + rows[i].size();
        cols_.resize(row_ptr_.back());
        vals_.resize(row_ptr_.back());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::size_t p = row_ptr_[i];
            for (const auto& [c, w] : rows[i]) {
                cols_[p] = c;
                vals_[p] = w;
                ++p;
            }
        }
    }

    const LineSet& lines() const { return lines_; }
    const Grid& grid() const { return grid_; }
    std::size_t nonzeros() const { return vals_.size(); }

    void forward(std::span<const double> f, std::span<double> out) const {
        parallel_for(lines_.size(), [&](std::size_t i) {
            double s = 0.0;
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) s += vals_[p] * f[cols_[p]];
            out[i] = s;
        });
    }

    /// out += A^T (weight / h^n) g : the matched back-projection.
    void backproject_add(std::span<const double> g, std::span<double> out) const {
        const double scale = lines_.empty() ? 0.0 : lines_.weight() / grid_.cell_volume();
        auto acc = detail::blocked_scatter(lines_.size(), grid_.node_count(), [&](std::size_t i, std::vector<double>& buf) {
            const double c = scale * g[i];
            if (c == 0.0) return;
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) buf[cols_[p]] += c * vals_[p];
        });
        for (std::size_t k = 0; k < acc.size(); ++k) out[k] += acc[k];
    }

    /// Vector variant on component-major storage F[c * nodes + k]:
    /// out_i = sum_k A_ik theta_i . F(k).
    void forward_vector(std::span<const double> F, std::span<double> out) const {
        const int n = grid_.n();
        const std::size_t N = grid_.node_count();
        parallel_for(lines_.size(), [&](std::size_t i) {
            const Point& th = lines_[i].theta;
            double s = 0.0;
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                double v = 0.0;
                for (int c = 0; c < n; ++c) v += th[c] * F[c * N + cols_[p]];
                s += vals_[p] * v;
            }
            out[i] = s;
        });
    }

    /// out_c += A^T (weight / h^n) (theta_c g), component-major.
    void backproject_vector_add(std::span<const double> g, std::span<double> out) const {
        const int n = grid_.n();
        const std::size_t N = grid_.node_count();
        const double scale = lines_.empty() ? 0.0 : lines_.weight() / grid_.cell_volume();
        for (int c = 0; c < n; ++c) {
            auto comp = detail::blocked_scatter(lines_.size(), N, [&](std::size_t i, std::vector<double>& buf) {
                const double c0 = scale * g[i] * lines_[i].theta[c];
                if (c0 == 0.0) return;
                for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) buf[cols_[p]] += c0 * vals_[p];
            });
            for (std::size_t k = 0; k < N; ++k) out[c * N + k] += comp[k];
        }
    }

    /// out_k += scale * sum_i A_ik^2 (scalar) or scale * sum_i A_ik^2 theta_ic^2
    /// into component c (vector, out sized n * nodes, component-major).
    void accumulate_column_squares(std::span<double> out, double scale, bool vector = false) const {
        const std::size_t N = grid_.node_count();
        const int n = grid_.n();
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            const Point& th = lines_[i].theta;
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                const double a2 = scale * vals_[p] * vals_[p];
                if (!vector) {
                    out[cols_[p]] += a2;
                } else {
                    for (int c = 0; c < n; ++c) out[c * N + cols_[p]] += a2 * th[c] * th[c];
                }
            }
        }
    }

private:
    LineSet lines_;
    Grid grid_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> cols_;
    std::vector<double> vals_;
};

}  // namespace roitomo
