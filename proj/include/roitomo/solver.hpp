#pragma once

#include <algorithm>
#include <chrono>
#include <iterator>
#include <map>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "roitomo/grid.hpp"
#include "roitomo/lines.hpp"
#include "roitomo/pdo.hpp"
#include "roitomo/polyop.hpp"
#include "roitomo/spectral.hpp"
#include "roitomo/vector_ops.hpp"
#include "roitomo/xray.hpp"

namespace roitomo {

/// `jacobi` rescales the unknowns by the diagonal of the data and Tikhonov
/// part of the normal operator.
enum class Preconditioner { none, jacobi };

struct SolverControls {
    double cg_tol = 1e-8;  ///< on the relative residual of the (scaled, prior-reduced) normal equations
    int max_iter = 2000;
    int restart_every = 200;  ///< the residual is recomputed from scratch this often
    Preconditioner preconditioner = Preconditioner::jacobi;
    /// Unknowns outside the ball of this radius about the origin are held at
    /// zero; 0 means the grid's support ball.
    double support_radius = 0.0;
};

struct PartialDataProblem {
    RegionMask roi;
    RegionMask v;
    Sinogram data;  ///< on filter_roi(full line set, roi)
    std::optional<PolyOp> prior;
    double lambda_prior = 1.0;
    double lambda_tikhonov = 1e-6;
    SolverControls controls{};
};

struct SolveReport {
    int iterations = 0;
    int restarts = 0;
    bool converged = false;
    std::string status = "ok";
    double data_residual = 0.0;   ///< ||X f - data||_Gamma
    double prior_residual = 0.0;  ///< ||P(D) f||_V (summed over components for vector problems)
    double objective = 0.0;
    double relative_residual = 0.0;
    std::optional<double> relative_error;
    double wall_time_s = 0.0;
    std::size_t line_count = 0;
    std::size_t unknowns = 0;
    std::vector<double> data_stream;   ///< entry 0 is the starting point
    std::vector<double> prior_stream;
    std::vector<double> restart_objectives;
};

/// A solve whose objective increased between restarts. Carries the report
/// and the best iterate.
class SolverFailure : public SolverError {
public:
    SolverFailure(const std::string& what, SolveReport report, std::vector<double> best)
        : SolverError(what), report_(std::move(report)), best_(std::move(best)) {}
    const SolveReport& report() const { return report_; }
    const std::vector<double>& best_iterate() const { return best_; }

private:
    SolveReport report_;
    std::vector<double> best_;
};

namespace detail {

/// One penalty term sum_c S_c x_c evaluated on `nodes`, for unknowns stored
/// component-major.
struct PriorTerm {
    std::vector<std::pair<int, CompiledStencil>> parts;
    std::vector<std::size_t> nodes;
    double lambda = 1.0;
};

inline std::vector<std::ptrdiff_t> stencil_deltas(const CompiledStencil& st) {
    std::vector<std::ptrdiff_t> out;
    const Grid& g = st.grid();
    for (const auto& t : st.taps()) {
        std::ptrdiff_t k = 0;
        for (int a = 0; a < g.n(); ++a) k = k * g.size(a) + t.offset[a];
        out.push_back(k);
    }
    return out;
}

/// Normal operator of
///   ||X x - d||_Gamma^2 + sum_t lambda_t ||L_t x||^2 + lambda_T ||x||^2
/// with X the matched projection matrix (scalar or vector) and every pairing
/// carrying its quadrature weight.
class NormalSystem {
public:
    NormalSystem(const Grid& g, bool vector, ProjectionMatrix A, std::vector<PriorTerm> priors, double lambda_t,
                 std::vector<std::uint8_t> active)
        : grid_(g),
          comps_(vector ? g.n() : 1),
          vector_(vector),
          A_(std::move(A)),
          priors_(std::move(priors)),
          lambda_t_(lambda_t),
          active_(std::move(active)) {
        for (const PriorTerm& t : priors_) {
            std::vector<std::vector<std::ptrdiff_t>> d;
            for (const auto& [c, st] : t.parts) d.push_back(stencil_deltas(st));
            deltas_.push_back(std::move(d));
        }
    }

    std::size_t size() const { return comps_ * grid_.node_count(); }
    std::size_t lines() const { return A_.lines().size(); }
    std::size_t unknowns() const {
        return comps_ * static_cast<std::size_t>(std::accumulate(active_.begin(), active_.end(), 0LL));
    }
    const std::vector<PriorTerm>& priors() const { return priors_; }

    void restrict(std::span<double> x) const {
        const std::size_t N = grid_.node_count();
        for (int c = 0; c < comps_; ++c)
            for (std::size_t k = 0; k < N; ++k)
                if (!active_[k]) x[c * N + k] = 0.0;
    }

    void project(std::span<const double> x, std::span<double> out) const {
        if (vector_)
            A_.forward_vector(x, out);
        else
            A_.forward(x, out);
    }

    void backproject_add(std::span<const double> g, std::span<double> out) const {
        if (vector_)
            A_.backproject_vector_add(g, out);
        else
            A_.backproject_add(g, out);
    }

    std::vector<Complex> prior_apply(std::size_t t, std::span<const double> x) const {
        const PriorTerm& term = priors_[t];
        const std::size_t N = grid_.node_count();
        std::vector<Complex> out(term.nodes.size(), Complex(0.0, 0.0));
        for (std::size_t p = 0; p < term.parts.size(); ++p) {
            const auto& [c, st] = term.parts[p];
            const auto& d = deltas_[t][p];
            const double* xc = x.data() + c * N;
            for (std::size_t i = 0; i < term.nodes.size(); ++i) {
                Complex s(0.0, 0.0);
                const auto base = static_cast<std::ptrdiff_t>(term.nodes[i]);
                for (std::size_t k = 0; k < d.size(); ++k) s += st.taps()[k].weight * xc[base + d[k]];
                out[i] += s;
            }
        }
        return out;
    }

    void prior_adjoint_add(std::size_t t, std::span<const Complex> r, double scale, std::span<double> out) const {
        const PriorTerm& term = priors_[t];
        const std::size_t N = grid_.node_count();
        for (std::size_t p = 0; p < term.parts.size(); ++p) {
            const auto& [c, st] = term.parts[p];
            const auto& d = deltas_[t][p];
            double* oc = out.data() + c * N;
            for (std::size_t i = 0; i < term.nodes.size(); ++i) {
                const auto base = static_cast<std::ptrdiff_t>(term.nodes[i]);
                for (std::size_t k = 0; k < d.size(); ++k)
                    oc[base + d[k]] += scale * (std::conj(st.taps()[k].weight) * r[i]).real();
            }
        }
    }

    /// Diagonal of the normal operator; with include_prior = false only the
    /// data and Tikhonov parts. Inactive unknowns get 1.
    std::vector<double> diagonal(bool include_prior = true) const {
        std::vector<double> d(size(), lambda_t_);
        const double scale = A_.lines().empty() ? 0.0 : A_.lines().weight() / grid_.cell_volume();
        A_.accumulate_column_squares(d, scale, vector_);
        const std::size_t N = grid_.node_count();
        if (include_prior)
            for (const Row& row : prior_rows())
                for (const auto& [k, w] : row) d[k] += w * w;
        for (int c = 0; c < comps_; ++c)
            for (std::size_t k = 0; k < N; ++k)
                if (!active_[k] || !(d[c * N + k] > 0.0)) d[c * N + k] = 1.0;
        return d;
    }

    /// Real rows R with R^T R = sum_t lambda_t Re(L_t^H L_t): the real and
    /// imaginary parts of every prior evaluation, scaled by sqrt(lambda).
    using Row = std::vector<std::pair<std::size_t, double>>;
    std::vector<Row> prior_rows() const {
        std::vector<Row> rows;
        const std::size_t N = grid_.node_count();
        for (std::size_t t = 0; t < priors_.size(); ++t) {
            const PriorTerm& term = priors_[t];
            const double c = std::sqrt(term.lambda);
            for (std::size_t i = 0; i < term.nodes.size(); ++i) {
                std::map<std::size_t, Complex> acc;
                for (std::size_t p = 0; p < term.parts.size(); ++p) {
                    const auto& [comp, st] = term.parts[p];
                    const auto& d = deltas_[t][p];
                    for (std::size_t k = 0; k < d.size(); ++k)
                        acc[comp * N + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(term.nodes[i]) + d[k])] +=
                            st.taps()[k].weight;
                }
                Row re, im;
                for (const auto& [k, w] : acc) {
                    if (!active_[k % N]) continue;
                    if (w.real() != 0.0) re.emplace_back(k, c * w.real());
                    if (w.imag() != 0.0) im.emplace_back(k, c * w.imag());
                }
                if (!re.empty()) rows.push_back(std::move(re));
                if (!im.empty()) rows.push_back(std::move(im));
            }
        }
        return rows;
    }

    double lambda_t() const { return lambda_t_; }
    double line_weight() const { return A_.lines().empty() ? 0.0 : A_.lines().weight(); }
    const Grid& grid() const { return grid_; }

private:
    Grid grid_;
    int comps_;
    bool vector_;
    ProjectionMatrix A_;
    std::vector<PriorTerm> priors_;
    double lambda_t_;
    std::vector<std::uint8_t> active_;
    std::vector<std::vector<std::vector<std::ptrdiff_t>>> deltas_;
};

struct CgState {
    std::vector<double> x;
    std::vector<double> data_res;  ///< X x - d
};

inline double sq_norm(std::span<const Complex> v) {
    double s = 0.0;
    for (const Complex& c : v) s += std::norm(c);
    return s;
}

inline double sq_norm(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return s;
}

/// The prior rows R carry weights of order h^{-order}, so R^T R swamps the
/// data block by many orders of magnitude and a plain CG loses the data in
/// round-off. The solve is split instead. With the Jacobi scaling x = s.xi,
/// the scaled rows B = R diag(s) are factorised as B^T = Q T (pivoted QR on
/// the few columns the rows touch). xi = xi_N + Q y with Q^T xi_N = 0; the
/// y block, where the stiff prior lives, is eliminated exactly through the
/// small dense matrix K = Q^T A Q + T T^T, and CG runs on the Schur
/// complement in xi_N, which never sees R.
class PriorDeflation {
public:
    PriorDeflation() = default;

    PriorDeflation(const std::vector<NormalSystem::Row>& rows, std::span<const double> scale) {
        if (rows.empty()) return;
        for (const auto& row : rows)
            for (const auto& [k, w] : row) support_.push_back(k);
        std::sort(support_.begin(), support_.end());
        support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
        const auto ns = static_cast<Eigen::Index>(support_.size());
        const auto nr = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(ns, nr);
        for (Eigen::Index i = 0; i < nr; ++i)
            for (const auto& [k, w] : rows[i]) E(local(k), i) += w * scale[k];
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(E);
        rank_ = qr.rank();
        if (rank_ == 0) return;
        Q_ = qr.householderQ() * Eigen::MatrixXd::Identity(ns, rank_);
        const Eigen::MatrixXd T = qr.matrixR().topRows(rank_).triangularView<Eigen::Upper>();
        TTt_ = T * T.transpose();
    }

    Eigen::Index rank() const { return rank_; }
    std::span<const std::size_t> support() const { return support_; }

    /// Q^T u over the support.
    Eigen::VectorXd coords(std::span<const double> u) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(rank_);
        for (std::size_t i = 0; i < support_.size(); ++i) g += Q_.row(static_cast<Eigen::Index>(i)).transpose() * u[support_[i]];
        return g;
    }

    /// u += c Q y.
    void add(const Eigen::VectorXd& y, double c, std::span<double> u) const {
        if (rank_ == 0) return;
        const Eigen::VectorXd q = Q_ * y;
        for (std::size_t i = 0; i < support_.size(); ++i) u[support_[i]] += c * q[static_cast<Eigen::Index>(i)];
    }

    /// u -= Q Q^T u.
    void project_out(std::span<double> u) const {
        if (rank_ > 0) add(coords(u), -1.0, u);
    }

    /// Column j of Q embedded in a vector of length m.
    std::vector<double> column(Eigen::Index j, std::size_t m) const {
        std::vector<double> u(m, 0.0);
        for (std::size_t i = 0; i < support_.size(); ++i) u[support_[i]] = Q_(static_cast<Eigen::Index>(i), j);
        return u;
    }

    /// Builds K = Q^T W + T T^T from W = A Q.
    void factor(Eigen::MatrixXd W) {
        W_ = std::move(W);
        Eigen::MatrixXd K = TTt_;
        for (std::size_t i = 0; i < support_.size(); ++i)
            K += Q_.row(static_cast<Eigen::Index>(i)).transpose() * W_.row(static_cast<Eigen::Index>(support_[i]));
        K = 0.5 * (K + K.transpose()).eval();
        chol_.compute(K);
        if (chol_.info() != Eigen::Success) throw SolverError("prior block factorisation failed");
    }

    /// K^{-1} g.
    Eigen::VectorXd solve(const Eigen::VectorXd& g) const { return chol_.solve(g); }

    /// W^T u, that is Q^T A u.
    Eigen::VectorXd w_coords(std::span<const double> u) const {
        return W_.transpose() * Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    }

    /// u -= W y.
    void sub_w(const Eigen::VectorXd& y, std::span<double> u) const {
        Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())) -= W_ * y;
    }

private:
    Eigen::Index local(std::size_t k) const {
        return std::lower_bound(support_.begin(), support_.end(), k) - support_.begin();
    }

    std::vector<std::size_t> support_;
    Eigen::Index rank_ = 0;
    Eigen::MatrixXd Q_, TTt_, W_;
    Eigen::LDLT<Eigen::MatrixXd> chol_;
};

/// CG on the normal equations, prior block eliminated as in PriorDeflation,
/// from xi_N = 0. The data residual is carried along so every iteration is
/// reported.
inline CgState run_cg(const NormalSystem& sys, std::span<const double> data, const SolverControls& ctl,
                      SolveReport& rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t m = sys.size();
    const double hv = sys.grid().cell_volume();
    const std::size_t L = sys.lines();
    const double lw = sys.line_weight();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    std::vector<double> scale(m, 1.0);
    if (ctl.preconditioner == Preconditioner::jacobi) {
        scale = sys.diagonal(false);
        for (double& v : scale) v = 1.0 / std::sqrt(v);
    }
    sys.restrict(scale);

    // Weighted norms: ||.||_Gamma^2 = w sum, ||.||_V^2 = h^n sum, ||x||^2 = h^n sum.
    auto prior_sq = [&](std::span<const double> x) {
        double p = 0.0;
        for (std::size_t t = 0; t < sys.priors().size(); ++t) p += sq_norm(sys.prior_apply(t, x));
        return p;
    };
    double lambda_p = sys.priors().empty() ? 0.0 : sys.priors().front().lambda;
    auto objective = [&](const CgState& st) {
        return lw * sq_norm(st.data_res) + hv * (sys.lambda_t() * sq_norm(st.x) + lambda_p * prior_sq(st.x));
    };
    auto record = [&](const CgState& st) {
        rep.data_stream.push_back(std::sqrt(lw * sq_norm(st.data_res)));
        rep.prior_stream.push_back(std::sqrt(hv * prior_sq(st.x)));
    };

    // A u = X*(X u) + lambda_T u in the grid pairing, on the scaled unknowns:
    // returns diag(s) A diag(s) xi and X diag(s) xi.
    std::vector<double> Xu(L), Au(m), tmp(m);
    auto apply_scaled = [&](std::span<const double> xi, std::span<double> out) {
        for (std::size_t k = 0; k < m; ++k) tmp[k] = scale[k] * xi[k];
        std::fill(Xu.begin(), Xu.end(), 0.0);
        sys.project(tmp, Xu);
        std::fill(Au.begin(), Au.end(), 0.0);
        sys.backproject_add(Xu, Au);
        for (std::size_t k = 0; k < m; ++k) out[k] = scale[k] * (Au[k] + sys.lambda_t() * tmp[k]);
    };

    PriorDeflation defl(sys.prior_rows(), scale);
    if (defl.rank() > 0) {
        Eigen::MatrixXd W(static_cast<Eigen::Index>(m), defl.rank());
        std::vector<double> col(m);
        for (Eigen::Index j = 0; j < defl.rank(); ++j) {
            apply_scaled(defl.column(j, m), col);
            W.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(m));
        }
        defl.factor(std::move(W));
    }

    // b = X* d, scaled.
    std::vector<double> bt(m, 0.0);
    sys.backproject_add(data, bt);
    for (std::size_t k = 0; k < m; ++k) bt[k] *= scale[k];
    const Eigen::VectorXd qb = defl.coords(bt);

    // Completion of xi_N by the optimal y, mapped back to x.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(defl.rank()), v;
    auto assemble = [&](std::span<const double> xiN, CgState& st) {
        std::vector<double> xi(xiN.begin(), xiN.end());
        if (defl.rank() > 0) {
            y = defl.solve(qb - defl.w_coords(xiN));
            defl.add(y, 1.0, xi);
        }
        st.x.resize(m);
        for (std::size_t k = 0; k < m; ++k) st.x[k] = scale[k] * xi[k];
        st.data_res.assign(L, 0.0);
        sys.project(st.x, st.data_res);
        for (std::size_t i = 0; i < L; ++i) st.data_res[i] -= data[i];
    };

    // Schur complement S p = Pi A (p - Q K^{-1} W^T p); z = p - Q K^{-1} W^T p
    // is the step direction in xi.
    std::vector<double> z(m);
    auto apply_schur = [&](std::span<const double> p, std::span<double> out) {
        std::copy(p.begin(), p.end(), z.begin());
        if (defl.rank() > 0) {
            v = defl.solve(defl.w_coords(p));
            defl.add(v, -1.0, z);
        }
        apply_scaled(z, out);
        defl.project_out(out);
    };

    std::vector<double> xiN(m, 0.0);
    CgState s;
    assemble(xiN, s);
    rep.unknowns = sys.unknowns();
    record(s);
    rep.restart_objectives.push_back(objective(s));

    // c = Pi (b - W K^{-1} Q^T b).
    std::vector<double> r = bt;
    if (defl.rank() > 0) defl.sub_w(defl.solve(qb), r);
    defl.project_out(r);
    double rr = sq_norm(r);
    const double rr0 = rr;
    auto finish = [&](int it) {
        rep.iterations = it;
        if (!rep.converged) rep.status = "max_iter";
        rep.objective = objective(s);
        rep.data_residual = rep.data_stream.back();
        rep.prior_residual = rep.prior_stream.back();
        rep.wall_time_s = elapsed();
    };
    if (rr0 == 0.0) {
        rep.converged = true;
        finish(0);
        return s;
    }

    std::vector<double> p = r, q(m);
    std::vector<double> best = s.x;
    double best_obj = rep.restart_objectives.back();
    int it = 0;
    for (; it < ctl.max_iter; ++it) {
        apply_schur(p, q);
        const double pq = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
        if (!(pq > 0.0)) break;
        const double alpha = rr / pq;
        for (std::size_t k = 0; k < m; ++k) {
            xiN[k] += alpha * p[k];
            s.x[k] += alpha * scale[k] * z[k];
            r[k] -= alpha * q[k];
        }
        for (std::size_t i = 0; i < L; ++i) s.data_res[i] += alpha * Xu[i];
        if (defl.rank() > 0) {
            // Q^T xi_N drifts by round-off, and T amplifies that drift into
            // the prior residual of x; re-project and rebuild x over the
            // support of the prior rows.
            y -= alpha * v;
            defl.project_out(xiN);
            std::vector<double> qy(m, 0.0);
            defl.add(y, 1.0, qy);
            for (std::size_t k : defl.support()) s.x[k] = scale[k] * (xiN[k] + qy[k]);
        }
        record(s);

        const bool restart = ctl.restart_every > 0 && (it + 1) % ctl.restart_every == 0;
        if (restart) {
            // Exact iterate and residual at the restart boundary.
            assemble(xiN, s);
            apply_schur(xiN, q);
            for (std::size_t k = 0; k < m; ++k) r[k] = bt[k] - q[k];
            if (defl.rank() > 0) defl.sub_w(defl.solve(qb), r);
            defl.project_out(r);
            ++rep.restarts;
            const double obj = objective(s);
            const double prev = rep.restart_objectives.back();
            rep.restart_objectives.push_back(obj);
            if (obj > prev * (1.0 + 1e-10) + 1e-300) {
                rep.status = "diverged";
                finish(it + 1);
                throw SolverFailure("objective increased across a CG restart", rep, best);
            }
            if (obj <= best_obj) {
                best_obj = obj;
                best = s.x;
            }
        }

        const double rr_new = sq_norm(r);
        rep.relative_residual = std::sqrt(rr_new / rr0);
        if (rep.relative_residual < ctl.cg_tol) {
            rep.converged = true;
            ++it;
            break;
        }
        const double beta = restart ? 0.0 : rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < m; ++k) p[k] = r[k] + beta * p[k];
        defl.project_out(p);
    }
    finish(it);
    return s;
}

inline std::vector<std::uint8_t> active_nodes(const Grid& g, double radius) {
    std::vector<std::uint8_t> a(g.node_count(), 1);
    if (radius <= 0.0) radius = g.support_radius();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = norm(g.position(k), g.n()) < radius ? 1 : 0;
    return a;
}

inline void check_problem(const PartialDataProblem& p, const Grid& grid) {
    require_same_grid(p.roi.grid(), grid, "partial-data problem (roi)");
    require_same_grid(p.v.grid(), grid, "partial-data problem (V)");
    if (p.data.lines.n() != grid.n()) throw GeometryError("partial-data problem: data dimension mismatch");
    if (p.data.values.size() != p.data.lines.size()) throw GeometryError("partial-data problem: data size mismatch");
    if (!(p.lambda_prior >= 0.0) || !(p.lambda_tikhonov >= 0.0)) throw DomainError("penalty weights must be >= 0");
    if (p.lambda_prior > 0.0 && !p.prior) throw DomainError("lambda_prior > 0 needs a prior operator");
    if (p.v.empty()) throw RegionError("V is empty");
    if (!p.v.subset_of(p.roi)) throw RegionError("V must lie inside the roi");
    if (p.controls.max_iter < 1) throw DomainError("max_iter must be >= 1");
}

}  // namespace detail

/// Penalised least squares for f from ROI data:
///   ||X0 f - data||^2_Gamma + lambda_p ||P(D) f||^2_V + lambda_t ||f||^2,
/// by conjugate gradients on the normal equations from f = 0.
inline std::pair<ScalarField, SolveReport> solve_scalar_partial(const PartialDataProblem& p, const Grid& grid,
                                                                const ScalarField* truth = nullptr) {
    detail::check_problem(p, grid);
    std::vector<detail::PriorTerm> priors;
    if (p.prior && p.lambda_prior > 0.0) {
        CompiledStencil st(*p.prior, grid);
        auto nodes = st.evaluation_nodes(p.v);
        if (nodes.empty()) throw RegionError("no node of interior(V) can host the prior stencil");
        detail::PriorTerm t;
        t.parts.emplace_back(0, std::move(st));
        t.nodes = std::move(nodes);
        t.lambda = p.lambda_prior;
        priors.push_back(std::move(t));
    }
    detail::NormalSystem sys(grid, false, ProjectionMatrix(p.data.lines, grid), std::move(priors), p.lambda_tikhonov,
                             detail::active_nodes(grid, p.controls.support_radius));
    SolveReport rep;
    rep.line_count = p.data.lines.size();
    auto st = detail::run_cg(sys, p.data.values, p.controls, rep);
    ScalarField f(grid, std::move(st.x));
    if (truth) rep.relative_error = relative_l2(f, *truth);
    return {std::move(f), std::move(rep)};
}

/// Vector analogue with the prior on every component (dF)_ij, i < j:
///   ||X1 F - data||^2 + lambda_p sum ||P(D)(dF)_ij||^2_V + lambda_t ||F||^2.
/// Only the solenoidal part is determined; `truth` is compared through it.
inline std::pair<VectorField, SolveReport> solve_vector_partial(const PartialDataProblem& p, const Grid& grid,
                                                                const VectorField* truth = nullptr) {
    detail::check_problem(p, grid);
    const int n = grid.n();
    std::vector<detail::PriorTerm> priors;
    if (p.prior && p.lambda_prior > 0.0) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                // d_i = i D_i, so (dF)_ij = i D_i F_j - i D_j F_i.
                CompiledStencil sj(p.prior->compose(PolyOp::derivative(n, i)).scaled(Complex(0.0, 1.0)), grid);
                CompiledStencil si(p.prior->compose(PolyOp::derivative(n, j)).scaled(Complex(0.0, -1.0)), grid);
                const auto nj = sj.evaluation_nodes(p.v);
                const auto ni = si.evaluation_nodes(p.v);
                detail::PriorTerm t;
                std::set_intersection(nj.begin(), nj.end(), ni.begin(), ni.end(), std::back_inserter(t.nodes));
                if (t.nodes.empty()) throw RegionError("no node of interior(V) can host the curl prior stencil");
                t.parts.emplace_back(j, std::move(sj));
                t.parts.emplace_back(i, std::move(si));
                t.lambda = p.lambda_prior;
                priors.push_back(std::move(t));
            }
    }
    detail::NormalSystem sys(grid, true, ProjectionMatrix(p.data.lines, grid), std::move(priors), p.lambda_tikhonov,
                             detail::active_nodes(grid, p.controls.support_radius));
    SolveReport rep;
    rep.line_count = p.data.lines.size();
    auto st = detail::run_cg(sys, p.data.values, p.controls, rep);
    const std::size_t N = grid.node_count();
    std::vector<ScalarField> comps;
    for (int c = 0; c < n; ++c)
        comps.emplace_back(grid, std::vector<double>(st.x.begin() + c * N, st.x.begin() + (c + 1) * N));
    VectorField F(std::move(comps));
    if (truth)
        rep.relative_error = relative_l2(solenoidal_decompose(F).solenoidal, solenoidal_decompose(*truth).solenoidal);
    return {std::move(F), std::move(rep)};
}

struct ProbeOptions {
    int n_angles = 180;
    int n_offsets = 0;    ///< 0: 3/2 of the grid size
    double band = 0.25;   ///< probe frequencies |xi| up to this fraction of Nyquist (wavelength >= 8h)
    int block = 4;        ///< LOBPCG block size
    double tol = 1e-6;    ///< on ||B B^T (M f - rho f)|| / (rho_max ||f||)
    int power_iters = 40; ///< for the largest Rayleigh quotient
};

struct ProbeResult {
    ScalarField field;                ///< unit grid norm
    double rayleigh = 0.0;            ///< rayleigh_min / rayleigh_max
    double rayleigh_min = 0.0;        ///< ||X0 f||^2_Gamma / ||f||^2
    double rayleigh_max = 0.0;
    int iterations = 0;
    bool converged = false;
    bool support_fallback = false;    ///< no grid node outside roi: probed the whole support ball
    std::size_t support_nodes = 0;
    std::size_t support_violation = 0; ///< nonzero nodes inside roi
    std::size_t line_count = 0;
    double wall_time_s = 0.0;
};

namespace detail {

/// B = mask * lowpass, with lowpass the spectral cut |xi| <= band * pi / h
/// (symmetric in the grid pairing), so B B^T keeps vectors inside the mask.
class ProbeSpace {
public:
    ProbeSpace(const Grid& g, std::vector<std::uint8_t> mask, double band)
        : grid_(g), mask_(std::move(mask)), cut_(band * std::numbers::pi / g.h()) {}

    std::vector<double> lowpass(std::span<const double> u) const {
        Spectrum sp = spectral_forward(ScalarField(grid_, std::vector<double>(u.begin(), u.end())));
        const int n = grid_.n();
        sp.multiply([&](const Point& xi, std::size_t) { return norm(xi, n) <= cut_ ? 1.0 : 0.0; });
        const ScalarField f = spectral_inverse(std::move(sp)).field;
        return {f.values().begin(), f.values().end()};
    }

    void apply_mask(std::span<double> u) const {
        for (std::size_t k = 0; k < u.size(); ++k)
            if (!mask_[k]) u[k] = 0.0;
    }

    /// B B^T u.
    std::vector<double> smooth(std::span<const double> u) const {
        std::vector<double> v(u.begin(), u.end());
        apply_mask(v);
        std::vector<double> w = lowpass(v);
        w = lowpass(w);
        apply_mask(w);
        return w;
    }

    const std::vector<std::uint8_t>& mask() const { return mask_; }

private:
    Grid grid_;
    std::vector<std::uint8_t> mask_;
    double cut_;
};

/// Orthonormal basis (columns) for span(B) with the columns of `against`
/// projected out; near-dependent directions are dropped.
inline Eigen::MatrixXd orthonormal_extension(const Eigen::MatrixXd& against, Eigen::MatrixXd B) {
    for (int pass = 0; pass < 2; ++pass)
        if (against.cols() > 0) B -= against * (against.transpose() * B);
    std::vector<Eigen::VectorXd> keep;
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
        Eigen::VectorXd v = B.col(j);
        const double n0 = v.norm();
        if (n0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : keep) v -= q.dot(v) * q;
            if (against.cols() > 0) v -= against * (against.transpose() * v);
        }
        const double n1 = v.norm();
        if (n1 > 1e-10 * n0) keep.push_back(v / n1);
    }
    Eigen::MatrixXd out(B.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = keep[j];
    return out;
}

}  // namespace detail

/// Smallest normalised Rayleigh quotient ||X0 f||^2_Gamma / ||f||^2 over
/// smooth f supported in the support ball outside roi, with the lines that
/// meet roi. Block LOBPCG in the range of B = mask * lowpass; every iterate
/// is a combination of vectors B B^T (.), so it vanishes inside roi exactly.
/// When no node lies outside roi the whole support ball is probed.
inline ProbeResult null_space_probe(const RegionMask& roi, const Grid& grid, int iters, const ProbeOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    require_same_grid(roi.grid(), grid, "null_space_probe");
    if (iters < 1) throw DomainError("probe needs iters >= 1");
    if (opt.block < 1 || !(opt.band > 0.0 && opt.band <= 1.0)) throw DomainError("invalid probe options");
    if (roi.empty()) throw RegionError("probe roi is empty");
    const std::size_t N = grid.node_count();

    ProbeResult res;
    std::vector<std::uint8_t> mask(N, 0);
    const auto ball = detail::active_nodes(grid, 0.0);
    for (std::size_t k = 0; k < N; ++k) mask[k] = ball[k] && !roi.contains(k);
    if (std::count(mask.begin(), mask.end(), 1) == 0) {
        mask = ball;
        res.support_fallback = true;
    }
    res.support_nodes = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));

    int widest = 0;
    for (int a = 0; a < grid.n(); ++a) widest = std::max(widest, grid.size(a));
    const int offsets = opt.n_offsets > 0 ? opt.n_offsets : 3 * widest / 2;
    const LineSet ls = filter_roi(make_lineset(grid, opt.n_angles, offsets), roi);
    if (ls.empty()) throw RegionError("no line meets the probe roi");
    res.line_count = ls.size();
    const ProjectionMatrix A(ls, grid);
    const detail::ProbeSpace space(grid, mask, opt.band);

    std::vector<double> proj(ls.size());
    auto normal = [&](std::span<const double> f) {
        std::fill(proj.begin(), proj.end(), 0.0);
        A.forward(f, proj);
        std::vector<double> out(N, 0.0);
        A.backproject_add(proj, out);
        return out;
    };
    auto as_vec = [&](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(N)); };
    auto normal_cols = [&](const Eigen::MatrixXd& V) {
        Eigen::MatrixXd MV(V.rows(), V.cols());
        for (Eigen::Index j = 0; j < V.cols(); ++j) {
            const Eigen::VectorXd c = V.col(j);
            MV.col(j) = as_vec(normal(std::span<const double>(c.data(), N)));
        }
        return MV;
    };
    auto smooth_vec = [&](const Eigen::VectorXd& c) { return as_vec(space.smooth(std::span<const double>(c.data(), N))); };

    // Largest quotient by power iteration on B B^T M.
    Eigen::VectorXd v = smooth_vec(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(N)));
    for (int i = 0; i < opt.power_iters; ++i) {
        v.normalize();
        const Eigen::VectorXd Mv = as_vec(normal(std::span<const double>(v.data(), N)));
        res.rayleigh_max = std::max(res.rayleigh_max, v.dot(Mv));
        v = smooth_vec(Mv);
    }
    if (!(res.rayleigh_max > 0.0)) throw SolverError("probe: restricted normal operator vanishes");

    // Deterministic, smooth start block: low-order monomials times the mask.
    const int k = opt.block;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(N), k);
    for (std::size_t i = 0; i < N; ++i) {
        const Point x = grid.position(i);
        for (int j = 0; j < k; ++j) X(static_cast<Eigen::Index>(i), j) = std::pow(x[j % grid.n()], j / grid.n());
    }
    for (int j = 0; j < k; ++j) X.col(j) = smooth_vec(X.col(j));
    X = detail::orthonormal_extension(Eigen::MatrixXd(), X);
    Eigen::MatrixXd P(static_cast<Eigen::Index>(N), 0);
    Eigen::VectorXd theta;
    for (int it = 0; it < iters; ++it) {
        res.iterations = it + 1;
        const Eigen::MatrixXd MX = normal_cols(X);
        const Eigen::MatrixXd G = X.transpose() * MX;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (G + G.transpose()));
        X = X * small.eigenvectors();
        const Eigen::MatrixXd MXr = MX * small.eigenvectors();
        theta = small.eigenvalues();
        Eigen::MatrixXd R(X.rows(), X.cols());
        for (Eigen::Index j = 0; j < X.cols(); ++j) R.col(j) = smooth_vec(MXr.col(j) - theta[j] * X.col(j));
        const double rnorm = R.col(0).norm() / res.rayleigh_max;
        if (rnorm < opt.tol) {
            res.converged = true;
            break;
        }
        Eigen::MatrixXd RP(X.rows(), R.cols() + P.cols());
        RP << R, P;
        const Eigen::MatrixXd S = detail::orthonormal_extension(X, RP);
        Eigen::MatrixXd V(X.rows(), X.cols() + S.cols());
        V << X, S;
        const Eigen::MatrixXd MV = normal_cols(V);
        const Eigen::MatrixXd H = V.transpose() * MV;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (H + H.transpose()));
        const Eigen::MatrixXd C = ritz.eigenvectors().leftCols(X.cols());
        const Eigen::MatrixXd Xn = V * C;
        P = S * C.bottomRows(S.cols());
        X = detail::orthonormal_extension(Eigen::MatrixXd(), Xn);
        if (P.cols() > 0) P = detail::orthonormal_extension(X, P);
    }
    // Ritz pair of the final block.
    {
        const Eigen::MatrixXd G = X.transpose() * normal_cols(X);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (G + G.transpose()));
        X = X * small.eigenvectors();
        theta = small.eigenvalues();
    }
    std::vector<double> f(N);
    const Eigen::VectorXd x0 = X.col(0) / X.col(0).norm();
    for (std::size_t i = 0; i < N; ++i) f[i] = mask[i] ? x0[static_cast<Eigen::Index>(i)] : 0.0;
    const double gnorm = std::sqrt(grid.cell_volume());
    for (double& c : f) c /= gnorm;
    for (std::size_t i = 0; i < N; ++i)
        if (f[i] != 0.0 && roi.contains(i) && !res.support_fallback) ++res.support_violation;
    res.rayleigh_min = std::max(0.0, theta[0]);
    res.rayleigh_max = std::max(res.rayleigh_max, theta[theta.size() - 1]);
    res.rayleigh = res.rayleigh_min / res.rayleigh_max;
    res.field = ScalarField(grid, std::move(f));
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace roitomo
