#pragma once

/**
 * @file qp.hpp
 * @brief Dense convex QP solver: min 1/2 x'Hx + f'x  s.t.  Gx <= h.
 *
 * Primal active-set method with lowest-index pivoting (Bland's rule on both
 * the leaving and the entering constraint). Equality-constrained subproblems
 * are solved in range-space form with a Cholesky factor of H, which is
 * required to be positive definite. A feasible starting point is obtained
 * from the warm start, or, if that is infeasible, from a regularized Phase-I
 * problem solved by the same iteration.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ecgpcac/errors.hpp"

namespace ecgpcac {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QpSpec {
    MatrixXd H;
    VectorXd f;
    MatrixXd G; ///< inequality rows, G x <= h (box bounds included as rows)
    VectorXd h;
    std::optional<VectorXd> x0;
};

enum class QpStatus { optimal, max_iter, infeasible };

inline std::string_view to_string(QpStatus s) {
    switch (s) {
    case QpStatus::optimal:
        return "optimal";
    case QpStatus::max_iter:
        return "max_iter";
    case QpStatus::infeasible:
        return "infeasible";
    }
    return "?";
}

struct QpSolution {
    VectorXd x;
    VectorXd multipliers;        ///< one per row of G, zero for inactive rows
    std::vector<int> active_set; ///< sorted row indices of the final working set
    int iterations = 0;
    QpStatus status = QpStatus::infeasible;
    double objective = 0.0;
};

struct QpSettings {
    double stationarity_tol = 1e-8;
    double feasibility_tol = 1e-9;
    int max_iter = 0; ///< 0 selects 50 * (n + constraints)
};

/// KKT residuals of a candidate primal-dual pair.
struct KktResiduals {
    double stationarity = 0.0;    ///< ||Hx + f + G'mu||_inf
    double feasibility = 0.0;     ///< max(0, max_i (Gx - h)_i)
    double complementarity = 0.0; ///< max_i |mu_i (Gx - h)_i|
    double dual_feasibility = 0.0; ///< max(0, -min_i mu_i)
};

inline KktResiduals kkt_residuals(const QpSpec& spec, const VectorXd& x, const VectorXd& mu) {
    KktResiduals r;
    VectorXd grad = spec.H * x + spec.f;
    if (spec.G.rows() > 0) {
        grad.noalias() += spec.G.transpose() * mu;
        const VectorXd slack = spec.G * x - spec.h;
        r.feasibility = std::max(0.0, slack.maxCoeff());
        r.complementarity = mu.cwiseProduct(slack).cwiseAbs().maxCoeff();
        r.dual_feasibility = std::max(0.0, -mu.minCoeff());
    }
    r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    return r;
}

inline double qp_objective(const MatrixXd& H, const VectorXd& f, const VectorXd& x) {
    return 0.5 * x.dot(H * x) + f.dot(x);
}

namespace detail {

/// Row with a single nonzero coefficient, i.e. a bound on one variable.
struct SimpleBound {
    Index col = -1; ///< -1 for general rows
    double coef = 0.0;
};

inline std::vector<SimpleBound> simple_bounds(const MatrixXd& G) {
    std::vector<SimpleBound> out(std::size_t(G.rows()));
    for (Index i = 0; i < G.rows(); ++i) {
        Index nz = 0, col = -1;
        for (Index j = 0; j < G.cols(); ++j)
            if (G(i, j) != 0.0) {
                ++nz;
                col = j;
            }
        if (nz == 1)
            out[std::size_t(i)] = {col, G(i, col)};
    }
    return out;
}

/// Moves x inside every single-variable bound row it violates.
inline void clamp_to_bounds(const MatrixXd& G, const VectorXd& h, VectorXd& x) {
    const auto bounds = simple_bounds(G);
    for (Index i = 0; i < G.rows(); ++i) {
        const auto& b = bounds[std::size_t(i)];
        if (b.col >= 0 && b.coef * x(b.col) > h(i))
            x(b.col) = h(i) / b.coef;
    }
}

/// Core primal active-set iteration from a feasible x. `Hinv_Gt` caches H^{-1} G'.
class ActiveSetIteration {
public:
    ActiveSetIteration(const MatrixXd& H, const VectorXd& f, const MatrixXd& G, const VectorXd& h,
                       const Eigen::LLT<MatrixXd>& llt, const QpSettings& settings)
        : H_(H), f_(f), G_(G), h_(h), llt_(llt), settings_(settings) {
        row_norm_ = G_.rowwise().norm();
        in_working_.assign(std::size_t(G_.rows()), false);
        bounds_ = simple_bounds(G_);

        // Bound rows pick a scaled column of H^{-1}; only general rows need a solve.
        const Index n = H_.rows();
        const MatrixXd Hinv = llt_.solve(MatrixXd::Identity(n, n));
        std::vector<Index> general;
        Hinv_Gt_.resize(n, G_.rows());
        for (Index i = 0; i < G_.rows(); ++i) {
            const auto& b = bounds_[std::size_t(i)];
            if (b.col >= 0)
                Hinv_Gt_.col(i) = b.coef * Hinv.col(b.col);
            else
                general.push_back(i);
        }
        if (!general.empty()) {
            MatrixXd Gg(Index(general.size()), n);
            for (std::size_t a = 0; a < general.size(); ++a)
                Gg.row(Index(a)) = G_.row(general[a]);
            const MatrixXd HGg = Hinv * Gg.transpose();
            for (std::size_t a = 0; a < general.size(); ++a)
                Hinv_Gt_.col(general[a]) = HGg.col(Index(a));
        }
    }

    /// Seeds the working set with rows active at x that are independent of those already chosen.
    void seed_working_set(const VectorXd& x) {
        const VectorXd slack = G_ * x - h_;
        const Index n = G_.cols();
        // Cholesky factor of the working Schur complement, grown one row at a time.
        MatrixXd L = MatrixXd::Zero(n, n);
        double scale = std::numeric_limits<double>::min();
        for (Index i = 0; i < G_.rows(); ++i) {
            const Index w = Index(working_.size());
            if (w >= n)
                break;
            if (std::abs(slack(i)) > active_tol(i))
                continue;
            VectorXd s(w);
            for (Index a = 0; a < w; ++a)
                s(a) = G_.row(working_[std::size_t(a)]).dot(Hinv_Gt_.col(i));
            const double sii = G_.row(i).dot(Hinv_Gt_.col(i));
            const VectorXd y = w > 0 ? L.topLeftCorner(w, w).triangularView<Eigen::Lower>().solve(s) : VectorXd(s);
            const double d = sii - y.squaredNorm();
            if (!(d > 1e-10 * std::max(scale, sii)))
                continue;
            L.block(w, 0, 1, w) = y.transpose();
            L(w, w) = std::sqrt(d);
            scale = std::max(scale, sii);
            working_.push_back(int(i));
            in_working_[std::size_t(i)] = true;
        }
        std::sort(working_.begin(), working_.end());
    }

    QpSolution run(VectorXd x, int max_iter) {
        QpSolution sol;
        const Index n = H_.rows();
        const Index nc = G_.rows();
        VectorXd mu_w;
        bool at_subproblem_minimum = false; // set after an unblocked full step
        int iter = 0;
        for (; iter < max_iter; ++iter) {
            const VectorXd g = H_ * x + f_;
            VectorXd p;
            double p_scale = 0.0;
            if (!solve_eqp(g, p, mu_w, &p_scale))
                throw NumericalError("qp: working-set system became singular");

            // A full working set pins x, and a full step lands on the subproblem
            // minimizer; in both cases p is zero up to cancellation error.
            const double zero_tol = 1e-12 * (1.0 + x.cwiseAbs().maxCoeff() + p_scale);
            const bool pinned = Index(working_.size()) >= n;
            if (pinned || at_subproblem_minimum || p.cwiseAbs().maxCoeff() <= zero_tol) {
                at_subproblem_minimum = false;
                // Stationary on the working set: check multiplier signs.
                const double mult_tol = 1e-12 * (1.0 + g.cwiseAbs().maxCoeff());
                int leaving = -1;
                for (std::size_t j = 0; j < working_.size(); ++j) {
                    if (mu_w(Index(j)) < -mult_tol) {
                        leaving = int(j);
                        break; // working_ is sorted, so this is the lowest row index
                    }
                }
                if (leaving < 0) {
                    sol.status = QpStatus::optimal;
                    break;
                }
                in_working_[std::size_t(working_[std::size_t(leaving)])] = false;
                working_.erase(working_.begin() + leaving);
                continue;
            }

            double alpha = 1.0;
            int blocking = -1;
            const VectorXd Gp = G_ * p;
            const double p_norm = p.norm();
            // A row dependent on the working set can only look blocking through
            // rounding in p (equal lower and upper bounds, repeated rows); skip it.
            std::vector<bool> excluded(std::size_t(nc), false);
            for (;;) {
                alpha = 1.0;
                blocking = -1;
                for (Index i = 0; i < nc; ++i) {
                    if (in_working_[std::size_t(i)] || excluded[std::size_t(i)])
                        continue;
                    if (Gp(i) <= 1e-12 * row_norm_(i) * p_norm)
                        continue;
                    const double room = std::max(0.0, h_(i) - G_.row(i).dot(x));
                    const double t = room / Gp(i);
                    if (t < alpha) {
                        alpha = t;
                        blocking = int(i);
                    }
                }
                if (blocking < 0 || independent_with(blocking))
                    break;
                excluded[std::size_t(blocking)] = true;
            }
            x += alpha * p;
            at_subproblem_minimum = blocking < 0;
            if (blocking >= 0) {
                working_.insert(std::upper_bound(working_.begin(), working_.end(), blocking), blocking);
                in_working_[std::size_t(blocking)] = true;
            }
            snap_to_bounds(x);
        }
        if (sol.status != QpStatus::optimal)
            sol.status = QpStatus::max_iter;
        else
            polish(x);

        sol.x = std::move(x);
        sol.iterations = iter;
        sol.active_set = working_;
        sol.multipliers = VectorXd::Zero(nc);
        if (!working_.empty()) {
            VectorXd p;
            const VectorXd g = H_ * sol.x + f_;
            if (solve_eqp(g, p, mu_w))
                for (std::size_t j = 0; j < working_.size(); ++j)
                    sol.multipliers(working_[j]) = std::max(0.0, mu_w(Index(j)));
        }
        sol.objective = qp_objective(H_, f_, sol.x);
        return sol;
    }

private:
    // Rounding in the range-space step lets x creep off working bound rows;
    // those rows involve a single variable, so put it back exactly.
    void snap_to_bounds(VectorXd& x) const {
        for (int i : working_) {
            const auto& b = bounds_[std::size_t(i)];
            if (b.col >= 0)
                x(b.col) = h_(i) / b.coef;
        }
    }

    double active_tol(Index i) const {
        return 1e-12 * (1.0 + std::abs(h_(i)) + row_norm_(i));
    }

    MatrixXd working_schur() const {
        const Index w = Index(working_.size());
        MatrixXd Gw(w, G_.cols());
        MatrixXd HGw(G_.cols(), w);
        for (Index a = 0; a < w; ++a) {
            Gw.row(a) = G_.row(working_[std::size_t(a)]);
            HGw.col(a) = Hinv_Gt_.col(working_[std::size_t(a)]);
        }
        MatrixXd S = Gw * HGw;
        return 0.5 * (S + S.transpose());
    }

    bool independent_with(int row) {
        working_.push_back(row);
        const bool ok = working_set_independent();
        working_.pop_back();
        return ok;
    }

    bool working_set_independent() const {
        if (working_.empty())
            return true;
        const MatrixXd S = working_schur();
        Eigen::LDLT<MatrixXd> ldlt(S);
        if (ldlt.info() != Eigen::Success)
            return false;
        const double scale = std::max(S.diagonal().maxCoeff(), std::numeric_limits<double>::min());
        return ldlt.vectorD().minCoeff() > 1e-10 * scale;
    }

    /// Minimizes 1/2 p'Hp + g'p subject to G_W p = 0. Multipliers follow the
    /// convention Hp + G_W' mu = -g, so mu >= 0 at a KKT point of G x <= h.
    bool solve_eqp(const VectorXd& g, VectorXd& p, VectorXd& mu, double* scale = nullptr) const {
        const VectorXd Hinv_g = llt_.solve(g);
        if (scale)
            *scale = Hinv_g.cwiseAbs().maxCoeff();
        if (working_.empty()) {
            p = -Hinv_g;
            mu.resize(0);
            return true;
        }
        const Index w = Index(working_.size());
        const MatrixXd S = working_schur();
        VectorXd rhs(w);
        for (Index a = 0; a < w; ++a)
            rhs(a) = -G_.row(working_[std::size_t(a)]).dot(Hinv_g);
        Eigen::LDLT<MatrixXd> ldlt(S);
        if (ldlt.info() != Eigen::Success)
            return false;
        mu = ldlt.solve(rhs);
        if (!mu.allFinite())
            return false;
        p = -Hinv_g;
        for (Index a = 0; a < w; ++a)
            p.noalias() -= mu(a) * Hinv_Gt_.col(working_[std::size_t(a)]);
        return true;
    }

    /// Re-solves the final working set directly so x sits exactly on its
    /// constraints, keeping the result only if it stays feasible.
    void polish(VectorXd& x) const {
        VectorXd candidate = -llt_.solve(f_);
        if (!working_.empty()) {
            const Index w = Index(working_.size());
            const MatrixXd S = working_schur();
            VectorXd rhs(w);
            for (Index a = 0; a < w; ++a) {
                const int i = working_[std::size_t(a)];
                rhs(a) = G_.row(i).dot(candidate) - h_(i);
            }
            Eigen::LDLT<MatrixXd> ldlt(S);
            if (ldlt.info() != Eigen::Success)
                return;
            const VectorXd mu = ldlt.solve(rhs);
            for (Index a = 0; a < w; ++a)
                candidate.noalias() -= mu(a) * Hinv_Gt_.col(working_[std::size_t(a)]);
        }
        if (!candidate.allFinite())
            return;
        if (G_.rows() > 0) {
            const VectorXd slack = G_ * candidate - h_;
            for (Index i = 0; i < G_.rows(); ++i)
                if (slack(i) > settings_.feasibility_tol * 0.1 * (1.0 + std::abs(h_(i))))
                    return;
        }
        x = std::move(candidate);
    }

    const MatrixXd& H_;
    const VectorXd& f_;
    const MatrixXd& G_;
    const VectorXd& h_;
    const Eigen::LLT<MatrixXd>& llt_;
    const QpSettings& settings_;
    MatrixXd Hinv_Gt_;
    VectorXd row_norm_;
    std::vector<int> working_;
    std::vector<bool> in_working_;
    std::vector<SimpleBound> bounds_;
};

inline double max_violation(const MatrixXd& G, const VectorXd& h, const VectorXd& x) {
    if (G.rows() == 0)
        return 0.0;
    return (G * x - h).maxCoeff();
}

/// Phase I: min t + delta/2 (|x - x0|^2 + t^2) s.t. Gx - t <= h, t >= 0.
/// For small enough delta the minimizer has t = 0 whenever Gx <= h is feasible.
inline std::optional<VectorXd> find_feasible_point(const MatrixXd& G, const VectorXd& h, const VectorXd& x0,
                                                   const QpSettings& settings, int& iterations) {
    const Index n = G.cols();
    const Index nc = G.rows();
    MatrixXd Ga = MatrixXd::Zero(nc + 1, n + 1);
    Ga.topLeftCorner(nc, n) = G;
    Ga.block(0, n, nc, 1).setConstant(-1.0);
    Ga(nc, n) = -1.0;
    VectorXd ha(nc + 1);
    ha << h, 0.0;

    VectorXd start(n + 1);
    const double t0 = std::max(0.0, max_violation(G, h, x0));
    start << x0, t0 * (1.0 + 1e-6) + 1e-12;

    double delta = 1e-6 / (1.0 + x0.squaredNorm() + t0 * t0);
    for (int attempt = 0; attempt < 3; ++attempt, delta *= 1e-2) {
        const MatrixXd Ha = MatrixXd::Identity(n + 1, n + 1) * delta;
        VectorXd fa(n + 1);
        fa << -delta * x0, 1.0;
        Eigen::LLT<MatrixXd> llt(Ha);
        ActiveSetIteration it(Ha, fa, Ga, ha, llt, settings);
        it.seed_working_set(start);
        const QpSolution phase1 = it.run(start, 50 * int(n + 1 + nc + 1));
        iterations += phase1.iterations;
        const VectorXd x = phase1.x.head(n);
        if (max_violation(G, h, x) <= settings.feasibility_tol)
            return x;
        start = phase1.x;
    }
    return std::nullopt;
}

} // namespace detail

/// Solves the QP from the warm start (or zero). Deterministic given (spec, x0).
inline QpSolution solve(const QpSpec& spec, const QpSettings& settings = {}) {
    const Index n = spec.H.rows();
    const Index nc = spec.G.rows();
    if (spec.H.cols() != n || spec.f.size() != n)
        throw ContractViolation("qp solve: H must be square and match f");
    if (nc > 0 && spec.G.cols() != n)
        throw ContractViolation("qp solve: G must have one column per variable");
    if (spec.h.size() != nc)
        throw ContractViolation("qp solve: h must have one entry per row of G");
    if (spec.x0 && spec.x0->size() != n)
        throw ContractViolation("qp solve: warm start has wrong length");
    const double sym_scale = 1.0 + spec.H.cwiseAbs().maxCoeff();
    if ((spec.H - spec.H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * sym_scale)
        throw ContractViolation("qp solve: H must be symmetric");

    Eigen::LLT<MatrixXd> llt(spec.H);
    if (llt.info() != Eigen::Success)
        throw ContractViolation("qp solve: H must be positive definite");

    const int max_iter = settings.max_iter > 0 ? settings.max_iter : 50 * int(n + nc);

    if (nc == 0) {
        QpSolution sol;
        sol.x = -llt.solve(spec.f);
        sol.multipliers.resize(0);
        sol.status = QpStatus::optimal;
        sol.objective = qp_objective(spec.H, spec.f, sol.x);
        return sol;
    }

    VectorXd x = spec.x0 ? *spec.x0 : VectorXd::Zero(n);
    detail::clamp_to_bounds(spec.G, spec.h, x);
    int phase1_iterations = 0;
    if (detail::max_violation(spec.G, spec.h, x) > settings.feasibility_tol) {
        auto feasible = detail::find_feasible_point(spec.G, spec.h, x, settings, phase1_iterations);
        if (!feasible) {
            QpSolution sol;
            sol.x = x;
            sol.multipliers = VectorXd::Zero(nc);
            sol.status = QpStatus::infeasible;
            sol.iterations = phase1_iterations;
            sol.objective = qp_objective(spec.H, spec.f, x);
            return sol;
        }
        x = std::move(*feasible);
    }

    detail::ActiveSetIteration it(spec.H, spec.f, spec.G, spec.h, llt, settings);
    it.seed_working_set(x);
    QpSolution sol = it.run(std::move(x), max_iter);
    sol.iterations += phase1_iterations;
    return sol;
}

/// Shifts a horizon solution one block left and repeats the final block.
/// Entries past block * horizon (slack variables) are zeroed.
inline VectorXd warm_start_shift(const VectorXd& prev, Index block, Index horizon) {
    if (block < 1 || horizon < 1 || prev.size() < block * horizon)
        throw ContractViolation("warm_start_shift: solution shorter than block * horizon");
    VectorXd x0 = VectorXd::Zero(prev.size());
    const Index nu = block * horizon;
    if (horizon > 1)
        x0.head(nu - block) = prev.segment(block, nu - block);
    x0.segment(nu - block, block) = prev.segment(nu - block, block);
    return x0;
}

} // namespace ecgpcac
