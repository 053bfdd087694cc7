#pragma once

/**
 * @file mpc.hpp
 * @brief Receding-horizon prediction and QP assembly from an identified ARX model.
 *
 * With U = [u_{k|1}; ...; u_{k|l}] the l-step prediction is Y = Gamma + T U,
 * where Gamma = F_p^{-1}(-F_d Y_hist + G_d U_hist) and T = F_p^{-1} G_p. F_p is
 * unit lower block triangular, so both products are formed by block forward
 * substitution.
 */

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ecgpcac/errors.hpp"
#include "ecgpcac/qp.hpp"
#include "ecgpcac/rls.hpp"

namespace ecgpcac {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double hessian_regularization = 1e-9;

struct ToeplitzBlocks {
    MatrixXd F_p; ///< l p x l p
    MatrixXd G_p; ///< l p x l m
    MatrixXd F_d; ///< l p x n p
    MatrixXd G_d; ///< l p x n m
};

/// Block (i, j), 1-based:
///   F_p: F_{i-j} for 0 < i-j <= n, I on the diagonal
///   G_p: G_{i-j} for 0 <= i-j <= n
///   F_d: F_{n+i-j} for j >= i, history column j holding y_{k-n+j}
///   G_d: G_{n+i-j} for j >= i
inline ToeplitzBlocks build_toeplitz(const ArxModel& model, int ell) {
    if (ell < 1)
        throw ContractViolation("build_toeplitz: horizon must be at least 1");
    model.validate();
    const int n = model.n_hat;
    const Index p = model.p;
    const Index m = model.m;

    ToeplitzBlocks tb;
    tb.F_p = MatrixXd::Identity(ell * p, ell * p);
    tb.G_p = MatrixXd::Zero(ell * p, ell * m);
    tb.F_d = MatrixXd::Zero(ell * p, n * p);
    tb.G_d = MatrixXd::Zero(ell * p, n * m);

    std::vector<MatrixXd> F(std::size_t(n) + 1), G(std::size_t(n) + 1);
    for (int i = 1; i <= n; ++i)
        F[std::size_t(i)] = model.F(i);
    for (int i = 0; i <= n; ++i)
        G[std::size_t(i)] = model.G(i);

    for (int i = 1; i <= ell; ++i) {
        const Index r0 = Index(i - 1) * p;
        for (int j = 1; j <= i; ++j) {
            const int lag = i - j;
            if (lag > n)
                continue;
            if (lag > 0)
                tb.F_p.block(r0, Index(j - 1) * p, p, p) = F[std::size_t(lag)];
            tb.G_p.block(r0, Index(j - 1) * m, p, m) = G[std::size_t(lag)];
        }
        for (int j = i; j <= n; ++j) {
            const int lag = n + i - j;
            tb.F_d.block(r0, Index(j - 1) * p, p, p) = F[std::size_t(lag)];
            tb.G_d.block(r0, Index(j - 1) * m, p, m) = G[std::size_t(lag)];
        }
    }
    return tb;
}

struct PredictionOperators {
    VectorXd Gamma; ///< l p
    MatrixXd T;     ///< l p x l m
    ToeplitzBlocks blocks;
    VectorXd D_hist;
    int ell = 0;
    Index p = 0;
    Index m = 0;

    /// Predicted outputs Y = Gamma + T U.
    VectorXd predict(const VectorXd& U) const { return Gamma + T * U; }
};

namespace detail {

/// Solves F_p X = B in place for unit lower block triangular F_p with p x p blocks.
inline void block_forward_substitute(const MatrixXd& F_p, Index p, MatrixXd& X) {
    const Index nb = F_p.rows() / p;
    for (Index i = 1; i < nb; ++i)
        for (Index j = 0; j < i; ++j) {
            const auto Fij = F_p.block(i * p, j * p, p, p);
            if (!Fij.isZero(0.0))
                X.middleRows(i * p, p).noalias() -= Fij * X.middleRows(j * p, p);
        }
}

} // namespace detail

/// `history` is [y_{k-n+1}; ...; y_k; u_{k-n+1}; ...; u_k] (Regressor::history()).
inline PredictionOperators build_prediction(const ArxModel& model, const VectorXd& history, int ell) {
    const Index p = model.p;
    const Index m = model.m;
    const Index n = model.n_hat;
    if (history.size() != n * (p + m))
        throw ContractViolation("build_prediction: history must hold n_hat outputs and n_hat inputs");

    PredictionOperators ops;
    ops.blocks = build_toeplitz(model, ell);
    ops.D_hist = history;
    ops.ell = ell;
    ops.p = p;
    ops.m = m;

    MatrixXd gamma = -ops.blocks.F_d * history.head(n * p) + ops.blocks.G_d * history.tail(n * m);
    detail::block_forward_substitute(ops.blocks.F_p, p, gamma);
    ops.Gamma = gamma.col(0);

    ops.T = ops.blocks.G_p;
    detail::block_forward_substitute(ops.blocks.F_p, p, ops.T);
    return ops;
}

// ---------------------------------------------------------------------------
// Weights, output maps, bounds

struct HorizonWeights {
    MatrixXd Q;       ///< l p_t square, PD
    MatrixXd Q_i;     ///< l p_t square, PSD
    MatrixXd R;       ///< l m square, PSD
    MatrixXd R_delta; ///< l m square, PSD
    MatrixXd S;       ///< l n_c square, PSD (empty when n_c = 0)
    int ell = 1;

    /// Q = q I, Q_i = q_i I, R = r I, R_delta = r_delta I, S = s I.
    static HorizonWeights diagonal(int ell, Index p_t, Index m, Index n_c, double q, double q_i, double r,
                                   double r_delta, double s) {
        HorizonWeights w;
        w.ell = ell;
        w.Q = MatrixXd::Identity(ell * p_t, ell * p_t) * q;
        w.Q_i = MatrixXd::Identity(ell * p_t, ell * p_t) * q_i;
        w.R = MatrixXd::Identity(ell * m, ell * m) * r;
        w.R_delta = MatrixXd::Identity(ell * m, ell * m) * r_delta;
        w.S = MatrixXd::Identity(ell * n_c, ell * n_c) * s;
        return w;
    }
};

struct OutputMaps {
    MatrixXd C_t;  ///< p_t x p
    MatrixXd C_c;  ///< p_c x p
    MatrixXd Ccal; ///< n_c x p_c
    VectorXd Dcal; ///< n_c

    /// Tracks every output; no output constraints.
    static OutputMaps tracking_only(Index p) {
        OutputMaps maps;
        maps.C_t = MatrixXd::Identity(p, p);
        maps.C_c = MatrixXd::Zero(0, p);
        maps.Ccal = MatrixXd::Zero(0, 0);
        maps.Dcal = VectorXd::Zero(0);
        return maps;
    }

    Index p_t() const { return C_t.rows(); }
    Index n_c() const { return Ccal.rows(); }
};

struct ControlBounds {
    VectorXd u_min, u_max;
    VectorXd du_min, du_max;

    static ControlBounds symmetric(Index m, double u_abs, double du_abs = std::numeric_limits<double>::infinity()) {
        ControlBounds b;
        b.u_min = VectorXd::Constant(m, -u_abs);
        b.u_max = VectorXd::Constant(m, u_abs);
        b.du_min = VectorXd::Constant(m, -du_abs);
        b.du_max = VectorXd::Constant(m, du_abs);
        return b;
    }

    void validate(Index m) const {
        if (u_min.size() != m || u_max.size() != m || du_min.size() != m || du_max.size() != m)
            throw ContractViolation("ControlBounds: every bound must have one entry per input");
        for (Index j = 0; j < m; ++j) {
            if (std::isnan(u_min(j)) || std::isnan(u_max(j)) || !(u_min(j) <= u_max(j)))
                throw ContractViolation("ControlBounds: need u_min <= u_max");
            if (std::isnan(du_min(j)) || std::isnan(du_max(j)) || !(du_min(j) <= 0.0 && 0.0 <= du_max(j)))
                throw ContractViolation("ControlBounds: need du_min <= 0 <= du_max");
        }
    }
};

// ---------------------------------------------------------------------------
// Integrated tracking error

struct IntegratorState {
    VectorXd i_accum; ///< sum over steps 0..k of (y_t - r)

    static IntegratorState zeros(Index p_t) { return {VectorXd::Zero(p_t)}; }

    void update(const VectorXd& y_t, const VectorXd& r) {
        if (y_t.size() != i_accum.size() || r.size() != i_accum.size())
            throw ContractViolation("IntegratorState: sample has wrong dimension");
        i_accum += y_t - r;
    }
};

/// Stacked affine map I = M U + c.
struct AffineMap {
    MatrixXd M;
    VectorXd c;

    VectorXd operator()(const VectorXd& U) const { return M * U + c; }
};

/// i_{k|1} = i_k + y_t,k - r_k and i_{k|i} = i_{k|i-1} + y_t,k|i-1 - r_{k|i-1},
/// with r_future = [r_k; r_{k|1}; ...; r_{k|l-1}] (l blocks of p_t).
inline AffineMap build_integrated_error(const PredictionOperators& ops, const MatrixXd& C_t,
                                        const IntegratorState& i_state, const VectorXd& y_t_now,
                                        const VectorXd& r_future) {
    const Index p_t = C_t.rows();
    const Index ell = ops.ell;
    const Index nu = ell * ops.m;
    if (C_t.cols() != ops.p)
        throw ContractViolation("build_integrated_error: C_t must have one column per output");
    if (i_state.i_accum.size() != p_t || y_t_now.size() != p_t)
        throw ContractViolation("build_integrated_error: integrator and y_t must have p_t entries");
    if (r_future.size() != ell * p_t)
        throw ContractViolation("build_integrated_error: r_future must hold l blocks of p_t");

    AffineMap map;
    map.M = MatrixXd::Zero(ell * p_t, nu);
    map.c = VectorXd::Zero(ell * p_t);
    map.c.head(p_t) = i_state.i_accum + y_t_now - r_future.head(p_t);
    for (Index i = 1; i < ell; ++i) {
        const auto prev_rows = ops.T.middleRows((i - 1) * ops.p, ops.p);
        map.M.middleRows(i * p_t, p_t) = map.M.middleRows((i - 1) * p_t, p_t) + C_t * prev_rows;
        map.c.segment(i * p_t, p_t) = map.c.segment((i - 1) * p_t, p_t)
            + C_t * ops.Gamma.segment((i - 1) * ops.p, ops.p) - r_future.segment(i * p_t, p_t);
    }
    return map;
}

// ---------------------------------------------------------------------------
// QP assembly

/// Decision vector [U; eps]. lb/ub bound the whole vector (eps >= 0 lives in lb).
struct QpProblem {
    MatrixXd H;
    VectorXd f;
    MatrixXd A_ineq;
    VectorXd b_ineq;
    VectorXd lb, ub;
    Index n_u = 0;     ///< length of U
    Index n_slack = 0; ///< length of eps

    Index size() const { return n_u + n_slack; }

    /// Folds the finite box bounds into G x <= h (inequality rows first, then
    /// upper bounds, then lower bounds, each in variable order).
    QpSpec to_spec() const {
        const Index n = size();
        std::vector<Index> upper, lower;
        for (Index j = 0; j < n; ++j) {
            if (std::isfinite(ub(j)))
                upper.push_back(j);
            if (std::isfinite(lb(j)))
                lower.push_back(j);
        }
        const Index rows = A_ineq.rows() + Index(upper.size() + lower.size());
        QpSpec spec;
        spec.H = H;
        spec.f = f;
        spec.G = MatrixXd::Zero(rows, n);
        spec.h = VectorXd::Zero(rows);
        Index r = 0;
        if (A_ineq.rows() > 0) {
            spec.G.topRows(A_ineq.rows()) = A_ineq;
            spec.h.head(A_ineq.rows()) = b_ineq;
            r = A_ineq.rows();
        }
        for (Index j : upper) {
            spec.G(r, j) = 1.0;
            spec.h(r++) = ub(j);
        }
        for (Index j : lower) {
            spec.G(r, j) = -1.0;
            spec.h(r++) = -lb(j);
        }
        return spec;
    }
};

/// First-difference operator E with DU = E U - e0, e0 = [u_prev; 0; ...].
inline MatrixXd first_difference(Index ell, Index m) {
    MatrixXd E = MatrixXd::Identity(ell * m, ell * m);
    for (Index i = 1; i < ell; ++i)
        E.block(i * m, (i - 1) * m, m, m) = -MatrixXd::Identity(m, m);
    return E;
}

/// Stacks a per-step block l times.
inline MatrixXd block_diagonal(const MatrixXd& block, Index ell) {
    MatrixXd out = MatrixXd::Zero(ell * block.rows(), ell * block.cols());
    for (Index i = 0; i < ell; ++i)
        out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
    return out;
}

/// Future commands held at the current value: [r_k; r_k; ...].
inline VectorXd hold_command(const VectorXd& r_now, Index ell) { return r_now.replicate(ell, 1); }

/// Objective
///   (C_t Y - R)' Q (C_t Y - R) + I' Q_i I + U' R U + DU' R_delta DU + eps' S eps
/// with Y = Gamma + T U, subject to
///   Ccal C_c Y + Dcal <= eps, U_min <= U <= U_max, DU_min <= DU <= DU_max, eps >= 0.
/// `r_future` holds l blocks of p_t; `y_t_now` is C_t y_k.
inline QpProblem build_qp(const PredictionOperators& ops, const HorizonWeights& weights, const OutputMaps& maps,
                          const ControlBounds& bounds, const VectorXd& u_prev, const VectorXd& r_future,
                          const IntegratorState& i_state, const VectorXd& y_t_now) {
    const Index ell = ops.ell;
    const Index m = ops.m;
    const Index p = ops.p;
    const Index p_t = maps.p_t();
    const Index n_c = maps.n_c();
    const Index nu = ell * m;
    const Index ns = ell * n_c;

    bounds.validate(m);
    if (weights.ell != ell)
        throw ContractViolation("build_qp: weights and prediction use different horizons");
    if (maps.C_t.cols() != p)
        throw ContractViolation("build_qp: C_t must have one column per output");
    if (weights.Q.rows() != ell * p_t || weights.Q.cols() != ell * p_t || weights.Q_i.rows() != ell * p_t ||
        weights.Q_i.cols() != ell * p_t)
        throw ContractViolation("build_qp: Q and Q_i must be l p_t square");
    if (weights.R.rows() != nu || weights.R.cols() != nu || weights.R_delta.rows() != nu ||
        weights.R_delta.cols() != nu)
        throw ContractViolation("build_qp: R and R_delta must be l m square");
    if (weights.S.rows() != ns || weights.S.cols() != ns)
        throw ContractViolation("build_qp: S must be l n_c square");
    if (n_c > 0 && (maps.C_c.cols() != p || maps.Ccal.cols() != maps.C_c.rows() || maps.Dcal.size() != n_c))
        throw ContractViolation("build_qp: constraint maps have inconsistent dimensions");
    if (u_prev.size() != m)
        throw ContractViolation("build_qp: u_prev has wrong dimension");
    if (r_future.size() != ell * p_t)
        throw ContractViolation("build_qp: r_future must hold l blocks of p_t");

    const MatrixXd Ct_l = block_diagonal(maps.C_t, ell);
    const MatrixXd CtT = Ct_l * ops.T;
    const VectorXd track_offset = Ct_l * ops.Gamma - r_future;
    const MatrixXd E = first_difference(ell, m);
    VectorXd e0 = VectorXd::Zero(nu);
    e0.head(m) = u_prev;

    QpProblem qp;
    qp.n_u = nu;
    qp.n_slack = ns;
    const Index n = nu + ns;

    MatrixXd Huu = CtT.transpose() * weights.Q * CtT + weights.R + E.transpose() * weights.R_delta * E;
    VectorXd fu = CtT.transpose() * weights.Q * track_offset - E.transpose() * weights.R_delta * e0;
    if (!weights.Q_i.isZero(0.0)) {
        const AffineMap I = build_integrated_error(ops, maps.C_t, i_state, y_t_now, r_future);
        Huu += I.M.transpose() * weights.Q_i * I.M;
        fu += I.M.transpose() * weights.Q_i * I.c;
    }

    qp.H = MatrixXd::Zero(n, n);
    qp.H.topLeftCorner(nu, nu) = 2.0 * Huu;
    if (ns > 0)
        qp.H.bottomRightCorner(ns, ns) = 2.0 * weights.S;
    qp.H = 0.5 * (qp.H + qp.H.transpose());
    qp.H.diagonal().array() += hessian_regularization;
    qp.f = VectorXd::Zero(n);
    qp.f.head(nu) = 2.0 * fu;

    // Inequality rows: output constraints, then increment bounds (upper, lower).
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    if (n_c > 0) {
        const MatrixXd Cc_l = block_diagonal(maps.Ccal * maps.C_c, ell);
        const MatrixXd CT = Cc_l * ops.T;
        const VectorXd off = Cc_l * ops.Gamma + maps.Dcal.replicate(ell, 1);
        for (Index i = 0; i < ns; ++i) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            row.head(nu) = CT.row(i);
            row(nu + i) = -1.0;
            rows.push_back(row);
            rhs.push_back(-off(i));
        }
    }
    for (Index i = 0; i < nu; ++i) {
        const double hi = bounds.du_max(i % m);
        if (std::isfinite(hi)) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            row.head(nu) = E.row(i);
            rows.push_back(row);
            rhs.push_back(hi + e0(i));
        }
    }
    for (Index i = 0; i < nu; ++i) {
        const double lo = bounds.du_min(i % m);
        if (std::isfinite(lo)) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            row.head(nu) = -E.row(i);
            rows.push_back(row);
            rhs.push_back(-lo - e0(i));
        }
    }
    qp.A_ineq = MatrixXd::Zero(Index(rows.size()), n);
    qp.b_ineq = VectorXd::Zero(Index(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        qp.A_ineq.row(Index(i)) = rows[i];
        qp.b_ineq(Index(i)) = rhs[i];
    }

    qp.lb = VectorXd::Zero(n);
    qp.ub = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    qp.lb.head(nu) = bounds.u_min.replicate(ell, 1);
    qp.ub.head(nu) = bounds.u_max.replicate(ell, 1);
    return qp;
}

/// Sets each slack to the smallest value its output rows allow at the current U,
/// so a warm start only has to satisfy the input constraints.
inline void fit_slack(const QpProblem& qp, VectorXd& x) {
    if (x.size() != qp.size())
        throw ContractViolation("fit_slack: decision vector has wrong length");
    for (Index i = 0; i < qp.n_slack; ++i) {
        const double need = qp.A_ineq.row(i).head(qp.n_u).dot(x.head(qp.n_u)) - qp.b_ineq(i);
        x(qp.n_u + i) = std::max(0.0, need);
    }
}

/// u_{k|1}: the first m entries of the decision vector.
inline VectorXd extract_control(const VectorXd& solution, Index m) {
    if (m < 1 || solution.size() < m)
        throw ContractViolation("extract_control: solution shorter than one input block");
    return solution.head(m);
}

} // namespace ecgpcac
