#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here shares code with the library beyond the Eigen types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double normal(std::mt19937_64& g, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(g); }

inline MatrixXd random_matrix(std::mt19937_64& g, Index r, Index c, double scale = 1.0) {
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j)
            m(i, j) = uniform(g, -scale, scale);
    return m;
}

inline VectorXd random_vector(std::mt19937_64& g, Index n, double scale = 1.0) {
    return random_matrix(g, n, 1, scale);
}

/// Symmetric positive definite with eigenvalues in roughly [shift, shift + n scale^2].
inline MatrixXd random_spd(std::mt19937_64& g, Index n, double shift = 0.5, double scale = 1.0) {
    const MatrixXd a = random_matrix(g, n, n, scale);
    return a * a.transpose() + shift * MatrixXd::Identity(n, n);
}

// ---------------------------------------------------------------------------
// Classical RK4 over one sample interval with u and w held.

inline VectorXd rk4_hold(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Bw, const VectorXd& x0,
                         const VectorXd& u, double w, double T, int substeps) {
    const VectorXd drive = B * u + Bw * VectorXd::Constant(1, w);
    auto f = [&](const VectorXd& x) -> VectorXd { return A * x + drive; };
    const double h = T / substeps;
    VectorXd x = x0;
    for (int i = 0; i < substeps; ++i) {
        const VectorXd k1 = f(x);
        const VectorXd k2 = f(x + 0.5 * h * k1);
        const VectorXd k3 = f(x + 0.5 * h * k2);
        const VectorXd k4 = f(x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

/// RK4 with step halving until two successive answers agree to `rel_tol`.
inline VectorXd rk4_adaptive(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Bw, const VectorXd& x0,
                             const VectorXd& u, double w, double T, double rel_tol = 1e-13) {
    int n = 16;
    VectorXd prev = rk4_hold(A, B, Bw, x0, u, w, T, n);
    for (int it = 0; it < 12; ++it) {
        n *= 2;
        const VectorXd next = rk4_hold(A, B, Bw, x0, u, w, T, n);
        if ((next - prev).norm() <= rel_tol * std::max(1.0, next.norm()))
            return next;
        prev = next;
    }
    return prev;
}

// ---------------------------------------------------------------------------
// Regularized batch least squares:
//   min_theta  sum_i |y_i - theta phi_i|^2 + (theta - theta0) P0^{-1} (theta - theta0)'

inline MatrixXd batch_ls(const std::vector<VectorXd>& ys, const std::vector<VectorXd>& phis, const MatrixXd& theta0,
                         double p0_bar) {
    const Index n = theta0.cols();
    MatrixXd normal = MatrixXd::Identity(n, n) / p0_bar;
    MatrixXd rhs = theta0 / p0_bar;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        normal += phis[i] * phis[i].transpose();
        rhs += ys[i] * phis[i].transpose();
    }
    // theta normal = rhs  <=>  normal' theta' = rhs'
    return normal.ldlt().solve(rhs.transpose()).transpose();
}

// ---------------------------------------------------------------------------
// ARX recursion rollout. F[j] (j = 1..n) and G[j] (j = 0..n) are p x p and p x m.
// y_past[j] = y_{k-j}, u_past[j] = u_{k-j} for j = 0..n-1. U holds u_{k+1..k+ell}.

inline VectorXd arx_rollout(const std::vector<MatrixXd>& F, const std::vector<MatrixXd>& G,
                            const std::vector<VectorXd>& y_past, const std::vector<VectorXd>& u_past,
                            const VectorXd& U, int ell) {
    const int n = int(G.size()) - 1;
    const Index p = G[0].rows();
    const Index m = G[0].cols();
    // Timeline index t: 0 is step k; negative indices are the past.
    auto y_at = std::vector<VectorXd>(std::size_t(n + ell + 1), VectorXd::Zero(p));
    auto u_at = std::vector<VectorXd>(std::size_t(n + ell + 1), VectorXd::Zero(m));
    const int off = n; // storage index = t + off
    for (int j = 0; j < n; ++j) {
        y_at[std::size_t(off - j)] = y_past[std::size_t(j)];
        u_at[std::size_t(off - j)] = u_past[std::size_t(j)];
    }
    for (int i = 1; i <= ell; ++i)
        u_at[std::size_t(off + i)] = U.segment(Index(i - 1) * m, m);
    VectorXd Y(Index(ell) * p);
    for (int i = 1; i <= ell; ++i) {
        VectorXd y = VectorXd::Zero(p);
        for (int j = 1; j <= n; ++j)
            y -= F[std::size_t(j)] * y_at[std::size_t(off + i - j)];
        for (int j = 0; j <= n; ++j)
            y += G[std::size_t(j)] * u_at[std::size_t(off + i - j)];
        y_at[std::size_t(off + i)] = y;
        Y.segment(Index(i - 1) * p, p) = y;
    }
    return Y;
}

// ---------------------------------------------------------------------------
// Strictly convex QP by enumeration of active sets:
//   min 1/2 x'Hx + f'x  s.t.  Gx <= h
// For every subset W with independent rows, solve the equality-constrained
// KKT system, keep primal-feasible points with nonnegative multipliers.

struct EnumResult {
    VectorXd x;
    double objective = std::numeric_limits<double>::infinity();
    bool feasible = false;
};

inline EnumResult qp_enumerate(const MatrixXd& H, const VectorXd& f, const MatrixXd& G, const VectorXd& h,
                               double tol = 1e-9) {
    const Index n = H.rows();
    const Index nc = G.rows();
    EnumResult best;
    for (std::uint32_t mask = 0; mask < (1u << nc); ++mask) {
        std::vector<Index> W;
        for (Index i = 0; i < nc; ++i)
            if (mask & (1u << i))
                W.push_back(i);
        if (Index(W.size()) > n)
            continue;
        const Index w = Index(W.size());
        MatrixXd K = MatrixXd::Zero(n + w, n + w);
        VectorXd rhs = VectorXd::Zero(n + w);
        K.topLeftCorner(n, n) = H;
        rhs.head(n) = -f;
        for (Index a = 0; a < w; ++a) {
            K.block(0, n + a, n, 1) = G.row(W[std::size_t(a)]).transpose();
            K.block(n + a, 0, 1, n) = G.row(W[std::size_t(a)]);
            rhs(n + a) = h(W[std::size_t(a)]);
        }
        Eigen::FullPivLU<MatrixXd> lu(K);
        if (!lu.isInvertible())
            continue;
        const VectorXd sol = lu.solve(rhs);
        const VectorXd x = sol.head(n);
        const VectorXd mu = sol.tail(w);
        if (nc > 0 && (G * x - h).maxCoeff() > tol)
            continue;
        if (w > 0 && mu.minCoeff() < -tol)
            continue;
        const double obj = 0.5 * x.dot(H * x) + f.dot(x);
        if (obj < best.objective) {
            best.objective = obj;
            best.x = x;
            best.feasible = true;
        }
    }
    return best;
}

} // namespace oracle
