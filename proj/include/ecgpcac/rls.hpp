#pragma once

/**
 * @file rls.hpp
 * @brief Online ARX identification by recursive least squares.
 *
 * The model is
 *
 *     y_hat_k = -sum_{i=1..n} F_i y_{k-i} + sum_{i=0..n} G_i u_{k-i} = theta * phi_k,
 *
 * with theta = [-F_1 ... -F_n  G_0 ... G_n] (p x [n(p+m)+m]) and
 * phi_k = [y_{k-1}; ...; y_{k-n}; u_k; ...; u_{k-n}]. Two update forms are
 * provided: covariance-form RLS and exponential-resetting RLS, which runs in
 * information form and pulls the information matrix toward a fixed R_inf when
 * the data carry no excitation. The forgetting factor is chosen each step by an
 * F-test on the variance of recent residuals.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string_view>

#include <Eigen/Dense>

#include "ecgpcac/errors.hpp"
#include "ecgpcac/fdist.hpp"

namespace ecgpcac {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Identified input-output model; owns the packed coefficient matrix.
struct ArxModel {
    int n_hat = 0;
    int p = 1;
    int m = 1;
    MatrixXd theta;

    static ArxModel zeros(int n_hat, int p, int m) {
        if (n_hat < 0 || p < 1 || m < 1)
            throw ContractViolation("ArxModel: need n_hat >= 0, p >= 1, m >= 1");
        ArxModel model;
        model.n_hat = n_hat;
        model.p = p;
        model.m = m;
        model.theta = MatrixXd::Zero(p, regressor_size(n_hat, p, m));
        return model;
    }

    static Index regressor_size(int n_hat, int p, int m) { return Index(n_hat) * (p + m) + m; }
    Index regressor_size() const { return regressor_size(n_hat, p, m); }

    /// F_i for i in [1, n_hat].
    MatrixXd F(int i) const {
        check_lag(i, 1);
        return -theta.block(0, Index(i - 1) * p, p, p);
    }
    /// G_i for i in [0, n_hat].
    MatrixXd G(int i) const {
        check_lag(i, 0);
        return theta.block(0, Index(n_hat) * p + Index(i) * m, p, m);
    }
    void set_F(int i, const MatrixXd& Fi) {
        check_lag(i, 1);
        theta.block(0, Index(i - 1) * p, p, p) = -Fi;
    }
    void set_G(int i, const MatrixXd& Gi) {
        check_lag(i, 0);
        theta.block(0, Index(n_hat) * p + Index(i) * m, p, m) = Gi;
    }

    void validate() const {
        if (theta.rows() != p || theta.cols() != regressor_size())
            throw ContractViolation("ArxModel: theta must be p x [n_hat(p+m)+m]");
    }

private:
    void check_lag(int i, int lowest) const {
        if (i < lowest || i > n_hat)
            throw ContractViolation("ArxModel: coefficient lag out of range");
    }
};

inline VectorXd predict(const ArxModel& model, const VectorXd& phi) {
    if (phi.size() != model.theta.cols())
        throw ContractViolation("predict: regressor length does not match theta");
    return model.theta * phi;
}

/// Past outputs and inputs needed to form phi_k. Starts from the zero history.
class Regressor {
public:
    Regressor() = default;
    Regressor(int n_hat, int p, int m) : n_hat_(n_hat), p_(p), m_(m) {
        for (int i = 0; i < n_hat; ++i) {
            y_.push_back(VectorXd::Zero(p));
            u_.push_back(VectorXd::Zero(m));
        }
    }

    /// phi_k = [y_{k-1} .. y_{k-n}, u_k, u_{k-1} .. u_{k-n}] given the current input u_k.
    VectorXd phi(const VectorXd& u_now) const {
        if (u_now.size() != m_)
            throw ContractViolation("Regressor: input has wrong dimension");
        VectorXd out(ArxModel::regressor_size(n_hat_, p_, m_));
        Index pos = 0;
        for (const auto& y : y_) {
            out.segment(pos, p_) = y;
            pos += p_;
        }
        out.segment(pos, m_) = u_now;
        pos += m_;
        for (const auto& u : u_) {
            out.segment(pos, m_) = u;
            pos += m_;
        }
        return out;
    }

    /// Records (y_k, u_k) so the next phi sees them as the most recent lag.
    void push(const VectorXd& y_now, const VectorXd& u_now) {
        if (y_now.size() != p_ || u_now.size() != m_)
            throw ContractViolation("Regressor: sample has wrong dimension");
        if (n_hat_ == 0)
            return;
        y_.push_front(y_now);
        y_.pop_back();
        u_.push_front(u_now);
        u_.pop_back();
    }

    /// Stacked history [y_{k-n+1}; ...; y_k; u_{k-n+1}; ...; u_k] (oldest first)
    /// after the step-k sample has been pushed.
    VectorXd history() const {
        VectorXd d(Index(n_hat_) * (p_ + m_));
        Index pos = 0;
        for (auto it = y_.rbegin(); it != y_.rend(); ++it) {
            d.segment(pos, p_) = *it;
            pos += p_;
        }
        for (auto it = u_.rbegin(); it != u_.rend(); ++it) {
            d.segment(pos, m_) = *it;
            pos += m_;
        }
        return d;
    }

    int n_hat() const { return n_hat_; }

private:
    int n_hat_ = 0;
    int p_ = 1;
    int m_ = 1;
    std::deque<VectorXd> y_; // newest first
    std::deque<VectorXd> u_; // newest first
};

// ---------------------------------------------------------------------------
// Variable-rate forgetting

struct VrfParams {
    double eta = 0.1;
    int tau_n = 10;
    int tau_d = 60;
    double alpha_sig = 0.01;

    void validate(int p) const {
        if (!(eta >= 0.0))
            throw ContractViolation("VrfParams: eta must be non-negative");
        if (tau_n < p || tau_n >= tau_d)
            throw ContractViolation("VrfParams: need p <= tau_n < tau_d");
        if (tau_d <= p + 3)
            throw ContractViolation("VrfParams: need tau_d > p + 3");
        if (!(alpha_sig > 0.0 && alpha_sig < 1.0))
            throw ContractViolation("VrfParams: alpha_sig must lie in (0, 1)");
    }
};

/// Window-length constants of the F-test statistic.
struct VrfConstants {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double quantile = 0.0; ///< F_{p tau_n, b}(1 - alpha_sig)

    static VrfConstants make(const VrfParams& prm, int p) {
        prm.validate(p);
        const double tn = prm.tau_n;
        const double td = prm.tau_d;
        const double pd = p;
        VrfConstants k;
        k.a = (tn + td - pd - 1.0) * (td - 1.0) / ((td - pd - 3.0) * (td - pd));
        k.b = 4.0 + (pd * tn + 2.0) / (k.a - 1.0);
        k.c = pd * tn * (k.b - 2.0) / (k.b * (td - pd - 1.0));
        k.quantile = stats::f_quantile(pd * tn, k.b, 1.0 - prm.alpha_sig);
        return k;
    }
};

struct VrfResult {
    double lambda = 1.0;
    double statistic = 0.0; ///< g; lambda < 1 exactly when g > 0 and eta > 0
    bool degenerate = false; ///< denominator covariance was singular
};

namespace detail {

inline MatrixXd window_covariance(const std::deque<VectorXd>& window, std::size_t count) {
    const Index p = window.back().size();
    const auto first = window.end() - static_cast<std::ptrdiff_t>(count);
    VectorXd mean = VectorXd::Zero(p);
    for (auto it = first; it != window.end(); ++it)
        mean += *it;
    mean /= double(count);
    MatrixXd cov = MatrixXd::Zero(p, p);
    for (auto it = first; it != window.end(); ++it) {
        const VectorXd d = *it - mean;
        cov.noalias() += d * d.transpose();
    }
    return cov / double(count - 1);
}

} // namespace detail

/// F-test forgetting factor from a window of residuals ordered oldest first.
/// Returns lambda = 1 until tau_d residuals are available.
inline VrfResult vrf_lambda(const std::deque<VectorXd>& window, const VrfParams& prm, const VrfConstants& k) {
    VrfResult out;
    if (window.size() < static_cast<std::size_t>(prm.tau_d))
        return out;
    const MatrixXd sig_n = detail::window_covariance(window, std::size_t(prm.tau_n));
    const MatrixXd sig_d = detail::window_covariance(window, std::size_t(prm.tau_d));

    Eigen::LDLT<MatrixXd> ldlt(sig_d);
    const double scale = std::max(sig_d.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()
        || ldlt.vectorD().minCoeff() <= 1e-14 * scale || sig_d.diagonal().maxCoeff() <= 0.0) {
        out.degenerate = true;
        return out;
    }
    const double trace = ldlt.solve(sig_n).trace();
    const double ratio = (double(prm.tau_n) / double(prm.tau_d)) * trace / k.c;
    out.statistic = std::sqrt(std::max(ratio, 0.0)) - std::sqrt(k.quantile);
    if (out.statistic > 0.0)
        out.lambda = 1.0 / (1.0 + prm.eta * out.statistic);
    return out;
}

inline VrfResult vrf_lambda(const std::deque<VectorXd>& window, const VrfParams& prm, int p) {
    return vrf_lambda(window, prm, VrfConstants::make(prm, p));
}

// ---------------------------------------------------------------------------
// Estimator state and updates

enum class IdVariant { plain, exponential_resetting };

inline std::string_view to_string(IdVariant v) {
    return v == IdVariant::plain ? "plain" : "er";
}

struct RlsState {
    ArxModel model;
    IdVariant variant = IdVariant::exponential_resetting;
    MatrixXd P;      ///< covariance (plain variant)
    MatrixXd R_info; ///< information matrix (resetting variant)
    MatrixXd R_inf;  ///< reset target for R_info
    double lambda = 1.0;
    VrfParams vrf;
    VrfConstants vrf_constants;
    std::deque<VectorXd> residual_window; ///< oldest first, at most tau_d entries
    Regressor regressor;
    bool last_vrf_degenerate = false;

    /// P_0 = p0_bar I and, for the resetting variant, R_inf = R_0 = P_0^{-1}.
    static RlsState create(int n_hat, int p, int m, double p0_bar,
                           IdVariant variant = IdVariant::exponential_resetting,
                           const VrfParams& vrf = {}) {
        if (!(p0_bar > 0.0))
            throw ContractViolation("RlsState: p0_bar must be positive");
        RlsState s;
        s.model = ArxModel::zeros(n_hat, p, m);
        s.variant = variant;
        const Index n = s.model.regressor_size();
        s.P = MatrixXd::Identity(n, n) * p0_bar;
        s.R_info = MatrixXd::Identity(n, n) / p0_bar;
        s.R_inf = s.R_info;
        s.vrf = vrf;
        s.vrf_constants = VrfConstants::make(vrf, p);
        s.regressor = Regressor(n_hat, p, m);
        return s;
    }

    /// Covariance in either variant (inverts the information matrix on demand).
    MatrixXd covariance() const {
        if (variant == IdVariant::plain)
            return P;
        return R_info.llt().solve(MatrixXd::Identity(R_info.rows(), R_info.cols()));
    }
};

/// Covariance-form RLS step with the forgetting factor already stored in `state.lambda`.
inline void rls_update(RlsState& state, const VectorXd& y, const VectorXd& phi) {
    const auto& theta = state.model.theta;
    if (phi.size() != theta.cols() || y.size() != theta.rows())
        throw ContractViolation("rls_update: dimension mismatch");
    const MatrixXd L = state.P / state.lambda;
    const VectorXd Lphi = L * phi;
    const double denom = 1.0 + phi.dot(Lphi);
    if (!(denom > 0.0))
        throw NumericalError("rls_update: 1 + phi' L phi is not positive");
    MatrixXd P_next = L - (Lphi * Lphi.transpose()) / denom;
    P_next = 0.5 * (P_next + P_next.transpose());
    const VectorXd z = y - theta * phi;
    state.model.theta += z * (P_next * phi).transpose();
    state.P = std::move(P_next);
}

/// Exponential-resetting step in information form:
/// R+ = lambda R + (1 - lambda) R_inf + phi phi',  theta+ = theta + z phi' (R+)^{-1}.
inline void er_rls_update(RlsState& state, const VectorXd& y, const VectorXd& phi) {
    const auto& theta = state.model.theta;
    if (phi.size() != theta.cols() || y.size() != theta.rows())
        throw ContractViolation("er_rls_update: dimension mismatch");
    const double lam = state.lambda;
    MatrixXd R_next = lam * state.R_info + (1.0 - lam) * state.R_inf;
    R_next.noalias() += phi * phi.transpose();
    R_next = 0.5 * (R_next + R_next.transpose());
    VectorXd gain;
    Eigen::LLT<MatrixXd> llt(R_next);
    if (llt.info() == Eigen::Success) {
        gain = llt.solve(phi);
    } else {
        // Large, nearly collinear regressors can swamp R_inf in rounding.
        gain = R_next.ldlt().solve(phi);
        if (!gain.allFinite())
            throw NumericalError("er_rls_update: information matrix is numerically singular");
    }
    const VectorXd z = y - theta * phi;
    state.model.theta += z * gain.transpose();
    state.R_info = std::move(R_next);
}

/// Consumes the step-k sample: forms phi_k, records the residual, picks lambda_k
/// from the residual window, updates theta, then shifts (y_k, u_k) into the history.
/// Returns the pre-update residual z_k = y_k - theta_k phi_k.
inline VectorXd ingest(RlsState& state, const VectorXd& y, const VectorXd& u) {
    const VectorXd phi = state.regressor.phi(u);
    const VectorXd z = y - state.model.theta * phi;

    state.residual_window.push_back(z);
    while (state.residual_window.size() > static_cast<std::size_t>(state.vrf.tau_d))
        state.residual_window.pop_front();
    const VrfResult vrf = vrf_lambda(state.residual_window, state.vrf, state.vrf_constants);
    state.lambda = vrf.lambda;
    state.last_vrf_degenerate = vrf.degenerate;

    if (state.variant == IdVariant::plain)
        rls_update(state, y, phi);
    else
        er_rls_update(state, y, phi);
    state.regressor.push(y, u);
    return z;
}

} // namespace ecgpcac
