#pragma once

/**
 * @file scenario.hpp
 * @brief Closed-loop ECG + PCAC simulation of a sampled-data SISO plant.
 *
 * Per step k: sample y_k and J_k, identify with the applied u_k, generate r_k,
 * solve the MPC problem for u_{k+1}, then hold u_k over the next interval.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ecgpcac/ecg.hpp"
#include "ecgpcac/errors.hpp"
#include "ecgpcac/mpc.hpp"
#include "ecgpcac/plant.hpp"
#include "ecgpcac/qp.hpp"
#include "ecgpcac/rls.hpp"

namespace ecgpcac {

struct PcacConfig {
    int n_hat = 2;
    int ell = 30;
    double p0_bar = 1e6;
    IdVariant id_variant = IdVariant::exponential_resetting;
    VrfParams vrf;

    // Diagonal weights: Q = q I, Q_i = q_i I, R = r I, R_delta = r_delta I, S = s I.
    double q = 1.0;
    double q_i = 0.0;
    double r = 0.0;
    double r_delta = 1e-2;
    double s = 1e3;

    double u_min = -10.0;
    double u_max = 10.0;
    double du_min = -std::numeric_limits<double>::infinity();
    double du_max = std::numeric_limits<double>::infinity();
    /// Soft output constraint |y| <= y_max (slack-penalized). Infinite disables it.
    double y_max = std::numeric_limits<double>::infinity();

    /// Initial estimate of the one-step input coefficient G_1. With an all-zero
    /// estimate the predicted response to U is zero and the loop never moves.
    double theta0_g1 = 0.01;
    /// Steps during which the control is held at zero; negative selects n_hat + 1.
    int warmup = -1;

    int warmup_steps() const { return warmup >= 0 ? warmup : n_hat + 1; }

    void validate() const {
        if (n_hat < 1)
            throw ContractViolation("pcac: n_hat must be at least 1");
        if (ell < 1)
            throw ContractViolation("pcac: ell must be at least 1");
        if (!(p0_bar > 0.0))
            throw ContractViolation("pcac: p0_bar must be positive");
        vrf.validate(1);
        if (!(q > 0.0) || !(q_i >= 0.0) || !(r >= 0.0) || !(r_delta >= 0.0) || !(s >= 0.0))
            throw ContractViolation("pcac: need q > 0 and q_i, r, r_delta, s >= 0");
        if (!(u_min <= u_max) || !(u_min <= 0.0 && 0.0 <= u_max))
            throw ContractViolation("pcac: need u_min <= 0 <= u_max");
        if (!(du_min <= 0.0 && 0.0 <= du_max))
            throw ContractViolation("pcac: need du_min <= 0 <= du_max");
        if (!(y_max > 0.0))
            throw ContractViolation("pcac: y_max must be positive");
        if (!std::isfinite(theta0_g1))
            throw ContractViolation("pcac: theta0_g1 must be finite");
    }
};

struct ScenarioConfig {
    std::string name = "undamped_oscillator";
    std::string plant_preset = "undamped_oscillator";
    LtiPlant plant = undamped_oscillator();
    double T_s = 0.01;
    long long n_steps = 40000;
    double w = 0.0; ///< constant disturbance
    std::uint64_t seed = 0; ///< reserved; the loop is deterministic
    /// |y| beyond this bound aborts the run as diverged.
    double divergence_bound = 1e8;
    bool log_theta = false;

    EcgParams ecg;
    ModulationScheme modulation;
    GainLaw gain;
    PcacConfig pcac;
    CostMap cost;

    void validate() const {
        plant.validate();
        if (plant.input_dim() != 1 || plant.output_dim() != 1)
            throw ContractViolation("scenario: the closed loop drives single-input single-output plants");
        if (!(T_s > 0.0) || !std::isfinite(T_s))
            throw ContractViolation("scenario: T_s must be positive");
        if (n_steps < 1)
            throw ContractViolation("scenario: n_steps must be at least 1");
        if (!std::isfinite(w))
            throw ContractViolation("scenario: w must be finite");
        if (!(divergence_bound > 0.0))
            throw ContractViolation("scenario: divergence_bound must be positive");
        if (!std::isfinite(cost.r_star))
            throw ContractViolation("scenario: r_star must be finite");
        EcgParams e = ecg;
        e.T_s = T_s;
        e.validate();
        modulation.validate();
        gain.validate();
        pcac.validate();
    }
};

// ---------------------------------------------------------------------------
// Presets

inline ScenarioConfig common_preset() {
    ScenarioConfig cfg;
    cfg.T_s = 0.01;
    cfg.n_steps = 40000;
    cfg.ecg.a_es = 0.1;
    cfg.ecg.omega_es = 1.0;
    cfg.ecg.omega_h = 0.1;
    cfg.ecg.omega_l = 1.0;
    cfg.ecg.b_es = 0.25;
    cfg.ecg.K_es = 0.1;
    cfg.ecg.T_s = cfg.T_s;
    cfg.pcac = PcacConfig{};
    cfg.modulation.k_switch = 2.1e4;
    return cfg;
}

/// Undamped oscillator, J = -|r - 2|, threshold dither decay.
inline ScenarioConfig preset_undamped_oscillator() {
    ScenarioConfig cfg = common_preset();
    cfg.name = cfg.plant_preset = "undamped_oscillator";
    cfg.plant = undamped_oscillator();
    cfg.cost = {CostKind::abs_linear, 2.0, CostSignal::command};
    cfg.modulation.kind = ModulationKind::threshold_decay;
    cfg.modulation.a_min = 5e-5;
    cfg.modulation.beta = 0.02;
    cfg.modulation.alpha = 0.999;
    return cfg;
}

/// Double integrator with constant disturbance w = 0.1, J = -sqrt|r + 2|.
inline ScenarioConfig preset_double_integrator() {
    ScenarioConfig cfg = common_preset();
    cfg.name = cfg.plant_preset = "double_integrator";
    cfg.plant = double_integrator();
    cfg.w = 0.1;
    cfg.cost = {CostKind::sqrt_abs, -2.0, CostSignal::command};
    cfg.modulation.kind = ModulationKind::threshold_decay;
    cfg.modulation.a_min = 5e-4;
    cfg.modulation.beta = 0.05;
    cfg.modulation.alpha = 0.995;
    return cfg;
}

/// Exponentially unstable plant, Gaussian cost peaked at 4, normalized gain and
/// smooth attenuation of both dither and gain.
inline ScenarioConfig preset_exp_unstable() {
    ScenarioConfig cfg = common_preset();
    cfg.name = cfg.plant_preset = "exp_unstable";
    cfg.plant = exponentially_unstable();
    cfg.cost = {CostKind::gaussian, 4.0, CostSignal::command};
    cfg.pcac.u_min = -20.0;
    cfg.pcac.u_max = 20.0;
    cfg.ecg.K_es = 0.05;
    cfg.gain.kind = GainKind::normalized;
    cfg.gain.eps_norm = 1e-6;
    cfg.modulation.kind = ModulationKind::smooth_attenuation;
    cfg.modulation.a_min = 1e-3;
    cfg.modulation.K_min = 1e-3;
    cfg.modulation.gamma_a = 5e-2;
    cfg.modulation.gamma_K = 5e-2;
    cfg.modulation.y_l_ref = 0.1;
    return cfg;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"undamped_oscillator", "double_integrator", "exp_unstable"};
    return names;
}

inline std::optional<ScenarioConfig> find_preset(std::string_view name) {
    if (name == "undamped_oscillator")
        return preset_undamped_oscillator();
    if (name == "double_integrator")
        return preset_double_integrator();
    if (name == "exp_unstable")
        return preset_exp_unstable();
    return std::nullopt;
}

inline std::optional<LtiPlant> find_plant(std::string_view name) {
    if (name == "undamped_oscillator")
        return undamped_oscillator();
    if (name == "double_integrator")
        return double_integrator();
    if (name == "exp_unstable")
        return exponentially_unstable();
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Log

struct LogRow {
    long long k = 0;
    double t = 0.0;
    double u = 0.0;
    double y = 0.0;
    double r = 0.0;
    double J = 0.0;
    double e = 0.0;
    double y_h = 0.0;
    double y_d = 0.0;
    double y_l = 0.0;
    double y_es = 0.0;
    double a_es = 0.0;
    double K_es = 0.0;
    double lambda = 1.0;
    std::vector<double> theta;
};

struct SummaryMetrics {
    double final_command_error = 0.0;
    double rms_tracking_error_tail = 0.0;
    long long convergence_step = -1; ///< -1 when the band is never reached
};

struct QpStats {
    long long solves = 0;
    long long non_optimal = 0;
    long long infeasible = 0;
    long long iterations = 0;
};

struct SimLog {
    std::vector<LogRow> rows;
    SummaryMetrics summary;
    QpStats qp;
    bool diverged = false;
    long long divergence_step = -1;
    std::string message;
    double r_star = 0.0;
    std::size_t theta_size = 0; ///< number of theta columns per row (0 when not logged)
};

inline SummaryMetrics compute_summary(const std::vector<LogRow>& rows, double r_star) {
    SummaryMetrics m;
    if (rows.empty())
        return m;
    m.final_command_error = std::abs(rows.back().r - r_star);
    const std::size_t n = rows.size();
    const std::size_t tail = std::max<std::size_t>(1, n / 10);
    double sq = 0.0;
    for (std::size_t i = n - tail; i < n; ++i)
        sq += rows[i].e * rows[i].e;
    m.rms_tracking_error_tail = std::sqrt(sq / double(tail));
    const double band = 0.05 * std::abs(r_star) + 0.05;
    for (const auto& row : rows)
        if (std::abs(row.r - r_star) <= band) {
            m.convergence_step = row.k;
            break;
        }
    return m;
}

// ---------------------------------------------------------------------------
// Controller

/// Identification plus receding-horizon optimization with warm starts.
class PcacController {
public:
    explicit PcacController(const PcacConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        rls_ = RlsState::create(cfg_.n_hat, 1, 1, cfg_.p0_bar, cfg_.id_variant, cfg_.vrf);
        rls_.model.set_G(1, MatrixXd::Constant(1, 1, cfg_.theta0_g1));
        weights_ = HorizonWeights::diagonal(cfg_.ell, 1, 1, n_c(), cfg_.q, cfg_.q_i, cfg_.r, cfg_.r_delta, cfg_.s);
        maps_ = OutputMaps::tracking_only(1);
        if (n_c() > 0) {
            maps_.C_c = MatrixXd::Identity(1, 1);
            maps_.Ccal = MatrixXd{{1.0}, {-1.0}};
            maps_.Dcal = VectorXd::Constant(2, -cfg_.y_max);
        }
        bounds_.u_min = VectorXd::Constant(1, cfg_.u_min);
        bounds_.u_max = VectorXd::Constant(1, cfg_.u_max);
        bounds_.du_min = VectorXd::Constant(1, cfg_.du_min);
        bounds_.du_max = VectorXd::Constant(1, cfg_.du_max);
        integrator_ = IntegratorState::zeros(1);
    }

    /// Identification step with the sample (y_k, u_k).
    void observe(const VectorXd& y, const VectorXd& u) { ingest(rls_, y, u); }

    /// Computes u_{k+1} given r_k. `step` is k; the output is zero during warm-up.
    VectorXd control(long long step, const VectorXd& y, const VectorXd& u_applied, const VectorXd& r) {
        integrator_.update(y, r);
        if (step < cfg_.warmup_steps())
            return VectorXd::Zero(1);

        const PredictionOperators ops = build_prediction(rls_.model, rls_.regressor.history(), cfg_.ell);
        const QpProblem prob = build_qp(ops, weights_, maps_, bounds_, u_applied, hold_command(r, cfg_.ell),
                                        integrator_, y);
        QpSpec spec = prob.to_spec();
        if (warm_ && warm_->size() == prob.size())
            spec.x0 = warm_start_shift(*warm_, 1, cfg_.ell);
        else
            spec.x0 = hold_guess(prob, u_applied);
        fit_slack(prob, *spec.x0);
        const QpSolution sol = solve(spec);
        ++stats_.solves;
        stats_.iterations += sol.iterations;
        if (sol.status == QpStatus::infeasible) {
            ++stats_.infeasible;
            ++stats_.non_optimal;
            warm_.reset();
            return u_applied;
        }
        if (sol.status != QpStatus::optimal)
            ++stats_.non_optimal;
        warm_ = sol.x;
        return extract_control(sol.x, 1);
    }

    const RlsState& rls() const { return rls_; }
    const QpStats& stats() const { return stats_; }

private:
    Index n_c() const { return std::isfinite(cfg_.y_max) ? 2 : 0; }

    static VectorXd hold_guess(const QpProblem& prob, const VectorXd& u_applied) {
        VectorXd x0 = VectorXd::Zero(prob.size());
        x0.head(prob.n_u) = u_applied.replicate(prob.n_u / u_applied.size(), 1);
        return x0;
    }

    PcacConfig cfg_;
    RlsState rls_;
    HorizonWeights weights_;
    OutputMaps maps_;
    ControlBounds bounds_;
    IntegratorState integrator_;
    std::optional<VectorXd> warm_;
    QpStats stats_;
};

/// Runs the closed loop. Divergence returns the partial log with `diverged` set.
inline SimLog run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    LtiPlant plant = cfg.plant;
    const ZohDiscretization disc = discretize_zoh(plant, cfg.T_s);

    EcgParams ecg_prm = cfg.ecg;
    ecg_prm.T_s = cfg.T_s;
    EcgState ecg = EcgState::initial(ecg_prm);
    PcacController pcac(cfg.pcac);

    SimLog log;
    log.r_star = cfg.cost.r_star;
    log.rows.reserve(std::size_t(cfg.n_steps));
    if (cfg.log_theta)
        log.theta_size = std::size_t(pcac.rls().model.theta.size());

    VectorXd u = VectorXd::Zero(1);
    double r_prev = 0.0;
    for (long long k = 0; k < cfg.n_steps; ++k) {
        const VectorXd y = plant.output();
        const double J = measure_cost(cfg.cost, r_prev, y(0));

        pcac.observe(y, u);

        const double a_used = ecg.a_cur;
        const double r = ecg_step(ecg, ecg_prm, cfg.gain, J);
        modulate_amplitude(ecg, cfg.modulation, cfg.gain);

        const VectorXd u_next = pcac.control(k, y, u, VectorXd::Constant(1, r));

        LogRow row;
        row.k = k;
        row.t = double(k) * cfg.T_s;
        row.u = u(0);
        row.y = y(0);
        row.r = r;
        row.J = J;
        row.e = r - y(0);
        row.y_h = ecg.y_h;
        row.y_d = ecg.y_d;
        row.y_l = ecg.y_l;
        row.y_es = ecg.y_es;
        row.a_es = a_used;
        row.K_es = ecg.K_cur;
        row.lambda = pcac.rls().lambda;
        if (cfg.log_theta) {
            const auto& th = pcac.rls().model.theta;
            row.theta.assign(th.data(), th.data() + th.size());
        }
        log.rows.push_back(std::move(row));

        try {
            const VectorXd y_next = step(plant, disc, u, cfg.w);
            if (!(std::abs(y_next(0)) <= cfg.divergence_bound))
                throw SimulationDiverged(std::size_t(k), "plant output exceeded the divergence bound at step " +
                                                             std::to_string(k));
        } catch (const SimulationDiverged& ex) {
            log.diverged = true;
            log.divergence_step = k;
            log.message = ex.what();
            break;
        }
        u = u_next;
        r_prev = r;
    }
    log.qp = pcac.stats();
    log.summary = compute_summary(log.rows, cfg.cost.r_star);
    return log;
}

} // namespace ecgpcac
