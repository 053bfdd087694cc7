#pragma once

/**
 * @file plant.hpp
 * @brief Continuous-time LTI plant under zero-order-hold sampled-data control.
 *
 * The plant is integrated exactly between samples: the control and the
 * disturbance are held over each interval, so one step is a single affine
 * map x <- A_d x + B_d u + B_wd w.
 */

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ecgpcac/errors.hpp"

namespace ecgpcac {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LtiPlant {
    MatrixXd A;  ///< n_x x n_x
    MatrixXd B;  ///< n_x x m
    MatrixXd Bw; ///< n_x x 1, additive disturbance channel
    MatrixXd C;  ///< p x n_x
    VectorXd x;  ///< current state
    std::size_t steps_taken = 0;

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index input_dim() const { return B.cols(); }
    Eigen::Index output_dim() const { return C.rows(); }

    void validate() const {
        const auto n = A.rows();
        if (n == 0 || A.cols() != n)
            throw ContractViolation("LtiPlant: A must be square and non-empty");
        if (B.rows() != n || B.cols() == 0)
            throw ContractViolation("LtiPlant: B must have n_x rows and at least one column");
        if (Bw.rows() != n || Bw.cols() != 1)
            throw ContractViolation("LtiPlant: Bw must be n_x x 1");
        if (C.cols() != n || C.rows() == 0)
            throw ContractViolation("LtiPlant: C must have n_x columns");
        if (x.size() != n)
            throw ContractViolation("LtiPlant: state vector has wrong length");
    }

    VectorXd output() const { return C * x; }
};

struct ZohDiscretization {
    MatrixXd Ad;
    MatrixXd Bd;
    MatrixXd Bwd;
    double Ts = 0.0;
};

/// Exact ZOH discretization via the exponential of the augmented matrix
/// [[A, B, Bw], [0, 0, 0]] * Ts, whose top block row is [A_d, B_d, B_wd].
inline ZohDiscretization discretize_zoh(const LtiPlant& plant, double Ts) {
    plant.validate();
    if (!(Ts > 0.0) || !std::isfinite(Ts))
        throw ContractViolation("discretize_zoh: sample period must be positive and finite");

    const auto n = plant.state_dim();
    const auto m = plant.input_dim();
    const auto dim = n + m + 1;

    MatrixXd M = MatrixXd::Zero(dim, dim);
    M.topLeftCorner(n, n) = plant.A * Ts;
    M.block(0, n, n, m) = plant.B * Ts;
    M.block(0, n + m, n, 1) = plant.Bw * Ts;

    const MatrixXd E = M.exp();

    ZohDiscretization disc;
    disc.Ad = E.topLeftCorner(n, n);
    disc.Bd = E.block(0, n, n, m);
    disc.Bwd = E.block(0, n + m, n, 1);
    disc.Ts = Ts;
    if (!disc.Ad.allFinite() || !disc.Bd.allFinite() || !disc.Bwd.allFinite())
        throw DiscretizationError("discretize_zoh: matrix exponential produced non-finite entries");
    return disc;
}

/// Advance one sample interval with u and w held, and return y = C x at the
/// new sample instant.
inline VectorXd step(LtiPlant& plant, const ZohDiscretization& disc, const VectorXd& u, double w) {
    if (u.size() != plant.input_dim())
        throw ContractViolation("plant step: control has wrong dimension");
    if (!u.allFinite() || !std::isfinite(w))
        throw ContractViolation("plant step: inputs must be finite");

    plant.x = disc.Ad * plant.x + disc.Bd * u + disc.Bwd * w;
    const std::size_t k = plant.steps_taken++;
    if (!plant.x.allFinite())
        throw SimulationDiverged(k, "plant state became non-finite at step " + std::to_string(k));
    return plant.output();
}

// ---------------------------------------------------------------------------
// Measured performance map

enum class CostKind { abs_linear, sqrt_abs, gaussian };
enum class CostSignal { command, output };

struct CostMap {
    CostKind kind = CostKind::abs_linear;
    double r_star = 0.0;
    CostSignal eval_signal = CostSignal::command;

    /// Value of J at its maximizer.
    double peak() const { return kind == CostKind::gaussian ? 1.0 : 0.0; }
};

inline double cost_value(CostKind kind, double r_star, double v) {
    const double d = v - r_star;
    switch (kind) {
    case CostKind::abs_linear:
        return -std::abs(d);
    case CostKind::sqrt_abs:
        return -std::sqrt(std::abs(d));
    case CostKind::gaussian:
        return std::exp(-d * d);
    }
    return 0.0;
}

/// J evaluated on the command r or on the plant output y, as selected by the map.
inline double measure_cost(const CostMap& map, double r, double y) {
    return cost_value(map.kind, map.r_star, map.eval_signal == CostSignal::command ? r : y);
}

inline std::string_view to_string(CostKind kind) {
    switch (kind) {
    case CostKind::abs_linear:
        return "abs_linear";
    case CostKind::sqrt_abs:
        return "sqrt_abs";
    case CostKind::gaussian:
        return "gaussian";
    }
    return "?";
}

inline std::string_view to_string(CostSignal s) {
    return s == CostSignal::command ? "command" : "output";
}

// ---------------------------------------------------------------------------
// Benchmark plants. All are second order with position output y = x_1 and a
// force input entering the velocity equation.

inline LtiPlant make_second_order_plant(double stiffness, double mass = 1.0) {
    LtiPlant p;
    p.A = MatrixXd{{0.0, 1.0}, {-stiffness / mass, 0.0}};
    p.B = MatrixXd{{0.0}, {1.0 / mass}};
    p.Bw = MatrixXd{{0.0}, {1.0 / mass}};
    p.C = MatrixXd{{1.0, 0.0}};
    p.x = VectorXd::Zero(2);
    return p;
}

/// x1' = x2, x2' = -(k/m) x1 + u/m
inline LtiPlant undamped_oscillator(double k = 1.0, double m = 1.0) { return make_second_order_plant(k, m); }

/// x1' = x2, x2' = u + w
inline LtiPlant double_integrator() { return make_second_order_plant(0.0); }

/// x1' = x2, x2' = x1 + u
inline LtiPlant exponentially_unstable() { return make_second_order_plant(-1.0); }

} // namespace ecgpcac
