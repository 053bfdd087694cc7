#include <cmath>

#include <gtest/gtest.h>

#include "ecgpcac/plant.hpp"
#include "oracles.hpp"

using namespace ecgpcac;

namespace {

constexpr double Ts = 0.01;

void expect_near(const MatrixXd& a, const MatrixXd& b, double tol) {
    ASSERT_EQ(a.rows(), b.rows());
    ASSERT_EQ(a.cols(), b.cols());
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), tol) << "got\n" << a << "\nexpected\n" << b;
}

} // namespace

TEST(Zoh, OscillatorIsARotation) {
    const auto d = discretize_zoh(undamped_oscillator(), Ts);
    const double c = std::cos(Ts), s = std::sin(Ts);
    expect_near(d.Ad, MatrixXd{{c, s}, {-s, c}}, 1e-12);
    expect_near(d.Bd, MatrixXd{{1.0 - c}, {s}}, 1e-12);
    expect_near(d.Bwd, d.Bd, 1e-15);
}

TEST(Zoh, DoubleIntegratorClosedForm) {
    const auto d = discretize_zoh(double_integrator(), Ts);
    expect_near(d.Ad, MatrixXd{{1.0, Ts}, {0.0, 1.0}}, 1e-12);
    expect_near(d.Bd, MatrixXd{{5e-5}, {0.01}}, 1e-12);
}

TEST(Zoh, UnstablePlantClosedForm) {
    const auto d = discretize_zoh(exponentially_unstable(), Ts);
    const double ch = std::cosh(Ts), sh = std::sinh(Ts);
    expect_near(d.Ad, MatrixXd{{ch, sh}, {sh, ch}}, 1e-12);
    expect_near(d.Bd, MatrixXd{{ch - 1.0}, {sh}}, 1e-12);
}

TEST(Zoh, DisturbanceStepOnDoubleIntegrator) {
    auto plant = double_integrator();
    const auto d = discretize_zoh(plant, Ts);
    const VectorXd y = step(plant, d, VectorXd::Zero(1), 0.1);
    EXPECT_NEAR(plant.x(0), 5e-6, 1e-15);
    EXPECT_NEAR(plant.x(1), 1e-3, 1e-15);
    EXPECT_NEAR(y(0), 5e-6, 1e-15);
    EXPECT_EQ(plant.steps_taken, 1u);
}

TEST(Zoh, MatchesRk4OnRandomPlant) {
    auto g = oracle::rng(7);
    LtiPlant p;
    p.A = oracle::random_matrix(g, 3, 3, 2.0);
    p.B = oracle::random_matrix(g, 3, 2);
    p.Bw = oracle::random_matrix(g, 3, 1);
    p.C = oracle::random_matrix(g, 1, 3);
    p.x = oracle::random_vector(g, 3);
    const VectorXd x0 = p.x;
    const VectorXd u = oracle::random_vector(g, 2);
    const double w = 0.3;
    const auto d = discretize_zoh(p, 0.05);
    step(p, d, u, w);
    const VectorXd ref = oracle::rk4_adaptive(p.A, p.B, p.Bw, x0, u, w, 0.05);
    EXPECT_LE((p.x - ref).norm(), 1e-10 * ref.norm());
}

TEST(Zoh, RejectsBadInputs) {
    auto plant = undamped_oscillator();
    EXPECT_THROW(discretize_zoh(plant, 0.0), ContractViolation);
    EXPECT_THROW(discretize_zoh(plant, -1.0), ContractViolation);
    const auto d = discretize_zoh(plant, Ts);
    EXPECT_THROW(step(plant, d, VectorXd::Zero(2), 0.0), ContractViolation);
    EXPECT_THROW(step(plant, d, VectorXd::Constant(1, NAN), 0.0), ContractViolation);
    plant.B = MatrixXd::Zero(3, 1);
    EXPECT_THROW(discretize_zoh(plant, Ts), ContractViolation);
}

TEST(Zoh, NonFiniteStateRaisesDivergence) {
    auto plant = exponentially_unstable();
    const auto d = discretize_zoh(plant, 1.0); // e^1 growth overflows 1e308
    plant.x << 1e308, 1e308;
    EXPECT_THROW(step(plant, d, VectorXd::Zero(1), 0.0), SimulationDiverged);
}

TEST(Cost, ClosedForms) {
    EXPECT_DOUBLE_EQ(cost_value(CostKind::abs_linear, 2.0, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(cost_value(CostKind::abs_linear, 2.0, 0.5), -1.5);
    EXPECT_DOUBLE_EQ(cost_value(CostKind::sqrt_abs, -2.0, -1.0), -1.0);
    EXPECT_DOUBLE_EQ(cost_value(CostKind::sqrt_abs, -2.0, -6.0), -2.0);
    EXPECT_DOUBLE_EQ(cost_value(CostKind::gaussian, 4.0, 4.0), 1.0);
    EXPECT_NEAR(cost_value(CostKind::gaussian, 4.0, 5.0), std::exp(-1.0), 1e-15);
}

TEST(Cost, SignalSelection) {
    CostMap map{CostKind::abs_linear, 1.0, CostSignal::command};
    EXPECT_DOUBLE_EQ(measure_cost(map, 3.0, 0.0), -2.0);
    map.eval_signal = CostSignal::output;
    EXPECT_DOUBLE_EQ(measure_cost(map, 3.0, 0.0), -1.0);
    EXPECT_DOUBLE_EQ(map.peak(), 0.0);
    map.kind = CostKind::gaussian;
    EXPECT_DOUBLE_EQ(map.peak(), 1.0);
}
