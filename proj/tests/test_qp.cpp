#include <cmath>

#include <gtest/gtest.h>

#include "ecgpcac/qp.hpp"
#include "oracles.hpp"

using namespace ecgpcac;

namespace {

QpSpec box_problem(double lo, double hi, const VectorXd& target) {
    const Index n = target.size();
    QpSpec s;
    s.H = MatrixXd::Identity(n, n);
    s.f = -target;
    s.G.resize(2 * n, n);
    s.G << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    s.h.resize(2 * n);
    s.h << VectorXd::Constant(n, hi), VectorXd::Constant(n, -lo);
    return s;
}

} // namespace

TEST(Qp, OneDimensionalExample) {
    QpSpec s;
    s.H = MatrixXd::Identity(1, 1);
    s.f = VectorXd::Constant(1, -1.0);
    s.G = MatrixXd::Identity(1, 1);
    s.h = VectorXd::Constant(1, 0.5);
    const auto sol = solve(s);
    EXPECT_EQ(sol.status, QpStatus::optimal);
    EXPECT_NEAR(sol.x(0), 0.5, 1e-12);
    EXPECT_NEAR(sol.multipliers(0), 0.5, 1e-12);
    EXPECT_EQ(sol.active_set, std::vector<int>{0});
}

TEST(Qp, UnconstrainedClosedForm) {
    QpSpec s;
    s.H = MatrixXd{{2.0, 0.5}, {0.5, 1.0}};
    s.f = VectorXd{{1.0, -1.0}};
    s.G = MatrixXd::Zero(0, 2);
    s.h = VectorXd::Zero(0);
    const auto sol = solve(s);
    EXPECT_EQ(sol.status, QpStatus::optimal);
    EXPECT_TRUE(sol.x.isApprox(-s.H.ldlt().solve(s.f)));
}

TEST(Qp, InactiveConstraintsLeaveInteriorOptimum) {
    const auto s = box_problem(-10.0, 10.0, VectorXd{{1.0, -2.0, 3.0}});
    const auto sol = solve(s);
    EXPECT_EQ(sol.status, QpStatus::optimal);
    EXPECT_TRUE(sol.x.isApprox(VectorXd{{1.0, -2.0, 3.0}}, 1e-12));
    EXPECT_TRUE(sol.active_set.empty());
}

TEST(Qp, BoxClipping) {
    const auto s = box_problem(-1.0, 1.0, VectorXd{{3.0, -0.5, -4.0}});
    const auto sol = solve(s);
    EXPECT_EQ(sol.status, QpStatus::optimal);
    EXPECT_TRUE(sol.x.isApprox(VectorXd{{1.0, -0.5, -1.0}}, 1e-12));
    const auto kkt = kkt_residuals(s, sol.x, sol.multipliers);
    EXPECT_LE(kkt.stationarity, 1e-10);
    EXPECT_LE(kkt.complementarity, 1e-10);
}

TEST(Qp, InfeasibleDetected) {
    QpSpec s;
    s.H = MatrixXd::Identity(1, 1);
    s.f = VectorXd::Zero(1);
    s.G = MatrixXd{{1.0}, {-1.0}};
    s.h = VectorXd{{-1.0, -1.0}}; // x <= -1 and x >= 1
    EXPECT_EQ(solve(s).status, QpStatus::infeasible);
}

TEST(Qp, InfeasibleWarmStartIsRepaired) {
    auto s = box_problem(-1.0, 1.0, VectorXd{{0.2, 0.3}});
    s.G.conservativeResize(5, 2);
    s.h.conservativeResize(5);
    s.G.row(4) << 1.0, 1.0;
    s.h(4) = 0.1;
    s.x0 = VectorXd{{5.0, 5.0}};
    const auto sol = solve(s);
    EXPECT_EQ(sol.status, QpStatus::optimal);
    const auto ref = oracle::qp_enumerate(s.H, s.f, s.G, s.h);
    ASSERT_TRUE(ref.feasible);
    EXPECT_LE((sol.x - ref.x).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Qp, WarmAndColdStartsAgree) {
    auto g = oracle::rng(31);
    for (int t = 0; t < 40; ++t) {
        QpSpec s;
        s.H = oracle::random_spd(g, 4);
        s.f = oracle::random_vector(g, 4, 3.0);
        s.G = oracle::random_matrix(g, 6, 4);
        s.h = oracle::random_vector(g, 6) + VectorXd::Constant(6, 1.0);
        const auto cold = solve(s);
        s.x0 = oracle::random_vector(g, 4, 2.0);
        const auto warm = solve(s);
        ASSERT_EQ(cold.status, QpStatus::optimal);
        ASSERT_EQ(warm.status, QpStatus::optimal);
        EXPECT_LE((cold.x - warm.x).cwiseAbs().maxCoeff(), 1e-8) << t;
    }
}

TEST(Qp, DeterministicForSameInput) {
    auto g = oracle::rng(32);
    QpSpec s;
    s.H = oracle::random_spd(g, 4);
    s.f = oracle::random_vector(g, 4, 3.0);
    s.G = oracle::random_matrix(g, 6, 4);
    s.h = oracle::random_vector(g, 6) + VectorXd::Constant(6, 0.5);
    const auto a = solve(s);
    const auto b = solve(s);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.active_set, b.active_set);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Qp, RejectsNonConvexOrAsymmetric) {
    QpSpec s;
    s.H = MatrixXd{{1.0, 0.0}, {0.0, -1.0}};
    s.f = VectorXd::Zero(2);
    s.G = MatrixXd::Zero(0, 2);
    s.h = VectorXd::Zero(0);
    EXPECT_THROW(solve(s), ContractViolation);
    s.H = MatrixXd{{1.0, 0.5}, {0.0, 1.0}};
    EXPECT_THROW(solve(s), ContractViolation);
    s.H = MatrixXd::Identity(2, 2);
    s.x0 = VectorXd::Zero(3);
    EXPECT_THROW(solve(s), ContractViolation);
}

TEST(Qp, DegenerateRedundantConstraints) {
    // Same half-plane listed three times plus a bound through the optimum.
    QpSpec s;
    s.H = MatrixXd::Identity(2, 2);
    s.f = VectorXd{{-2.0, -2.0}};
    s.G = MatrixXd{{1.0, 1.0}, {1.0, 1.0}, {2.0, 2.0}, {1.0, 0.0}};
    s.h = VectorXd{{1.0, 1.0, 2.0, 0.5}};
    const auto sol = solve(s);
    EXPECT_EQ(sol.status, QpStatus::optimal);
    EXPECT_TRUE(sol.x.isApprox(VectorXd{{0.5, 0.5}}, 1e-9));
    const auto kkt = kkt_residuals(s, sol.x, sol.multipliers);
    EXPECT_LE(kkt.stationarity, 1e-8);
    EXPECT_LE(kkt.dual_feasibility, 1e-12);
}

TEST(WarmShift, ShiftsAndRepeatsLastBlock) {
    EXPECT_TRUE(warm_start_shift(VectorXd{{1.0, 2.0, 3.0}}, 1, 3).isApprox(VectorXd{{2.0, 3.0, 3.0}}));
    const VectorXd with_slack = warm_start_shift(VectorXd{{1.0, 2.0, 3.0, 9.0}}, 1, 3);
    EXPECT_TRUE(with_slack.isApprox(VectorXd{{2.0, 3.0, 3.0, 0.0}}));
    EXPECT_TRUE(warm_start_shift(VectorXd{{4.0}}, 1, 1).isApprox(VectorXd{{4.0}}));
    EXPECT_THROW(warm_start_shift(VectorXd::Zero(2), 1, 3), ContractViolation);
}
