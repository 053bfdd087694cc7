#include <cmath>
#include <deque>

#include <gtest/gtest.h>

#include "ecgpcac/rls.hpp"
#include "oracles.hpp"

using namespace ecgpcac;

TEST(Arx, CoefficientPackingAndSigns) {
    auto model = ArxModel::zeros(2, 1, 1);
    EXPECT_EQ(model.theta.cols(), 5);
    model.set_F(1, MatrixXd::Constant(1, 1, 0.3));
    model.set_F(2, MatrixXd::Constant(1, 1, -0.1));
    model.set_G(0, MatrixXd::Constant(1, 1, 0.5));
    model.set_G(2, MatrixXd::Constant(1, 1, 2.0));
    // theta = [-F1, -F2, G0, G1, G2]
    EXPECT_DOUBLE_EQ(model.theta(0, 0), -0.3);
    EXPECT_DOUBLE_EQ(model.theta(0, 1), 0.1);
    EXPECT_DOUBLE_EQ(model.theta(0, 2), 0.5);
    EXPECT_DOUBLE_EQ(model.theta(0, 4), 2.0);
    EXPECT_DOUBLE_EQ(model.F(2)(0, 0), -0.1);
    EXPECT_THROW(model.F(0), ContractViolation);
    EXPECT_THROW(model.G(3), ContractViolation);
}

TEST(Arx, PredictExample) {
    auto model = ArxModel::zeros(1, 1, 1);
    model.theta << -0.5, 1.0, 0.2;
    const VectorXd phi{{2.0, 1.0, 0.0}};
    EXPECT_DOUBLE_EQ(predict(model, phi)(0), 0.0);
    EXPECT_THROW(predict(model, VectorXd::Zero(2)), ContractViolation);
}

TEST(Regressor, LayoutAndHistory) {
    Regressor reg(2, 1, 1);
    EXPECT_TRUE(reg.phi(VectorXd::Constant(1, 9.0)).isApprox(VectorXd{{0.0, 0.0, 9.0, 0.0, 0.0}}));
    reg.push(VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 10.0)); // step 0
    reg.push(VectorXd::Constant(1, 2.0), VectorXd::Constant(1, 20.0)); // step 1
    // phi_2 = [y_1, y_0, u_2, u_1, u_0]
    const VectorXd phi = reg.phi(VectorXd::Constant(1, 30.0));
    EXPECT_TRUE(phi.isApprox(VectorXd{{2.0, 1.0, 30.0, 20.0, 10.0}})) << phi.transpose();
    // history = [y_0, y_1, u_0, u_1]
    EXPECT_TRUE(reg.history().isApprox(VectorXd{{1.0, 2.0, 10.0, 20.0}})) << reg.history().transpose();
}

TEST(Rls, ScalarStep) {
    auto s = RlsState::create(0, 1, 1, 1.0, IdVariant::plain);
    rls_update(s, VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 1.0));
    EXPECT_DOUBLE_EQ(s.P(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(s.model.theta(0, 0), 0.5);
}

TEST(Rls, ResettingContractsTowardTarget) {
    auto s = RlsState::create(0, 1, 1, 1.0, IdVariant::exponential_resetting);
    s.R_info(0, 0) = 2.0;
    s.lambda = 0.9;
    const VectorXd zero = VectorXd::Zero(1);
    er_rls_update(s, zero, zero);
    EXPECT_NEAR(s.R_info(0, 0), 1.9, 1e-15);
    er_rls_update(s, zero, zero);
    EXPECT_NEAR(s.R_info(0, 0), 1.81, 1e-15);
    EXPECT_DOUBLE_EQ(s.model.theta(0, 0), 0.0);
}

TEST(Rls, PlainAndResettingAgreeWithoutForgetting) {
    auto g = oracle::rng(3);
    auto a = RlsState::create(1, 1, 1, 10.0, IdVariant::plain);
    auto b = RlsState::create(1, 1, 1, 10.0, IdVariant::exponential_resetting);
    for (int k = 0; k < 50; ++k) {
        const VectorXd phi = oracle::random_vector(g, 3);
        const VectorXd y = oracle::random_vector(g, 1);
        rls_update(a, y, phi);
        er_rls_update(b, y, phi);
    }
    EXPECT_LE((a.model.theta - b.model.theta).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((a.covariance() - b.covariance()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rls, MatchesBatchLeastSquares) {
    auto g = oracle::rng(11);
    const double p0 = 100.0;
    auto s = RlsState::create(2, 1, 1, p0, IdVariant::plain);
    std::vector<VectorXd> ys, phis;
    for (int k = 0; k < 80; ++k) {
        const VectorXd phi = oracle::random_vector(g, 5);
        const VectorXd y = VectorXd::Constant(1, phi.dot(VectorXd{{0.4, -0.2, 1.0, 0.5, 0.1}}) + oracle::normal(g, 0.1));
        rls_update(s, y, phi);
        ys.push_back(y);
        phis.push_back(phi);
        const MatrixXd ref = oracle::batch_ls(ys, phis, MatrixXd::Zero(1, 5), p0);
        ASSERT_LE((s.model.theta - ref).norm(), 1e-9 * std::max(1.0, ref.norm())) << "step " << k;
    }
}

TEST(Rls, IngestUsesPreUpdateResidualAndShiftsHistory) {
    auto s = RlsState::create(1, 1, 1, 1.0, IdVariant::plain);
    s.model.theta << 0.0, 2.0, 0.0; // y = 2 u_k
    const VectorXd z = ingest(s, VectorXd::Constant(1, 5.0), VectorXd::Constant(1, 1.0));
    EXPECT_DOUBLE_EQ(z(0), 3.0);
    EXPECT_TRUE(s.regressor.history().isApprox(VectorXd{{5.0, 1.0}}));
    EXPECT_EQ(s.residual_window.size(), 1u);
}

TEST(Vrf, ConstantsAndWarmup) {
    const VrfParams prm;
    const auto k = VrfConstants::make(prm, 1);
    EXPECT_GT(k.b, 4.0);
    EXPECT_GT(k.quantile, 1.0);
    std::deque<VectorXd> window;
    for (int i = 0; i < prm.tau_d - 1; ++i)
        window.push_back(VectorXd::Constant(1, i % 2 ? 100.0 : -100.0));
    EXPECT_DOUBLE_EQ(vrf_lambda(window, prm, k).lambda, 1.0);
}

TEST(Vrf, VarianceJumpForgets) {
    const VrfParams prm;
    auto g = oracle::rng(5);
    std::deque<VectorXd> window;
    for (int i = 0; i < prm.tau_d - prm.tau_n; ++i)
        window.push_back(VectorXd::Constant(1, oracle::normal(g)));
    for (int i = 0; i < prm.tau_n; ++i)
        window.push_back(VectorXd::Constant(1, oracle::normal(g, 10.0)));
    const auto res = vrf_lambda(window, prm, 1);
    EXPECT_LT(res.lambda, 1.0);
    EXPECT_GT(res.statistic, 0.0);
    EXPECT_NEAR(res.lambda, 1.0 / (1.0 + prm.eta * res.statistic), 1e-15);
}

TEST(Vrf, ZeroResidualsAreDegenerateNotForgetting) {
    const VrfParams prm;
    std::deque<VectorXd> window(std::size_t(prm.tau_d), VectorXd::Zero(1));
    const auto res = vrf_lambda(window, prm, 1);
    EXPECT_TRUE(res.degenerate);
    EXPECT_DOUBLE_EQ(res.lambda, 1.0);
}

TEST(Vrf, ParameterValidation) {
    VrfParams prm;
    prm.tau_n = 60;
    EXPECT_THROW(prm.validate(1), ContractViolation);
    prm = VrfParams{};
    prm.alpha_sig = 1.0;
    EXPECT_THROW(prm.validate(1), ContractViolation);
    EXPECT_THROW(RlsState::create(1, 1, 1, 0.0), ContractViolation);
}
