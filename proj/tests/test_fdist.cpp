#include <boost/math/distributions/fisher_f.hpp>
#include <gtest/gtest.h>

#include "ecgpcac/fdist.hpp"

using namespace ecgpcac::stats;

TEST(FDist, KnownQuantile) {
    EXPECT_NEAR(f_quantile(1, 10, 0.95), 4.9646, 5e-5);
}

TEST(FDist, MedianOfEqualDegrees) {
    for (double d : {1.0, 3.0, 10.0, 57.5})
        EXPECT_NEAR(f_quantile(d, d, 0.5), 1.0, 1e-10) << d;
}

TEST(FDist, IncompleteBetaEndpointsAndSymmetry) {
    EXPECT_DOUBLE_EQ(ibeta(2.0, 3.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(ibeta(2.0, 3.0, 1.0), 1.0);
    // I_x(1, 1) = x
    EXPECT_NEAR(ibeta(1.0, 1.0, 0.3), 0.3, 1e-14);
    EXPECT_NEAR(ibeta(2.5, 4.0, 0.2) + ibeta(4.0, 2.5, 0.8), 1.0, 1e-13);
}

TEST(FDist, InverseRoundTrip) {
    for (double a : {0.5, 2.0, 7.0})
        for (double b : {0.7, 3.0, 40.0})
            for (double p : {1e-4, 0.01, 0.5, 0.99, 0.9999}) {
                const double x = ibeta_inv(a, b, p);
                EXPECT_NEAR(ibeta(a, b, x), p, 1e-10 * std::max(1.0, p)) << a << ' ' << b << ' ' << p;
            }
}

TEST(FDist, AgreesWithBoostOverVrfRange) {
    for (double d1 : {1.0, 5.0, 10.0, 20.0, 60.0})
        for (double d2 : {4.5, 6.8, 12.0, 30.0, 200.0})
            for (double p : {0.9, 0.95, 0.99, 0.999}) {
                const boost::math::fisher_f_distribution<double> ref(d1, d2);
                const double want = boost::math::quantile(ref, p);
                EXPECT_NEAR(f_quantile(d1, d2, p), want, 1e-9 * want) << d1 << ' ' << d2 << ' ' << p;
            }
}
