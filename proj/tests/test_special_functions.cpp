#include <gtest/gtest.h>

#include <cmath>

#include "jacspec/special_functions.hpp"

using namespace jacspec;

namespace {

// Maclaurin series erf(x) = 2/√π Σ (-1)^k x^{2k+1} / (k! (2k+1)), in long double.
long double erf_series(long double x) {
    long double term = x, sum = x;
    for (int k = 1; k < 200; ++k) {
        term *= -x * x / k;
        const long double add = term / (2 * k + 1);
        sum += add;
        if (std::fabs(add) < 1e-30L) break;
    }
    return sum * 2.0L / std::sqrt(3.14159265358979323846264338327950288L);
}

}  // namespace

TEST(Erf, MatchesSeriesOracle) {
    for (double x = -3.0; x <= 3.0; x += 0.125) {
        EXPECT_NEAR(jacspec::erf(x), static_cast<double>(erf_series(x)), 2e-15) << x;
    }
    EXPECT_NEAR(jacspec::erf(1.0), 0.842700793, 1e-9);
}

TEST(ErfInv, KnownValues) {
    EXPECT_EQ(erf_inv(0.0), 0.0);
    EXPECT_NEAR(erf_inv(0.5), 0.4769362762044699, 1e-14);
    EXPECT_NEAR(erf_inv(-0.5), -0.4769362762044699, 1e-14);
    EXPECT_NEAR(erfc_inv(1.0), 0.0, 0.0);
}

TEST(ErfInv, RoundTripGrid) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = -3.0 + 6.0 * i / 999.0;
        worst = std::max(worst, std::abs(erf_inv(jacspec::erf(x)) - x));
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(ErfInv, ForwardRoundTripNearOne) {
    for (double y : {0.9, 0.99, 0.999999, 1.0 - 1e-12, -0.75}) {
        EXPECT_NEAR(jacspec::erf(erf_inv(y)), y, 1e-15) << y;
    }
}

TEST(ErfInv, DomainErrors) {
    EXPECT_THROW(erf_inv(1.0), DomainError);
    EXPECT_THROW(erf_inv(-1.0), DomainError);
    EXPECT_THROW(erf_inv(std::nan("")), DomainError);
    EXPECT_THROW(erfc_inv(0.0), DomainError);
    EXPECT_THROW(erfc_inv(2.0), DomainError);
}

TEST(ErfcInv, TinyArgumentsKeepRelativeAccuracy) {
    for (double q : {1e-3, 1e-10, 1e-50, 1e-250}) {
        const double x = erfc_inv(q);
        EXPECT_NEAR(jacspec::erfc(x) / q, 1.0, 1e-12) << q;
    }
    EXPECT_NEAR(erfc_inv(1.5), -erfc_inv(0.5), 1e-15);
}
