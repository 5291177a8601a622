#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "jacspec/diagnostics.hpp"
#include "jacspec/rng.hpp"

using namespace jacspec;

TEST(GrowthFit, ExactLineRecovered) {
    std::vector<GrowthPoint> pts;
    for (int L = 20; L <= 60; L += 5) pts.push_back({double(L), 0.6931 * L + 1.5});
    const auto fit = fit_growth_rate(pts);
    EXPECT_NEAR(fit.slope, 0.6931, 1e-12);
    EXPECT_NEAR(fit.intercept, 1.5, 1e-10);
    EXPECT_NEAR(fit.residual_rms, 0.0, 1e-10);
    EXPECT_EQ(fit.points, 9u);
    EXPECT_EQ(classify_stability(fit).verdict, StabilityClass::Exploding);
}

TEST(GrowthFit, WindowExcludesShallowDepths) {
    std::vector<GrowthPoint> pts = {{5, 100.0}, {10, -50.0}};
    for (int L = 20; L <= 40; L += 10) pts.push_back({double(L), -0.1 * L});
    EXPECT_NEAR(fit_growth_rate(pts).slope, -0.1, 1e-12);
    EXPECT_EQ(classify_stability(fit_growth_rate(pts)).verdict, StabilityClass::Vanishing);
    EXPECT_THROW(fit_growth_rate(pts, {30.0, 45.0}), DomainError);
}

TEST(GrowthFit, ClassifyBoundaries) {
    GrowthFit f;
    f.slope = 0.02;
    EXPECT_EQ(classify_stability(f).verdict, StabilityClass::Stable);
    f.slope = -0.0201;
    EXPECT_EQ(classify_stability(f).verdict, StabilityClass::Vanishing);
    EXPECT_THROW(classify_stability(f, 0.0), DomainError);
    EXPECT_EQ(to_string(StabilityClass::Exploding), "Exploding");
}

TEST(Chi2, HandWorkedTable) {
    // E = 25 everywhere; χ² = 4·25/25 = 4.
    const ContingencyTable2x2 t{30, 20, 20, 30};
    const auto r = chi2_independence(t);
    EXPECT_NEAR(r.chi2, 4.0, 1e-12);
    EXPECT_NEAR(r.p_value, 0.0455, 1e-4);
    EXPECT_NEAR(chi2_independence(t.transposed()).chi2, r.chi2, 1e-12);
    EXPECT_THROW(chi2_independence({5, 5, 0, 0}), DomainError);
}

TEST(Chi2, IndependentSamplesGiveUniformPValues) {
    auto rng = make_rng(1, 2);
    std::vector<double> ps;
    for (int rep = 0; rep < 300; ++rep) {
        ContingencyTable2x2 t;
        for (int i = 0; i < 500; ++i) t.add(rng.bernoulli(0.5), rng.bernoulli(0.5));
        ps.push_back(chi2_independence(t).p_value);
    }
    EXPECT_GT(ks_uniform(ps).p_value, 0.01);
}

TEST(Ks, DetectsWrongDistribution) {
    auto rng = make_rng(3, 4);
    std::vector<double> xs(2000);
    for (auto& x : xs) x = rng.uniform() * rng.uniform();
    EXPECT_LT(ks_uniform(xs).p_value, 1e-6);
}

TEST(Ks, KolmogorovTailValues) {
    // Q_KS(1.36) ≈ 0.0494 (5% critical point), Q_KS(1.63) ≈ 0.0098.
    EXPECT_NEAR(kolmogorov_p_value(1.36 / std::sqrt(1e8), 100000000), 0.0494, 1e-3);
    EXPECT_NEAR(kolmogorov_p_value(1.63 / std::sqrt(1e8), 100000000), 0.0098, 5e-4);
    EXPECT_EQ(kolmogorov_p_value(0.0, 10), 1.0);
}

TEST(Pearson, PerfectAndZero) {
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> y = {2, 4, 6, 8};
    const std::vector<double> z = {-1, -2, -3, -4};
    EXPECT_NEAR(pearson_corr(x, y), 1.0, 1e-15);
    EXPECT_NEAR(pearson_corr(x, z), -1.0, 1e-15);
    EXPECT_NEAR(pearson_corr(std::vector<double>{1, -1, 1, -1}, std::vector<double>{1, 1, -1, -1}), 0.0, 1e-15);
    EXPECT_THROW(pearson_corr(x, std::vector<double>{1, 1, 1, 1}), DomainError);
}

TEST(BernoulliFraction, CountsPerEntry) {
    std::vector<ForwardTrace> traces(4);
    const std::vector<std::vector<double>> pats = {{1, 0}, {1, 1}, {0, 0}, {1, 0}};
    for (std::size_t i = 0; i < 4; ++i) {
        traces[i].preactivations = {pats[i]};
        traces[i].indicators = {pats[i]};
    }
    const auto f = bernoulli_fraction(traces, 0);
    EXPECT_DOUBLE_EQ(f.per_entry[0], 0.75);
    EXPECT_DOUBLE_EQ(f.per_entry[1], 0.25);
    EXPECT_DOUBLE_EQ(f.pooled, 0.5);
}

TEST(ActivationWeightStats, Fractions) {
    ForwardTrace t;
    t.indicators = {{1, 0, 0}};
    const DenseMatrix w(3, 2, {1, -1, 2, 0, -3, 4});
    const auto s = activation_weight_stats(w, t, 0);
    EXPECT_DOUBLE_EQ(s.t_w, 0.5);
    EXPECT_DOUBLE_EQ(s.t_d, 1.0 / 3.0);
    EXPECT_THROW(activation_weight_stats(DenseMatrix(2, 2), t, 0), DimensionError);
}
