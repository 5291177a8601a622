#include <gtest/gtest.h>

#include <cmath>

#include "jacspec/conditions.hpp"
#include "jacspec/ensembles.hpp"
#include "jacspec/pruning.hpp"

using namespace jacspec;

namespace {

WeightSampler iid_critical(std::size_t n) {
    return [n](RngStream& rng) { return sample_gaussian_matrix(rng, n, n, 2.0 / static_cast<double>(n)); };
}

MaskSampler random_masks(double s, ScalingMode mode) {
    return [s, mode](RngStream& rng, const DenseMatrix& w) { return random_mask(rng, w.rows(), s, mode); };
}

}  // namespace

TEST(Conditions, KeepAllIsWithinNoise) {
    const std::size_t n = 64;
    const auto rep = check_stability_conditions(iid_critical(n), random_masks(0.0, ScalingMode::None), n, 200, 1);
    EXPECT_LE(rep.second_moment.value, 3.0 * rep.second_moment.std_error);
    EXPECT_LE(rep.pooled_second_moment.value, 3.0 * rep.pooled_second_moment.std_error);
    EXPECT_EQ(rep.mask_second_moment.value, 1.0);  // |2/n · n - 1|
    EXPECT_EQ(rep.beta_n, 1.0);
    // The naive max over rows is biased upward relative to the split estimate.
    EXPECT_GT(rep.second_moment.naive_max, 0.0);
}

TEST(Conditions, RandomHalfMaskUnscaledIsHalf) {
    const std::size_t n = 64;
    const auto rep = check_stability_conditions(iid_critical(n), random_masks(0.5, ScalingMode::None), n, 200, 2);
    EXPECT_NEAR(rep.second_moment.value, 0.5, 0.05);
    EXPECT_NEAR(rep.pooled_second_moment.value, 0.5, 0.01);
}

TEST(Conditions, RandomHalfMaskScaledIsSmall) {
    const std::size_t n = 64;
    const auto rep = check_stability_conditions(iid_critical(n), random_masks(0.5, ScalingMode::Analytic), n, 200, 3);
    EXPECT_LE(rep.second_moment.value, 0.05);
    EXPECT_DOUBLE_EQ(rep.beta_n, std::sqrt(2.0));
    const double ln = std::log(64.0);
    EXPECT_NEAR(rep.growth.value, ln * ln * ln * ln / 64.0 * 2.0, 1e-12);
}

TEST(Conditions, MeanConditionDetectsShift) {
    const std::size_t n = 32;
    const WeightSampler shifted = [n](RngStream& rng) {
        auto w = sample_gaussian_matrix(rng, n, n, 2.0 / n);
        for (auto& v : w.values()) v += 1.0 / n;
        return w;
    };
    const auto rep = check_stability_conditions(shifted, random_masks(0.0, ScalingMode::None), n, 400, 4);
    // n · |E w| = 1 for every entry.
    EXPECT_NEAR(rep.mean.value, 1.0, 4.0 * rep.mean.std_error + 0.05);
}

TEST(Conditions, Errors) {
    EXPECT_THROW(check_stability_conditions(iid_critical(8), random_masks(0.0, ScalingMode::None), 8, 50),
                 DomainError);
    EXPECT_THROW(check_stability_conditions(iid_critical(8), random_masks(0.0, ScalingMode::None), 9, 100),
                 DimensionError);
}

TEST(Conditions, Deterministic) {
    const std::size_t n = 16;
    const auto a = check_stability_conditions(iid_critical(n), random_masks(0.3, ScalingMode::None), n, 100, 5);
    const auto b = check_stability_conditions(iid_critical(n), random_masks(0.3, ScalingMode::None), n, 100, 5);
    EXPECT_EQ(a.second_moment.value, b.second_moment.value);
    EXPECT_EQ(a.mean.value, b.mean.value);
}
