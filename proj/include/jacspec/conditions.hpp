#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"
#include "jacspec/mask.hpp"
#include "jacspec/rng.hpp"
#include "jacspec/streams.hpp"

namespace jacspec {

/// Monte Carlo estimate of one condition quantity.
///
/// For max-over-rows (or entries) quantities the worst row is selected on
/// the first half of the samples and its value is estimated on the second
/// half, so `value` is not inflated by the selection and `std_error` is the
/// plain standard error of that second-half mean. `naive_max` is the
/// selection-biased max over all samples, kept for reference.
struct ConditionEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double naive_max = 0.0;
    std::size_t selected_index = 0;
};

struct ConditionReport {
    std::size_t n = 0;
    std::size_t samples = 0;
    double beta_n = 0.0;
    /// (ln⁴ n / n) · β_n²
    ConditionEstimate growth;
    /// max_i |½ Σ_k E|b_ik w_ik|² - 1|
    ConditionEstimate second_moment;
    /// n · max_ij |E[b_ij w_ij]|
    ConditionEstimate mean;
    /// max_i |(2/n) Σ_k |b_ik|² - 1| (dependent-weights variant)
    ConditionEstimate mask_second_moment;
    /// |mean_i (½ Σ_k E|b_ik w_ik|²) - 1| pooled over rows, with its standard error.
    ConditionEstimate pooled_second_moment;
};

using WeightSampler = std::function<DenseMatrix(RngStream&)>;
using MaskSampler = std::function<Mask(RngStream&, const DenseMatrix&)>;

namespace detail {

/// Running sums for the two sample halves of a family of scalar quantities.
class SplitMoments {
public:
    explicit SplitMoments(std::size_t count)
        : sum_{std::vector<double>(count), std::vector<double>(count)},
          sq_{std::vector<double>(count), std::vector<double>(count)} {}

    void add(int half, std::size_t i, double x) {
        sum_[half][i] += x;
        sq_[half][i] += x * x;
    }

    /// Selects argmax_i |mean_A(i) - target| and estimates it on half B.
    ConditionEstimate estimate(std::size_t count_a, std::size_t count_b, double target,
                               double factor) const {
        ConditionEstimate est;
        const auto na = static_cast<double>(count_a);
        const auto nb = static_cast<double>(count_b);
        double best = -1.0;
        for (std::size_t i = 0; i < sum_[0].size(); ++i) {
            const double dev = std::abs(sum_[0][i] / na - target);
            if (dev > best) {
                best = dev;
                est.selected_index = i;
            }
            const double all = (sum_[0][i] + sum_[1][i]) / (na + nb);
            est.naive_max = std::max(est.naive_max, factor * std::abs(all - target));
        }
        const std::size_t k = est.selected_index;
        const double mean_b = sum_[1][k] / nb;
        const double var_b = std::max(0.0, (sq_[1][k] / nb - mean_b * mean_b) * nb / (nb - 1.0));
        est.value = factor * std::abs(mean_b - target);
        est.std_error = factor * std::sqrt(var_b / nb);
        return est;
    }

private:
    std::vector<double> sum_[2];
    std::vector<double> sq_[2];
};

}  // namespace detail

/// Monte Carlo diagnostics for the stability-theorem conditions on one
/// (weights, mask) ensemble of n×n matrices.
///
/// Sample s draws its weights from stream (ConditionWeights, s) and its mask
/// from stream (ConditionMask, s) under `master_seed`.
inline ConditionReport check_stability_conditions(const WeightSampler& weight_sampler,
                                                  const MaskSampler& mask_sampler, std::size_t n,
                                                  std::size_t mc_samples,
                                                  std::uint64_t master_seed = 0) {
    if (mc_samples < 100) throw DomainError("check_stability_conditions: need >= 100 samples");
    const std::size_t half_a = mc_samples / 2;
    const std::size_t half_b = mc_samples - half_a;
    const double nn = static_cast<double>(n);

    detail::SplitMoments rows(n);
    detail::SplitMoments mask_rows(n);
    detail::SplitMoments entries(n * n);
    double pooled_sum = 0.0, pooled_sq = 0.0;
    double beta = 0.0;

    for (std::size_t s = 0; s < mc_samples; ++s) {
        auto wrng = make_rng(master_seed, stream_id({static_cast<std::uint64_t>(StreamRole::ConditionWeights), s}));
        auto mrng = make_rng(master_seed, stream_id({static_cast<std::uint64_t>(StreamRole::ConditionMask), s}));
        const DenseMatrix w = weight_sampler(wrng);
        const Mask b = mask_sampler(mrng, w);
        if (w.rows() != n || w.cols() != n || b.matrix.rows() != n || b.matrix.cols() != n) {
            throw DimensionError("check_stability_conditions: sampler returned " + w.shape_string() +
                                 " weights / " + b.matrix.shape_string() + " mask for n = " +
                                 std::to_string(n));
        }
        beta = std::max(beta, b.beta_n);
        const int half = s < half_a ? 0 : 1;
        double sample_total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto wr = w.row(i);
            const auto br = b.matrix.row(i);
            double second = 0.0, mask_sq = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double bw = br[k] * wr[k];
                second += bw * bw;
                mask_sq += br[k] * br[k];
                entries.add(half, i * n + k, bw);
            }
            rows.add(half, i, 0.5 * second);
            mask_rows.add(half, i, 2.0 / nn * mask_sq);
            sample_total += 0.5 * second;
        }
        const double pooled = sample_total / nn;
        pooled_sum += pooled;
        pooled_sq += pooled * pooled;
    }

    ConditionReport rep;
    rep.n = n;
    rep.samples = mc_samples;
    rep.beta_n = beta;
    rep.growth.value = std::pow(std::log(nn), 4) / nn * beta * beta;
    rep.growth.naive_max = rep.growth.value;
    rep.second_moment = rows.estimate(half_a, half_b, 1.0, 1.0);
    rep.mask_second_moment = mask_rows.estimate(half_a, half_b, 1.0, 1.0);
    rep.mean = entries.estimate(half_a, half_b, 0.0, nn);

    const double m = static_cast<double>(mc_samples);
    const double mean = pooled_sum / m;
    const double var = std::max(0.0, (pooled_sq / m - mean * mean) * m / (m - 1.0));
    rep.pooled_second_moment.value = std::abs(mean - 1.0);
    rep.pooled_second_moment.std_error = std::sqrt(var / m);
    rep.pooled_second_moment.naive_max = rep.pooled_second_moment.value;
    return rep;
}

}  // namespace jacspec
