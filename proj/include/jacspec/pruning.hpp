#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"
#include "jacspec/mask.hpp"
#include "jacspec/matrix_io.hpp"
#include "jacspec/rng.hpp"
#include "jacspec/special_functions.hpp"

namespace jacspec {

/// How kept weights are rescaled.
///
/// Analytic uses the closed form that belongs to the pruning method
/// ((1-s)^{-1/2} for random pruning, the threshold formula for magnitude
/// pruning). RandomFactor applies (1-s)^{-1/2} whatever the method, which is
/// what one gets by reusing the random-pruning factor for magnitude pruning.
/// Calibrated rescales so the realized second moment matches the dense
/// critical network exactly.
enum class ScalingMode { None, Analytic, Calibrated, RandomFactor };

inline std::string to_string(ScalingMode m) {
    switch (m) {
        case ScalingMode::None: return "none";
        case ScalingMode::Analytic: return "analytic";
        case ScalingMode::Calibrated: return "calibrated";
        case ScalingMode::RandomFactor: return "random_factor";
    }
    return "none";
}

inline ScalingMode parse_scaling_mode(const std::string& s) {
    if (s == "none") return ScalingMode::None;
    if (s == "analytic") return ScalingMode::Analytic;
    if (s == "calibrated") return ScalingMode::Calibrated;
    if (s == "random_factor") return ScalingMode::RandomFactor;
    throw ConfigError("unknown scaling mode '" + s +
                      "' (expected none|analytic|calibrated|random_factor)");
}

struct RandomPruning {
    double sparsity = 0.0;
};

struct MagnitudeThreshold {
    double threshold = 0.0;
};

struct MagnitudeTopR {
    std::size_t keep = 0;
};

struct PruningSpec {
    std::variant<RandomPruning, MagnitudeThreshold, MagnitudeTopR> method;
    ScalingMode scaling = ScalingMode::None;

    std::string method_name() const {
        switch (method.index()) {
            case 0: return "random";
            case 1: return "magnitude_threshold";
            default: return "magnitude_top_r";
        }
    }
};

/// r = ⌈n · (ln n)^c⌉, capped at n².
inline std::size_t top_r_from_exponent(std::size_t n, double c) {
    const double nn = static_cast<double>(n);
    const double r = std::ceil(nn * std::pow(std::log(nn), c));
    return static_cast<std::size_t>(std::min(r, nn * nn));
}

/// Number of weights kept at sparsity s: round((1-s)·n²), at least 1.
inline std::size_t top_r_from_sparsity(std::size_t n, double s) {
    if (!(s >= 0.0 && s < 1.0)) throw DomainError("sparsity must lie in [0, 1)");
    const double total = static_cast<double>(n) * static_cast<double>(n);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((1.0 - s) * total)));
}

struct ScaleReport {
    double analytic = 0.0;
    double calibrated = 0.0;
    double ratio = 0.0;  // analytic / calibrated
    /// |mean over rows of ½Σ_k (b_ik w_ik)² - 1| for the realized masked matrix.
    double second_moment_stat = 0.0;
    std::optional<std::string> warning;
};

struct MaskResult {
    Mask mask;
    ScaleReport report;
    /// Magnitude threshold: the given t (threshold mode) or the solved t (top-r mode).
    double threshold = 0.0;
};

/// (1 - s)^{-1/2}
inline double analytic_random_scale(double s) {
    if (!(s >= 0.0 && s < 1.0)) throw DomainError("sparsity must lie in [0, 1), got " + std::to_string(s));
    return 1.0 / std::sqrt(1.0 - s);
}

/// ((√(2π) e^{n t²/2}) / (t n^{3/2}))^{1/2}, evaluated in log space.
inline double analytic_magnitude_scale(std::size_t n, double t) {
    if (!(t > 0.0)) throw DomainError("magnitude threshold must be positive");
    const double nn = static_cast<double>(n);
    const double log_sq = 0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * nn * t * t - std::log(t) -
                          1.5 * std::log(nn);
    return std::exp(0.5 * log_sq);
}

/// Largest t covered by the deterministic-threshold guarantee:
/// t ≤ √((4 ln n - c ln ln n)/n) for some c > 7, i.e. t below the c = 7 bound.
inline double magnitude_threshold_upper_bound(std::size_t n) {
    const double nn = static_cast<double>(n);
    const double ln = std::log(nn);
    return std::sqrt(std::max(0.0, 4.0 * ln - 7.0 * std::log(ln)) / nn);
}

/// Threshold t solving P(|w| ≤ t) = 1 - r/(n²+1) for w ~ N(0, 2/n):
/// t = (2/√n) · erf⁻¹(1 - r/(n²+1)).
inline double top_r_threshold(std::size_t n, std::size_t r) {
    const double nn = static_cast<double>(n);
    const double q = static_cast<double>(r) / (nn * nn + 1.0);
    return 2.0 / std::sqrt(nn) * erfc_inv(q);
}

/// √(2n / Σ_{kept} w²): the scale making the matrix-average of ½Σ_k (b w)² equal 1.
inline double calibrated_scale(const DenseMatrix& w, const DenseMatrix& keep_pattern, std::size_t n) {
    if (w.rows() != keep_pattern.rows() || w.cols() != keep_pattern.cols()) {
        throw DimensionError("calibrated_scale: weights " + w.shape_string() + " vs pattern " +
                             keep_pattern.shape_string());
    }
    double sum_sq = 0.0;
    std::size_t kept = 0;
    auto wv = w.values();
    auto pv = keep_pattern.values();
    for (std::size_t i = 0; i < wv.size(); ++i) {
        if (pv[i] != 0.0) {
            sum_sq += wv[i] * wv[i];
            ++kept;
        }
    }
    if (kept == 0 || sum_sq == 0.0) throw EmptyMaskError("calibrated_scale: nothing kept");
    return std::sqrt(2.0 * static_cast<double>(n) / sum_sq);
}

/// |(1/rows) Σ_i ½Σ_k (b_ik w_ik)² - 1|
inline double second_moment_statistic(const DenseMatrix& w, const DenseMatrix& b) {
    auto wv = w.values();
    auto bv = b.values();
    double total = 0.0;
    for (std::size_t i = 0; i < wv.size(); ++i) {
        const double x = wv[i] * bv[i];
        total += x * x;
    }
    return std::abs(0.5 * total / static_cast<double>(w.rows()) - 1.0);
}

namespace detail {

inline MaskResult finish_mask(const DenseMatrix& w, const DenseMatrix& pattern, std::size_t n,
                              ScalingMode scaling, double analytic, double random_factor) {
    MaskResult out;
    out.report.analytic = analytic;
    out.report.calibrated = calibrated_scale(w, pattern, n);
    out.report.ratio = out.report.analytic / out.report.calibrated;
    double scale = 1.0;
    switch (scaling) {
        case ScalingMode::None: scale = 1.0; break;
        case ScalingMode::Analytic: scale = analytic; break;
        case ScalingMode::Calibrated: scale = out.report.calibrated; break;
        case ScalingMode::RandomFactor: scale = random_factor; break;
    }
    out.mask = mask_from_pattern(pattern, scale);
    out.report.second_moment_stat = second_moment_statistic(w, out.mask.matrix);
    return out;
}

inline void require_square(const DenseMatrix& w, std::size_t n, const char* who) {
    if (w.rows() != n || w.cols() != n) {
        throw DimensionError(std::string(who) + ": weights " + w.shape_string() + ", expected " +
                             std::to_string(n) + "x" + std::to_string(n));
    }
}

}  // namespace detail

/// i.i.d. Bernoulli(1 - s) keep pattern, one uniform draw per entry in row-major order.
inline DenseMatrix random_keep_pattern(RngStream& rng, std::size_t n, double s) {
    if (!(s >= 0.0 && s < 1.0)) {
        throw DomainError("random pruning: sparsity must lie in [0, 1), got " + std::to_string(s));
    }
    DenseMatrix pattern(n, n);
    const double keep = 1.0 - s;
    for (auto& v : pattern.values()) v = rng.uniform() < keep ? 1.0 : 0.0;
    return pattern;
}

/// Random mask with a weight-independent scale (None, Analytic or RandomFactor).
inline Mask random_mask(RngStream& rng, std::size_t n, double s, ScalingMode scaling) {
    if (scaling == ScalingMode::Calibrated) {
        throw DomainError("random_mask: calibrated scaling needs the weights it is applied to");
    }
    const auto pattern = random_keep_pattern(rng, n, s);
    return mask_from_pattern(pattern, scaling == ScalingMode::None ? 1.0 : analytic_random_scale(s));
}

/// Random mask for a given weight matrix; supports every scaling mode and
/// reports both candidate scales.
inline MaskResult random_mask(RngStream& rng, const DenseMatrix& w, double s, ScalingMode scaling) {
    const std::size_t n = w.rows();
    detail::require_square(w, n, "random_mask");
    const auto pattern = random_keep_pattern(rng, n, s);
    const double a = analytic_random_scale(s);
    return detail::finish_mask(w, pattern, n, scaling, a, a);
}

/// Keeps entries with |w_ij| > t.
inline MaskResult magnitude_mask_threshold(const DenseMatrix& w, std::size_t n, double t,
                                           ScalingMode scaling) {
    detail::require_square(w, n, "magnitude_mask_threshold");
    if (!(t > 0.0)) throw DomainError("magnitude_mask_threshold: t must be positive");
    DenseMatrix pattern(n, n);
    std::size_t kept = 0;
    auto wv = w.values();
    auto pv = pattern.values();
    for (std::size_t i = 0; i < wv.size(); ++i) {
        if (std::abs(wv[i]) > t) {
            pv[i] = 1.0;
            ++kept;
        }
    }
    if (kept == 0) {
        throw EmptyMaskError("magnitude_mask_threshold: threshold " + format_double(t) +
                             " exceeds every |w_ij|");
    }
    const double retention = static_cast<double>(kept) / static_cast<double>(wv.size());
    auto out = detail::finish_mask(w, pattern, n, scaling, analytic_magnitude_scale(n, t),
                                   1.0 / std::sqrt(retention));
    out.threshold = t;
    const double bound = magnitude_threshold_upper_bound(n);
    if (t > bound) {
        out.report.warning = "threshold " + format_double(t) +
                             " is above the analytic validity bound " + format_double(bound);
    }
    return out;
}

/// Keeps the r largest |w_ij| (ties broken by ascending row-major index) and
/// reports the threshold t = (2/√n)·erf⁻¹(1 - r/(n²+1)) used by the analytic scale.
inline MaskResult magnitude_mask_top_r(const DenseMatrix& w, std::size_t n, std::size_t r,
                                       ScalingMode scaling) {
    detail::require_square(w, n, "magnitude_mask_top_r");
    const std::size_t total = n * n;
    if (r == 0) throw DomainError("magnitude_mask_top_r: r must be >= 1");
    if (r > total) {
        throw DomainError("magnitude_mask_top_r: r = " + std::to_string(r) + " exceeds n^2 = " +
                          std::to_string(total));
    }
    auto wv = w.values();
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    const auto before = [&](std::uint32_t a, std::uint32_t b) {
        const double x = std::abs(wv[a]);
        const double y = std::abs(wv[b]);
        return x != y ? x > y : a < b;
    };
    if (r < total) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(r), order.end(), before);
    DenseMatrix pattern(n, n);
    auto pv = pattern.values();
    for (std::size_t i = 0; i < r; ++i) pv[order[i]] = 1.0;

    const double t = top_r_threshold(n, r);
    const double retention = static_cast<double>(r) / static_cast<double>(total);
    // The closed form is undefined at t = 0 (only reachable when r ≈ n²).
    const double analytic = t > 0.0 ? analytic_magnitude_scale(n, t) : 1.0;
    auto out = detail::finish_mask(w, pattern, n, scaling, analytic, 1.0 / std::sqrt(retention));
    out.threshold = t;
    return out;
}

/// Applies `spec` to one weight matrix. `rng` is only consumed by random pruning.
inline MaskResult make_mask(const PruningSpec& spec, RngStream& rng, const DenseMatrix& w) {
    const std::size_t n = w.rows();
    if (const auto* rp = std::get_if<RandomPruning>(&spec.method)) {
        return random_mask(rng, w, rp->sparsity, spec.scaling);
    }
    if (const auto* th = std::get_if<MagnitudeThreshold>(&spec.method)) {
        return magnitude_mask_threshold(w, n, th->threshold, spec.scaling);
    }
    return magnitude_mask_top_r(w, n, std::get<MagnitudeTopR>(spec.method).keep, spec.scaling);
}

struct EdgeMargin {
    /// (1 - s)·n / (ln n)⁴; the sufficient condition asks for this to be ≫ 1.
    double margin = 0.0;
    /// log₁₀(n)/n, the retention level where breakdown shows up empirically.
    double heuristic_level = 0.0;
    double retention = 0.0;
};

inline EdgeMargin edge_of_stability_margin(std::size_t n, double s) {
    if (!(s >= 0.0 && s < 1.0)) throw DomainError("sparsity must lie in [0, 1)");
    const double nn = static_cast<double>(n);
    const double ln4 = std::pow(std::log(nn), 4);
    return {(1.0 - s) * nn / ln4, std::log10(nn) / nn, 1.0 - s};
}

/// Provenance written next to an exported mask.
struct MaskSidecar {
    std::string method;
    std::optional<double> sparsity;
    std::optional<double> threshold;
    std::optional<std::size_t> keep;
};

inline std::string mask_sidecar_line(const Mask& mask, const MaskSidecar& meta) {
    const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("-"); };
    return "mask method=" + meta.method + " s=" + opt(meta.sparsity) + " t=" + opt(meta.threshold) +
           " r=" + (meta.keep ? std::to_string(*meta.keep) : std::string("-")) +
           " scale=" + format_double(mask.scale) + " kept=" + std::to_string(mask.kept_count);
}

/// Writes the mask matrix to `path` and the sidecar line to `path` + ".meta".
inline void export_mask(const std::filesystem::path& path, const Mask& mask, const MaskSidecar& meta,
                        MatrixFormat format) {
    save_matrix(path, mask.matrix, format);
    std::ofstream side(path.string() + ".meta");
    if (!side) throw IoError("cannot write mask sidecar for " + path.string());
    side << mask_sidecar_line(mask, meta) << '\n';
}

}  // namespace jacspec
