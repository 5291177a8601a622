#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"
#include "jacspec/network.hpp"
#include "jacspec/special_functions.hpp"

namespace jacspec {

struct DepthWindow {
    double min_depth = 20.0;
    double max_depth = std::numeric_limits<double>::infinity();

    bool contains(double depth) const { return depth >= min_depth && depth <= max_depth; }
};

/// Least-squares line through (depth, mean log-norm): slope in nats per layer.
struct GrowthFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    DepthWindow window;
    std::size_t points = 0;
};

struct GrowthPoint {
    double depth = 0.0;
    double mean_log_norm = 0.0;
};

inline GrowthFit fit_growth_rate(std::span<const GrowthPoint> points, DepthWindow window = {}) {
    std::vector<GrowthPoint> used;
    for (const auto& p : points)
        if (window.contains(p.depth)) used.push_back(p);
    if (used.size() < 3) {
        throw DomainError("fit_growth_rate: " + std::to_string(used.size()) +
                          " points inside the depth window; need at least 3");
    }
    const double m = static_cast<double>(used.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : used) {
        mx += p.depth;
        my += p.mean_log_norm;
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : used) {
        sxx += (p.depth - mx) * (p.depth - mx);
        sxy += (p.depth - mx) * (p.mean_log_norm - my);
    }
    if (sxx == 0.0) throw DomainError("fit_growth_rate: all depths in the window are equal");
    GrowthFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (const auto& p : used) {
        const double r = p.mean_log_norm - (fit.intercept + fit.slope * p.depth);
        rss += r * r;
    }
    fit.residual_rms = std::sqrt(rss / m);
    fit.window = window;
    fit.points = used.size();
    return fit;
}

enum class StabilityClass { Vanishing, Stable, Exploding };

inline std::string to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::Vanishing: return "Vanishing";
        case StabilityClass::Stable: return "Stable";
        case StabilityClass::Exploding: return "Exploding";
    }
    return "Stable";
}

struct StabilityVerdict {
    StabilityClass verdict = StabilityClass::Stable;
    double slope = 0.0;
    double epsilon = 0.0;
};

inline constexpr double kDefaultStabilityEpsilon = 0.02;

inline StabilityVerdict classify_stability(const GrowthFit& fit,
                                           double epsilon = kDefaultStabilityEpsilon) {
    if (!(epsilon > 0.0)) throw DomainError("classify_stability: epsilon must be positive");
    StabilityVerdict v{StabilityClass::Stable, fit.slope, epsilon};
    if (fit.slope < -epsilon) {
        v.verdict = StabilityClass::Vanishing;
    } else if (fit.slope > epsilon) {
        v.verdict = StabilityClass::Exploding;
    }
    return v;
}

struct BernoulliFraction {
    std::vector<double> per_entry;
    double pooled = 0.0;
    std::size_t samples = 0;
};

/// Frequency of D_l[i] = 1 across traces, per coordinate and pooled.
inline BernoulliFraction bernoulli_fraction(std::span<const ForwardTrace> traces, std::size_t layer) {
    if (traces.empty()) throw DomainError("bernoulli_fraction: no traces");
    BernoulliFraction out;
    const std::size_t n = traces.front().indicators.at(layer).size();
    out.per_entry.assign(n, 0.0);
    for (const auto& t : traces) {
        const auto& d = t.indicators.at(layer);
        if (d.size() != n) throw DimensionError("bernoulli_fraction: traces of different widths");
        for (std::size_t i = 0; i < n; ++i) out.per_entry[i] += d[i];
    }
    double total = 0.0;
    for (auto& f : out.per_entry) {
        total += f;
        f /= static_cast<double>(traces.size());
    }
    out.pooled = total / (static_cast<double>(traces.size()) * static_cast<double>(n));
    out.samples = traces.size();
    return out;
}

/// Cross-tabulation of two binary variables:
///   a = (1,1), b = (1,0), c = (0,1), d = (0,0).
struct ContingencyTable2x2 {
    std::size_t a = 0, b = 0, c = 0, d = 0;

    std::size_t total() const noexcept { return a + b + c + d; }

    void add(bool first, bool second) noexcept {
        if (first) {
            second ? ++a : ++b;
        } else {
            second ? ++c : ++d;
        }
    }

    ContingencyTable2x2 transposed() const noexcept { return {a, c, b, d}; }
};

struct ChiSquaredResult {
    double chi2 = 0.0;
    double p_value = 1.0;
};

/// Pearson χ² test of independence on a 2×2 table (1 dof, no continuity
/// correction); p = P(χ²₁ > χ²) = erfc(√(χ²/2)).
inline ChiSquaredResult chi2_independence(const ContingencyTable2x2& t) {
    const double a = static_cast<double>(t.a), b = static_cast<double>(t.b);
    const double c = static_cast<double>(t.c), d = static_cast<double>(t.d);
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0) {
        throw DomainError("chi2_independence: a row or column marginal is zero");
    }
    const double n = a + b + c + d;
    const double det = a * d - b * c;
    ChiSquaredResult r;
    r.chi2 = n * det * det / (r1 * r2 * c1 * c2);
    r.p_value = jacspec::erfc(std::sqrt(r.chi2 / 2.0));
    return r;
}

struct ActivationWeightStats {
    double t_w = 0.0;  // fraction of positive entries of W_l
    double t_d = 0.0;  // fraction of ones in D_l
};

inline ActivationWeightStats activation_weight_stats(const DenseMatrix& w, const ForwardTrace& trace,
                                                     std::size_t layer) {
    const auto& d = trace.indicators.at(layer);
    if (w.rows() != d.size()) {
        throw DimensionError("activation_weight_stats: W is " + w.shape_string() + ", D_l has " +
                             std::to_string(d.size()) + " entries");
    }
    ActivationWeightStats s;
    std::size_t pos = 0;
    for (double v : w.values())
        if (v > 0.0) ++pos;
    s.t_w = static_cast<double>(pos) / static_cast<double>(w.size());
    double ones = 0.0;
    for (double v : d) ones += v;
    s.t_d = ones / static_cast<double>(d.size());
    return s;
}

inline double pearson_corr(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw DomainError("pearson_corr: need two equal-length samples of size >= 2");
    }
    const double m = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson_corr: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function with Stephens' small-sample
/// adjustment of the argument.
inline double kolmogorov_p_value(double statistic, std::size_t samples) {
    const double sn = std::sqrt(static_cast<double>(samples));
    const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw DomainError("ks_test: empty sample");
    std::sort(sample.begin(), sample.end());
    const double m = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
    }
    return {d, kolmogorov_p_value(d, sample.size())};
}

inline KsResult ks_uniform(std::vector<double> sample) {
    return ks_test(std::move(sample), [](double x) { return std::clamp(x, 0.0, 1.0); });
}

inline double standard_normal_cdf(double x) { return 0.5 * jacspec::erfc(-x / std::sqrt(2.0)); }

}  // namespace jacspec
