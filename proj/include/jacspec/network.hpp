#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/ensembles.hpp"
#include "jacspec/error.hpp"
#include "jacspec/mask.hpp"
#include "jacspec/matrix_io.hpp"
#include "jacspec/scaled_product.hpp"
#include "jacspec/streams.hpp"

namespace jacspec {

struct MlpConfig {
    std::size_t input_dim = 0;   // d
    std::size_t width = 0;       // n
    std::size_t depth = 0;       // L
    std::size_t output_dim = 0;  // o; 0 means no output layer

    void validate() const {
        if (input_dim == 0 || width == 0 || depth == 0) {
            throw DomainError("MlpConfig: input_dim, width and depth must all be >= 1");
        }
    }
};

/// Bias-free ReLU MLP weights. hidden[l-1] holds W_l; masks, when present,
/// hold B_l and the effective layer is B_l ⊙ W_l.
struct NetworkWeights {
    DenseMatrix w_in;
    std::vector<DenseMatrix> hidden;
    std::optional<DenseMatrix> w_out;
    std::vector<Mask> masks;

    std::size_t depth() const noexcept { return hidden.size(); }
    bool has_masks() const noexcept { return !masks.empty(); }

    /// Effective weight of hidden layer l (1-based).
    DenseMatrix layer(std::size_t l) const {
        const auto& w = hidden.at(l - 1);
        return has_masks() ? hadamard(masks.at(l - 1).matrix, w) : w;
    }

    void validate(const MlpConfig& cfg) const {
        cfg.validate();
        if (w_in.rows() != cfg.width || w_in.cols() != cfg.input_dim) {
            throw DimensionError("NetworkWeights: w_in is " + w_in.shape_string() + ", expected " +
                                 std::to_string(cfg.width) + "x" + std::to_string(cfg.input_dim));
        }
        if (hidden.size() != cfg.depth) {
            throw DimensionError("NetworkWeights: " + std::to_string(hidden.size()) +
                                 " hidden layers for depth " + std::to_string(cfg.depth));
        }
        for (std::size_t l = 0; l < hidden.size(); ++l) {
            if (hidden[l].rows() != cfg.width || hidden[l].cols() != cfg.width) {
                throw DimensionError("NetworkWeights: hidden layer " + std::to_string(l + 1) +
                                     " is " + hidden[l].shape_string());
            }
        }
        if (has_masks()) {
            if (masks.size() != hidden.size()) {
                throw DimensionError("NetworkWeights: " + std::to_string(masks.size()) +
                                     " masks for " + std::to_string(hidden.size()) + " layers");
            }
            for (std::size_t l = 0; l < masks.size(); ++l) {
                if (masks[l].matrix.rows() != cfg.width || masks[l].matrix.cols() != cfg.width) {
                    throw DimensionError("NetworkWeights: mask " + std::to_string(l + 1) + " is " +
                                         masks[l].matrix.shape_string());
                }
            }
        }
        if (w_out && w_out->cols() != cfg.width) {
            throw DimensionError("NetworkWeights: w_out is " + w_out->shape_string());
        }
    }
};

/// Preactivations Y_0..Y_L and indicator diagonals D_0..D_L (D_k[i] = 1 iff
/// Y_k[i] > 0, so φ'(0) = 0). D_L is kept for diagnostics; Jacobians use
/// D_0..D_{L-1} only.
struct ForwardTrace {
    std::vector<std::vector<double>> preactivations;
    std::vector<std::vector<double>> indicators;
    std::optional<std::vector<double>> output;

    std::size_t depth() const noexcept {
        return preactivations.empty() ? 0 : preactivations.size() - 1;
    }
};

inline std::vector<double> relu(std::span<const double> y) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] > 0.0 ? y[i] : 0.0;
    return out;
}

inline std::vector<double> relu_indicator(std::span<const double> y) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] > 0.0 ? 1.0 : 0.0;
    return out;
}

namespace detail {

inline void require_finite(std::span<const double> y, std::size_t layer) {
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw OverflowError(layer, "forward: non-finite preactivation at layer " +
                                           std::to_string(layer));
        }
    }
}

}  // namespace detail

inline ForwardTrace forward(const MlpConfig& config, const NetworkWeights& weights,
                            std::span<const double> x) {
    weights.validate(config);
    if (x.size() != config.input_dim) {
        throw DimensionError("forward: input of length " + std::to_string(x.size()) +
                             ", expected " + std::to_string(config.input_dim));
    }
    ForwardTrace trace;
    trace.preactivations.reserve(config.depth + 1);
    trace.indicators.reserve(config.depth + 1);

    trace.preactivations.push_back(matvec(weights.w_in, x));
    detail::require_finite(trace.preactivations.back(), 0);
    trace.indicators.push_back(relu_indicator(trace.preactivations.back()));
    for (std::size_t l = 1; l <= config.depth; ++l) {
        const auto act = relu(trace.preactivations.back());
        trace.preactivations.push_back(matvec(weights.layer(l), act));
        detail::require_finite(trace.preactivations.back(), l);
        trace.indicators.push_back(relu_indicator(trace.preactivations.back()));
    }
    if (weights.w_out) trace.output = matvec(*weights.w_out, relu(trace.preactivations.back()));
    return trace;
}

/// J_k = (W_L D_{L-1}) ⋯ (W_k D_{k-1}) for 1 ≤ k ≤ L, log-scaled.
///
/// The recursion J_k = J_{k+1} W_k D_{k-1} also gives J_L = W_L D_{L-1},
/// so k = L is supported alongside 1..L-1.
inline ScaledMatrix jacobian(const ForwardTrace& trace, const NetworkWeights& weights,
                             std::size_t k) {
    const std::size_t depth = weights.depth();
    if (k < 1 || k > depth) {
        throw DomainError("jacobian: layer index " + std::to_string(k) + " outside [1, " +
                          std::to_string(depth) + "]");
    }
    if (trace.depth() != depth) {
        throw DimensionError("jacobian: trace depth " + std::to_string(trace.depth()) +
                             " does not match weights depth " + std::to_string(depth));
    }
    auto acc = ScaledMatrix::from_dense(scale_columns(weights.layer(k), trace.indicators[k - 1]));
    for (std::size_t l = k + 1; l <= depth; ++l) {
        if (acc.is_zero()) break;
        acc.left_multiply(scale_columns(weights.layer(l), trace.indicators[l - 1]));
    }
    return acc;
}

/// ln ‖J_1‖ with its power-iteration status; log_norm = -inf when J_1 = 0.
inline LogNormEstimate jacobian_log_norm_estimate(const MlpConfig& config,
                                                  const NetworkWeights& weights,
                                                  std::span<const double> x,
                                                  std::size_t k = 1) {
    const auto trace = forward(config, weights, x);
    return jacobian(trace, weights, k).log_spectral_norm();
}

inline double jacobian_log_norm(const MlpConfig& config, const NetworkWeights& weights,
                                std::span<const double> x) {
    return jacobian_log_norm_estimate(config, weights, x).log_norm;
}

namespace detail {

/// Propagates v as Y_{k-1} through layers k..L; returns Y_L and appends the
/// positivity pattern of every Y_l passed through φ.
inline std::vector<double> propagate_from(const NetworkWeights& weights, std::size_t k,
                                          std::vector<double> v,
                                          std::vector<std::vector<double>>* patterns) {
    for (std::size_t l = k; l <= weights.depth(); ++l) {
        if (patterns) patterns->push_back(relu_indicator(v));
        v = matvec(weights.layer(l), relu(v));
    }
    return v;
}

}  // namespace detail

/// Central differences of Y_L with respect to Y_{k-1}.
///
/// Throws KinkProximityError when any coordinate of Y_{k-1}..Y_{L-1} lies
/// within 10·eps of zero, or when a perturbation flips a ReLU pattern.
inline DenseMatrix finite_difference_jacobian(const MlpConfig& config,
                                              const NetworkWeights& weights,
                                              std::span<const double> x, std::size_t k,
                                              double eps) {
    if (!(eps > 0.0)) throw DomainError("finite_difference_jacobian: eps must be positive");
    const auto trace = forward(config, weights, x);
    const std::size_t depth = weights.depth();
    if (k < 1 || k > depth) {
        throw DomainError("finite_difference_jacobian: layer index " + std::to_string(k) +
                          " outside [1, " + std::to_string(depth) + "]");
    }
    for (std::size_t l = k - 1; l < depth; ++l) {
        for (double y : trace.preactivations[l]) {
            if (std::abs(y) <= 10.0 * eps) {
                throw KinkProximityError("finite_difference_jacobian: |Y_" + std::to_string(l) +
                                         "| entry within 10*eps of a ReLU kink; resample");
            }
        }
    }

    const auto& base = trace.preactivations[k - 1];
    const std::size_t n = base.size();
    const std::size_t out_dim = trace.preactivations.back().size();
    DenseMatrix jac(out_dim, n);
    for (std::size_t j = 0; j < n; ++j) {
        auto plus = base;
        auto minus = base;
        plus[j] += eps;
        minus[j] -= eps;
        std::vector<std::vector<double>> pat_plus, pat_minus;
        const auto y_plus = detail::propagate_from(weights, k, std::move(plus), &pat_plus);
        const auto y_minus = detail::propagate_from(weights, k, std::move(minus), &pat_minus);
        for (std::size_t l = 0; l < pat_plus.size(); ++l) {
            if (pat_plus[l] != trace.indicators[k - 1 + l] ||
                pat_minus[l] != trace.indicators[k - 1 + l]) {
                throw KinkProximityError(
                    "finite_difference_jacobian: perturbation flipped a ReLU pattern; resample");
            }
        }
        for (std::size_t i = 0; i < out_dim; ++i) jac(i, j) = (y_plus[i] - y_minus[i]) / (2.0 * eps);
    }
    return jac;
}

/// x ~ N(0, I_d) rescaled so that ‖x‖₂ = √d.
inline std::vector<double> synthetic_input(RngStream& rng, std::size_t d) {
    auto x = sample_gaussian_vector(rng, d, 1.0);
    const double norm = norm2(x);
    const double target = std::sqrt(static_cast<double>(d));
    for (auto& v : x) v *= target / norm;
    return x;
}

/// Plain text, one decimal real per line; blank lines are ignored.
inline std::vector<double> load_input_vector(const std::filesystem::path& path,
                                             std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input vector " + path.string());
    std::vector<double> x;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        x.push_back(parse_double(std::string_view(line).substr(first, last - first + 1)));
    }
    if (expected_dim != 0 && x.size() != expected_dim) {
        throw DimensionError("input vector " + path.string() + " has " + std::to_string(x.size()) +
                             " entries, expected " + std::to_string(expected_dim));
    }
    return x;
}

/// Draws a full network: W_in ~ N(0, 2/d), hidden layers from `ensemble`,
/// W_out ~ N(0, 2/n) when config.output_dim > 0. Layer l reads stream
/// (Hidden, l) of `plan`, so a truncated network shares its layers with the
/// full-depth one.
inline NetworkWeights sample_network(const MlpConfig& config, const EnsembleSpec& ensemble,
                                     const StreamPlan& plan) {
    config.validate();
    ensemble.validate();
    if (ensemble.n != config.width) {
        throw DimensionError("sample_network: ensemble width " + std::to_string(ensemble.n) +
                             " differs from network width " + std::to_string(config.width));
    }
    NetworkWeights w;
    {
        auto rng = plan.stream(StreamRole::InputLayer);
        w.w_in = sample_gaussian_matrix(rng, config.width, config.input_dim,
                                        2.0 / static_cast<double>(config.input_dim));
    }
    w.hidden.reserve(config.depth);
    for (std::size_t l = 1; l <= config.depth; ++l) {
        auto rng = plan.stream(StreamRole::Hidden, l);
        w.hidden.push_back(sample_layer(rng, ensemble));
    }
    if (config.output_dim > 0) {
        auto rng = plan.stream(StreamRole::OutputLayer);
        w.w_out = sample_gaussian_matrix(rng, config.output_dim, config.width,
                                         2.0 / static_cast<double>(config.width));
    }
    return w;
}

}  // namespace jacspec
