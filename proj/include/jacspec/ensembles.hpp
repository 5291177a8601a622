#pragma once

#include <cmath>
#include <cstddef>
#include <variant>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"
#include "jacspec/rng.hpp"

namespace jacspec {

/// i.i.d. N(0, sigma_w2 / n) entries.
struct IidEnsemble {
    double sigma_w2 = 2.0;
};

/// W_ind + eta · w with one shared scalar w per layer; both terms N(0, 2/n).
struct CorrelatedEnsemble {
    double eta = 0.0;
    bool normalize_variance = false;
};

struct EnsembleSpec {
    std::variant<IidEnsemble, CorrelatedEnsemble> kind;
    std::size_t n = 0;

    void validate() const {
        if (n == 0) throw DomainError("EnsembleSpec: width must be positive");
        if (const auto* iid = std::get_if<IidEnsemble>(&kind)) {
            if (!(iid->sigma_w2 > 0.0)) throw DomainError("EnsembleSpec: sigma_w2 must be > 0");
        } else if (!(std::get<CorrelatedEnsemble>(kind).eta >= 0.0)) {
            throw DomainError("EnsembleSpec: eta must be >= 0");
        }
    }
};

inline std::vector<double> sample_gaussian_vector(RngStream& rng, std::size_t len, double variance) {
    if (!(variance >= 0.0)) throw DomainError("sample_gaussian_vector: negative variance");
    const double sd = std::sqrt(variance);
    std::vector<double> v(len);
    for (auto& x : v) x = sd * rng.normal();
    return v;
}

/// Row-major fill with i.i.d. N(0, variance) entries.
inline DenseMatrix sample_gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols,
                                          double variance) {
    if (!(variance >= 0.0)) throw DomainError("sample_gaussian_matrix: negative variance");
    const double sd = std::sqrt(variance);
    DenseMatrix m(rows, cols);
    for (auto& x : m.values()) x = sd * rng.normal();
    return m;
}

/// W_ind + eta·w, optionally divided by √(1+eta²).
///
/// W_ind is drawn first (same draw order as sample_gaussian_matrix) and the
/// shared scalar w last, so eta = 0 reproduces sample_gaussian_matrix bit for bit.
inline DenseMatrix sample_correlated_layer(RngStream& rng, std::size_t n, double base_variance,
                                           double eta, bool normalize) {
    if (!(eta >= 0.0)) throw DomainError("sample_correlated_layer: eta must be >= 0");
    DenseMatrix m = sample_gaussian_matrix(rng, n, n, base_variance);
    const double shared = std::sqrt(base_variance) * rng.normal();
    if (eta == 0.0) return m;
    const double offset = eta * shared;
    const double divisor = normalize ? std::sqrt(1.0 + eta * eta) : 1.0;
    for (auto& x : m.values()) x = (x + offset) / divisor;
    return m;
}

/// One hidden layer drawn from `spec` (entry variance sigma_w2/n or 2/n).
inline DenseMatrix sample_layer(RngStream& rng, const EnsembleSpec& spec) {
    const double n = static_cast<double>(spec.n);
    if (const auto* iid = std::get_if<IidEnsemble>(&spec.kind)) {
        return sample_gaussian_matrix(rng, spec.n, spec.n, iid->sigma_w2 / n);
    }
    const auto& corr = std::get<CorrelatedEnsemble>(spec.kind);
    return sample_correlated_layer(rng, spec.n, 2.0 / n, corr.eta, corr.normalize_variance);
}

}  // namespace jacspec
