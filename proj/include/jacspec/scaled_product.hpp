#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"
#include "jacspec/spectral.hpp"

namespace jacspec {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Log of the spectral norm of a ScaledMatrix, with the power-iteration status.
struct LogNormEstimate {
    double log_norm = kNegInf;
    bool converged = true;
    std::size_t iterations = 0;
};

/// exp(log_scale) · unit, with ‖unit‖_F = 1 after every renormalization.
///
/// A zero product is represented by an all-zero unit and log_scale = -inf.
class ScaledMatrix {
public:
    ScaledMatrix() = default;
    ScaledMatrix(DenseMatrix unit, double log_scale)
        : unit_(std::move(unit)), log_scale_(log_scale) {}

    /// Normalizes `m` by its Frobenius norm.
    static ScaledMatrix from_dense(DenseMatrix m) {
        ScaledMatrix out;
        out.unit_ = std::move(m);
        out.log_scale_ = 0.0;
        out.renormalize();
        return out;
    }

    const DenseMatrix& unit() const noexcept { return unit_; }
    double log_scale() const noexcept { return log_scale_; }
    bool is_zero() const noexcept { return log_scale_ == kNegInf; }

    /// this ← factor · this
    void left_multiply(const DenseMatrix& factor) {
        if (factor.cols() != unit_.rows()) {
            throw DimensionError("accumulate_product: factor " + factor.shape_string() +
                                 " cannot left-multiply " + unit_.shape_string());
        }
        if (is_zero()) {
            unit_ = DenseMatrix(factor.rows(), unit_.cols());
            return;
        }
        unit_ = matmul(factor, unit_);
        renormalize();
    }

    LogNormEstimate log_spectral_norm(double tol = kDefaultSpectralTol,
                                      std::size_t max_iter = kDefaultSpectralMaxIter) const {
        if (is_zero()) return {};
        const auto est = spectral_norm(unit_, tol, max_iter);
        return {log_scale_ + std::log(est.value), est.converged, est.iterations};
    }

    /// Materializes exp(log_scale)·unit; only meaningful when it fits in a double.
    DenseMatrix to_dense() const {
        if (is_zero()) return DenseMatrix(unit_.rows(), unit_.cols());
        return scaled(unit_, std::exp(log_scale_));
    }

private:
    void renormalize() {
        const double f = frobenius_norm(unit_);
        if (f == 0.0) {
            log_scale_ = kNegInf;
            return;
        }
        for (auto& v : unit_.values()) v /= f;
        log_scale_ += std::log(f);
    }

    DenseMatrix unit_;
    double log_scale_ = 0.0;
};

/// Product F_last ⋯ F_2 F_1 of the factors, given in application order
/// (each new factor multiplies from the left).
inline ScaledMatrix accumulate_product(std::span<const DenseMatrix> factors) {
    if (factors.empty()) throw DimensionError("accumulate_product: empty factor stream");
    const std::size_t n = factors.front().rows();
    for (const auto& f : factors) {
        if (f.rows() != n || f.cols() != n) {
            throw DimensionError("accumulate_product: expected " + std::to_string(n) + "x" +
                                 std::to_string(n) + " factors, got " + f.shape_string());
        }
    }
    auto acc = ScaledMatrix::from_dense(factors.front());
    for (std::size_t i = 1; i < factors.size(); ++i) acc.left_multiply(factors[i]);
    return acc;
}

}  // namespace jacspec
