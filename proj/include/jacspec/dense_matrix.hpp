#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jacspec/error.hpp"

namespace jacspec {

/// Row-major dense matrix of doubles.
///
/// Construction from a value buffer rejects NaN/Inf entries. Element access
/// through operator() is unchecked so that builders can fill matrices in place.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_) {
            throw DimensionError("DenseMatrix: " + std::to_string(data_.size()) +
                                 " values supplied for a " + shape_string() + " matrix");
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) {
                throw DomainError("DenseMatrix: non-finite entry at flat index " +
                                  std::to_string(i));
            }
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix diagonal(std::span<const double> diag) {
        DenseMatrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    static DenseMatrix filled(std::size_t rows, std::size_t cols, double value) {
        DenseMatrix m(rows, cols);
        for (auto& v : m.data_) v = value;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::string shape_string() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_of(const DenseMatrix& m) { return m.shape_string(); }

/// c = a * b with a fixed i-k-j loop order. Exactly-zero entries of `a` are
/// skipped; this does not change any result bit because the accumulator
/// starts at +0 and adding a signed zero never changes a sum.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree (" + a.shape_string() + " * " +
                             b.shape_string() + ")");
    }
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    const std::size_t p = b.cols();
    DenseMatrix c(m, p);
    const double* bd = b.values().data();
    double* cd = c.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = cd + i * p;
        for (std::size_t l = 0; l < k; ++l) {
            const double aval = a(i, l);
            if (aval == 0.0) continue;
            const double* brow = bd + l * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += aval * brow[j];
        }
    }
    return c;
}

/// y = a * x
inline std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DimensionError("matvec: matrix " + a.shape_string() + " applied to vector of length " +
                             std::to_string(x.size()));
    }
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

/// y = aᵀ * x
inline std::vector<double> matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) {
        throw DimensionError("matvec_transposed: matrix " + a.shape_string() +
                             " applied to vector of length " + std::to_string(x.size()));
    }
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) y[j] += xi * r[j];
    }
    return y;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline DenseMatrix scaled(const DenseMatrix& a, double c) {
    DenseMatrix out = a;
    for (auto& v : out.values()) v *= c;
    return out;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("hadamard: shapes differ (" + a.shape_string() + " vs " +
                             b.shape_string() + ")");
    }
    DenseMatrix out(a.rows(), a.cols());
    auto o = out.values();
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
    return out;
}

/// a * diag(d): scales column j by d[j].
inline DenseMatrix scale_columns(const DenseMatrix& a, std::span<const double> d) {
    if (a.cols() != d.size()) {
        throw DimensionError("scale_columns: " + a.shape_string() + " with " +
                             std::to_string(d.size()) + " column factors");
    }
    DenseMatrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] *= d[j];
    }
    return out;
}

inline double frobenius_norm(const DenseMatrix& a) {
    // Scaled accumulation so that huge or tiny entries neither overflow nor flush.
    double scale = 0.0;
    for (double v : a.values()) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return 0.0;
    double sum = 0.0;
    for (double v : a.values()) {
        const double r = v / scale;
        sum += r * r;
    }
    return scale * std::sqrt(sum);
}

inline double norm2(std::span<const double> x) {
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return 0.0;
    double sum = 0.0;
    for (double v : x) {
        const double r = v / scale;
        sum += r * r;
    }
    return scale * std::sqrt(sum);
}

inline double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("max_abs_difference: shapes differ (" + a.shape_string() + " vs " +
                             b.shape_string() + ")");
    }
    double worst = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) worst = std::max(worst, std::abs(av[i] - bv[i]));
    return worst;
}

inline bool all_zero(const DenseMatrix& a) {
    for (double v : a.values())
        if (v != 0.0) return false;
    return true;
}

}  // namespace jacspec
