#pragma once

#include <cmath>
#include <cstdint>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/rng.hpp"

namespace jacspec::test {

inline DenseMatrix random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols,
                                 double variance = 1.0) {
    auto rng = make_rng(seed, 0xC0FFEE);
    DenseMatrix m(rows, cols);
    const double sd = std::sqrt(variance);
    for (auto& v : m.values()) v = sd * rng.normal();
    return m;
}

/// Triple-loop product in the textbook i-j-k order, independent of matmul().
inline DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double acc = 0.0L;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
            c(i, j) = static_cast<double>(acc);
        }
    return c;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace jacspec::test
