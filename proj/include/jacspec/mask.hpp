#pragma once

#include <cstddef>

#include "jacspec/dense_matrix.hpp"

namespace jacspec {

/// Elementwise multiplier B for one hidden weight matrix.
///
/// Every entry is 0 or `scale`; beta_n is the uniform bound on entries and
/// equals `scale` for all shipped pruning methods.
struct Mask {
    DenseMatrix matrix;
    double scale = 1.0;
    double beta_n = 1.0;
    std::size_t kept_count = 0;

    double kept_fraction() const {
        return matrix.empty() ? 0.0
                              : static_cast<double>(kept_count) / static_cast<double>(matrix.size());
    }
};

/// Mask with entries pattern[i] ? scale : 0 for a 0/1 pattern matrix.
inline Mask mask_from_pattern(const DenseMatrix& pattern, double scale) {
    Mask m;
    m.matrix = DenseMatrix(pattern.rows(), pattern.cols());
    m.scale = scale;
    m.beta_n = scale;
    auto src = pattern.values();
    auto dst = m.matrix.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] != 0.0) {
            dst[i] = scale;
            ++m.kept_count;
        }
    }
    return m;
}

}  // namespace jacspec
