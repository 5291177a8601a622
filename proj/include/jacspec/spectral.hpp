#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/error.hpp"

namespace jacspec {

struct SpectralEstimate {
    double value = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double rel_residual = 0.0;
};

inline constexpr double kDefaultSpectralTol = 1e-10;
inline constexpr std::size_t kDefaultSpectralMaxIter = 10000;

namespace detail {

// Iterations without a fresh residual minimum before a run counts as stalled.
inline constexpr std::size_t kStallWindow = 200;

inline SpectralEstimate power_iterate(const DenseMatrix& a, std::vector<double> v, double tol,
                                      std::size_t budget) {
    SpectralEstimate est;
    const double vnorm = norm2(v);
    for (auto& x : v) x /= vnorm;

    double best_residual = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    for (std::size_t it = 1; it <= budget; ++it) {
        const auto u = matvec(a, v);
        const double sigma = norm2(u);
        est.iterations = it;
        est.value = sigma;
        if (sigma == 0.0) {
            // v lies in the null space; caller decides whether to restart.
            est.rel_residual = std::numeric_limits<double>::infinity();
            return est;
        }
        auto w = matvec_transposed(a, u);
        const double lambda = sigma * sigma;
        double r2 = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = w[i] / lambda - v[i];
            r2 += d * d;
        }
        est.rel_residual = std::sqrt(r2);
        if (est.rel_residual <= tol) {
            est.converged = true;
            return est;
        }
        if (est.rel_residual < best_residual * (1.0 - 1e-3)) {
            best_residual = est.rel_residual;
            since_best = 0;
        } else if (++since_best >= kStallWindow) {
            return est;
        }
        const double wn = norm2(w);
        for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / wn;
    }
    return est;
}

}  // namespace detail

/// Largest singular value by power iteration on AᵀA.
///
/// Starts from the normalized all-ones vector. If that run lands in the null
/// space or stalls, one restart is made from e₁ with the remaining budget and
/// the better of the two runs is returned. Non-convergence is reported through
/// `converged`, never thrown.
inline SpectralEstimate spectral_norm(const DenseMatrix& a, double tol = kDefaultSpectralTol,
                                      std::size_t max_iter = kDefaultSpectralMaxIter) {
    if (a.empty()) throw DimensionError("spectral_norm: empty matrix");
    if (!(tol > 0.0)) throw DomainError("spectral_norm: tol must be positive");
    if (all_zero(a)) return {0.0, 0, true, 0.0};

    auto first = detail::power_iterate(a, std::vector<double>(a.cols(), 1.0), tol, max_iter);
    if (first.converged || first.iterations >= max_iter) return first;

    std::vector<double> e1(a.cols(), 0.0);
    e1[0] = 1.0;
    auto second = detail::power_iterate(a, std::move(e1), tol, max_iter - first.iterations);
    second.iterations += first.iterations;
    if (second.converged) return second;
    // Neither converged: keep the larger estimate (power iteration only underestimates).
    if (first.value >= second.value) {
        first.iterations = second.iterations;
        return first;
    }
    return second;
}

/// Singular values in descending order via one-sided cyclic Jacobi.
/// Intended as an oracle for small matrices (both dimensions ≤ 512).
inline std::vector<double> svd_reference(const DenseMatrix& a) {
    if (a.empty()) throw DimensionError("svd_reference: empty matrix");
    if (a.rows() > 512 || a.cols() > 512) {
        throw DimensionError("svd_reference: " + a.shape_string() + " exceeds oracle size 512");
    }
    // Orthogonalize the columns of the taller orientation; columns are stored
    // as rows of `g` for contiguous access.
    DenseMatrix g = a.rows() >= a.cols() ? transpose(a) : a;
    const std::size_t k = g.rows();
    const std::size_t len = g.cols();
    constexpr double eps = 1e-15;

    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < k; ++p) {
            for (std::size_t q = p + 1; q < k; ++q) {
                auto gp = g.row(p);
                auto gq = g.row(q);
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < len; ++i) {
                    alpha += gp[i] * gp[i];
                    beta += gq[i] * gq[i];
                    gamma += gp[i] * gq[i];
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t =
                    std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < len; ++i) {
                    const double x = gp[i];
                    const double y = gq[i];
                    gp[i] = c * x - s * y;
                    gq[i] = s * x + c * y;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sv(k);
    for (std::size_t p = 0; p < k; ++p) sv[p] = norm2(g.row(p));
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

}  // namespace jacspec
