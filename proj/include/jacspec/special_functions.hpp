#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "jacspec/error.hpp"

namespace jacspec {

// erf/erfc come straight from the C library (correctly rounded to within an
// ulp or two on glibc); the inverses below are built on top of them.
inline double erf(double x) { return std::erf(x); }
inline double erfc(double x) { return std::erfc(x); }

namespace detail {

/// Giles' single-precision erf⁻¹ polynomial, written in terms of
/// w = -ln((1 - y)(1 + y)) so that callers near |y| = 1 can pass w exactly.
inline double erf_inv_seed(double y, double w) {
    double p;
    if (w < 5.0) {
        w -= 2.5;
        p = 2.81022636e-08;
        p = 3.43273939e-07 + p * w;
        p = -3.5233877e-06 + p * w;
        p = -4.39150654e-06 + p * w;
        p = 0.00021858087 + p * w;
        p = -0.00125372503 + p * w;
        p = -0.00417768164 + p * w;
        p = 0.246640727 + p * w;
        p = 1.50140941 + p * w;
    } else {
        w = std::sqrt(w) - 3.0;
        p = -0.000200214257;
        p = 0.000100950558 + p * w;
        p = 0.00134934322 + p * w;
        p = -0.00367342844 + p * w;
        p = 0.00573950773 + p * w;
        p = -0.0076224613 + p * w;
        p = 0.00943887047 + p * w;
        p = 1.00167406 + p * w;
        p = 2.83297682 + p * w;
    }
    return p * y;
}

inline constexpr double kTwoOverSqrtPi = 2.0 * std::numbers::inv_sqrtpi;

}  // namespace detail

/// x ≥ 0 with erfc(x) = q, for q ∈ (0, 1]. Accurate for tiny q, where
/// forming 1 - q would lose the information. Newton runs on ln erfc, which
/// stays well conditioned far into the tail where the seed is rough.
inline double erfc_inv_upper(double q) {
    double x;
    if (q > 1e-10) {
        x = detail::erf_inv_seed(1.0 - q, -std::log(q * (2.0 - q)));
    } else {
        // The polynomial is only fitted for w < ~40; use erfc(x) ≈ e^{-x²}/(x√π).
        x = std::sqrt(-std::log(q));
        for (int i = 0; i < 3; ++i) x = std::sqrt(-std::log(q) - std::log(x * std::sqrt(std::numbers::pi)));
    }
    const double log_q = std::log(q);
    for (int i = 0; i < 50; ++i) {
        const double e = jacspec::erfc(x);
        if (e == 0.0) {
            x *= 0.9;
            continue;
        }
        const double f = std::log(e) - log_q;
        const double slope = -detail::kTwoOverSqrtPi * std::exp(-x * x) / e;
        const double step = f / slope;
        x -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

/// Inverse error function on (-1, 1): polynomial seed refined by Newton
/// iterations on erf (on erfc for |y| > 0.5).
inline double erf_inv(double y) {
    if (!(std::abs(y) < 1.0)) {
        throw DomainError("erf_inv: argument must lie in (-1, 1), got " + std::to_string(y));
    }
    if (y == 0.0) return y;
    const double ay = std::abs(y);
    if (ay > 0.5) return std::copysign(erfc_inv_upper(1.0 - ay), y);

    double x = detail::erf_inv_seed(ay, -std::log((1.0 - ay) * (1.0 + ay)));
    for (int i = 0; i < 6; ++i) {
        const double f = jacspec::erf(x) - ay;
        const double step = f / (detail::kTwoOverSqrtPi * std::exp(-x * x));
        x -= step;
        if (std::abs(step) <= 1e-16 * std::abs(x)) break;
    }
    return std::copysign(x, y);
}

/// erfc⁻¹(q) = erf⁻¹(1 - q) for q ∈ (0, 2).
inline double erfc_inv(double q) {
    if (!(q > 0.0 && q < 2.0)) {
        throw DomainError("erfc_inv: argument must lie in (0, 2), got " + std::to_string(q));
    }
    if (q <= 1.0) return q == 1.0 ? 0.0 : erfc_inv_upper(q);
    return -erfc_inv_upper(2.0 - q);
}

}  // namespace jacspec
