#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jacspec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation (erf_inv(1), s = 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A forward pass produced a non-finite preactivation.
class OverflowError : public Error {
public:
    OverflowError(std::size_t layer, const std::string& what)
        : Error(what), layer_(layer) {}

    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

/// Finite differences would straddle a ReLU kink; the caller should resample.
class KinkProximityError : public Error {
public:
    using Error::Error;
};

class EmptyMaskError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace jacspec
