#pragma once

#include <stdexcept>
#include <string>

namespace iontrap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad configuration, out-of-range index, dimension mismatch.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (no convergence, singular system, ...).
/// `residual` carries the last residual norm when one is meaningful.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace iontrap
