#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wirepinn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid device/run configuration (bad geometry, malformed config file).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular system, failed quadrature, domain violation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Mismatched vector/matrix dimensions or mesh mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Caller violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Newton iteration did not reach tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Malformed or incompatible file. `line()` is 0 for binary containers.
class LoadError : public Error {
public:
    LoadError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace wirepinn
