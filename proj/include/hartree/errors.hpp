#pragma once

#include <stdexcept>
#include <string>

namespace hartree {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or input lies outside the domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf or a failed numerical diagnostic.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Root bracketing failed (no sign change in the search interval).
class BracketError : public NumericError {
public:
    using NumericError::NumericError;
};

/// An iterative solve did not reach its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iters, double nehari_residual,
                     double grad_residual)
        : Error(what), iters_(iters), nehari_residual_(nehari_residual),
          grad_residual_(grad_residual) {}

    int iters() const noexcept { return iters_; }
    double nehari_residual() const noexcept { return nehari_residual_; }
    double grad_residual() const noexcept { return grad_residual_; }

private:
    int iters_;
    double nehari_residual_;
    double grad_residual_;
};

/// Malformed or invalid configuration. Line/column are 1-based, 0 when unknown.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line = 0, int column = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                               std::to_string(column) + ")"
                         : what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// File could not be read/written or its content is malformed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A numerical verification of a structural property failed.
class VerificationError : public Error {
public:
    using Error::Error;
};

}  // namespace hartree
