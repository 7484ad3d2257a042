#pragma once

#include <stdexcept>
#include <string>

namespace odeident {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not match the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Result would leave the representable floating-point range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// An iterative kernel did not converge within its budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Branch enumeration was asked for a matrix with a nontrivial Jordan structure.
class DefectiveMatrix : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

/// An internal cross-check failed (e.g. a reassembled matrix is not real).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// The adaptive integrator could not advance (step-size underflow, step budget).
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double failure_time)
        : Error(what + " (t = " + std::to_string(failure_time) + ")"), time_(failure_time) {}

    double failure_time() const noexcept { return time_; }

private:
    double time_;
};

/// The integrated state became non-finite.
class DivergenceError : public IntegrationError {
public:
    using IntegrationError::IntegrationError;
};

/// DΦ(α₀) is rank deficient, so no injectivity certificate exists.
class NotIdentifiable : public Error {
public:
    NotIdentifiable(const std::string& what, double beta, double sigma_max, int rank)
        : Error(what), beta_(beta), sigma_max_(sigma_max), rank_(rank) {}

    double beta() const noexcept { return beta_; }
    double sigma_max() const noexcept { return sigma_max_; }
    int rank() const noexcept { return rank_; }

private:
    double beta_;
    double sigma_max_;
    int rank_;
};

/// Malformed input text; `line()` is 1-based (0 when unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace odeident
