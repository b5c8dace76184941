#pragma once

#include <stdexcept>
#include <string>

namespace membrane {

/// Invalid user-supplied configuration (bad JSON, unknown keys, missing files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called with arguments violating its preconditions.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Two fields or cell sets live on different domains.
class DomainMismatch : public PreconditionError {
public:
    DomainMismatch() : PreconditionError("operands are defined on different domains") {}
};

/// The linear solver did not reach the requested tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

} // namespace membrane
