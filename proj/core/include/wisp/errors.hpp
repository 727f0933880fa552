#pragma once

#include <stdexcept>
#include <string>

namespace wisp {

/// Bad scenario file or invalid user-supplied configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation refused to start or aborted because it would exceed a
/// configured resource budget (state-space size, work product, ...).
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver ran out of iterations before reaching tolerance.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual(residual) {}
    double residual;
};

/// A caller violated an interface contract at runtime (infeasible action
/// from a learner, inconsistent action/threshold pair, ...).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// The simulated chain reached a state with no outgoing transitions.
struct DeadStateError : std::runtime_error {
    explicit DeadStateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wisp
