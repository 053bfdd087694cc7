#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ecgpcac {

/// Caller broke a documented precondition (dimensions, ranges, ordering).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DiscretizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Plant state became non-finite. Carries the step index at which it happened.
class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(std::size_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Configuration parse or validation failure. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace ecgpcac
