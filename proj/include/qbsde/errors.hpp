#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbsde {

// Configuration-side failures (exit code 2 at the CLI).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingKeyError : public ConfigError {
public:
    explicit MissingKeyError(const std::string& key)
        : ConfigError("missing key: " + key), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class ParameterRangeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class NodeBudgetError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class TerminalBoundError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Expression syntax error. `position` is a byte offset into the source text
/// (equal to the text length when the input ended early).
class ParseError : public ConfigError {
public:
    ParseError(std::size_t position, std::string message, std::string token)
        : ConfigError("parse error at " + std::to_string(position) + ": " + message +
                      (token.empty() ? std::string(" (at end of input)")
                                     : " (near '" + token + "')")),
          position_(position), message_(std::move(message)), token_(std::move(token)) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& message() const noexcept { return message_; }
    const std::string& token() const noexcept { return token_; }

private:
    std::size_t position_;
    std::string message_;
    std::string token_;
};

struct DependencyViolation {
    int component;        // 1-based
    std::string variable; // e.g. "z3"
};

class DependencyError : public ConfigError {
public:
    explicit DependencyError(std::vector<DependencyViolation> violations);
    const std::vector<DependencyViolation>& violations() const noexcept { return violations_; }

private:
    std::vector<DependencyViolation> violations_;
};

// Numerical failures while evaluating or solving (exit code 3 at the CLI).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Domain error raised by expression evaluation; `position` locates the
/// offending node in the expression source.
class EvalError : public NumericalError {
public:
    EvalError(std::size_t position, const std::string& message)
        : NumericalError("evaluation error at " + std::to_string(position) + ": " + message),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace qbsde
