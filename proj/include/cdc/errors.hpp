#pragma once

#include <stdexcept>
#include <string>

namespace cdc {

// Configuration problems detected while building networks or parsing configs.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation called in the wrong order (backward before forward, step without grads).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input value outside an operation's contractual domain.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Wire-format or payload integrity violation.
struct CorruptionError : std::runtime_error {
  explicit CorruptionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed dataset file.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  long step;
  DivergenceError(const std::string& msg, long at)
      : std::runtime_error(msg + " (step " + std::to_string(at) + ")"), step(at) {}
};

}  // namespace cdc
