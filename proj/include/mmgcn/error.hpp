#pragma once

#include <stdexcept>
#include <string>

namespace mmgcn {

/// Precondition violation: bad shapes, out-of-range indices, malformed ranges.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced (or would produce) a non-finite or singular result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset or checkpoint files that are missing or fail validation.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run configuration that cannot be resolved; `field()` names the culprit.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mmgcn
