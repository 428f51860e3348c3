#pragma once

#include <stdexcept>
#include <string>

namespace dosefind {

/// An argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An invalid or inconsistent configuration value. `field()` names the
/// offending key so callers can report it.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Outcomes submitted that do not match the trial protocol (wrong dose,
/// too few patients).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation attempted on a trial that has already stopped.
class LifecycleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dosefind
