#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace husimi {

/// Caller broke a precondition (dimension mismatch, bad step size, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model or symbol lacks a derivative or closed form the operation needs.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical quadrature did not reach the requested tolerance.
class ToleranceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampling strategy is not admissible for the requested state.
class StrategyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A trajectory left the admissible region or produced non-finite values.
class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(const std::string& what, std::vector<std::size_t> failed)
      : std::runtime_error(what), failed_nodes_(std::move(failed)) {}

  const std::vector<std::size_t>& failed_nodes() const noexcept { return failed_nodes_; }

 private:
  std::vector<std::size_t> failed_nodes_;
};

/// Bad configuration text. `line` is 0 when the problem is not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string field = {}, std::size_t line = 0)
      : std::runtime_error(what), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

}  // namespace husimi
