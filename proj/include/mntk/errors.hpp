#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "mntk/trajectory.hpp"

namespace mntk {

/// Precondition violated by caller-supplied data (shape, finiteness, domain).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs that make the reference kernel singular (parallel or duplicate rows).
class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run produced a non-finite state or exceeded the loss ceiling.
/// Carries whatever was valid up to the failure point.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double t, Eigen::VectorXd last_state,
                  Trajectory partial = {})
      : std::runtime_error(what),
        t_(t),
        last_state_(std::move(last_state)),
        partial_(std::move(partial)) {}

  double t() const noexcept { return t_; }
  const Eigen::VectorXd& last_state() const noexcept { return last_state_; }
  const Trajectory& partial() const noexcept { return partial_; }
  Trajectory& partial() noexcept { return partial_; }

 private:
  double t_;
  Eigen::VectorXd last_state_;
  Trajectory partial_;
};

/// Malformed dataset file. byte_offset points at the offending byte.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t byte_offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic sampling could not satisfy the non-parallel constraint.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mntk
