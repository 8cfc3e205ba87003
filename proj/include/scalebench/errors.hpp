#pragma once

#include <stdexcept>
#include <string>

namespace scalebench {

/// Invalid configuration or input data. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model assembly exceeded the compute budget of its task (exit code 2).
class GateFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an assembly contains a component with neither a closed-form
/// nor a measured FLOPs value.
class UnaccountedComponent : public std::invalid_argument {
 public:
  explicit UnaccountedComponent(const std::string& name)
      : std::invalid_argument("unaccounted component: '" + name +
                              "' has no closed-form or measured FLOPs"),
        component_(name) {}
  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

/// Training produced a NaN/Inf loss (exit code 3).
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, long long batch_id)
      : std::runtime_error(what), batch_id_(batch_id) {}
  long long batch_id() const noexcept { return batch_id_; }

 private:
  long long batch_id_;
};

}  // namespace scalebench
