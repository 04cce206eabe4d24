#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fs3d/numerics/parameters.hpp"

namespace fs3d::trainer {

struct AdamSettings {
  double learning_rate = 0.0005;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

using NamedGradients = std::vector<std::pair<std::string, numerics::Array>>;

/// Adam with bias-corrected moments, state kept per parameter name.
class Adam {
 public:
  explicit Adam(AdamSettings settings = {});

  /// One update of the named entries of `params`; entries without a gradient
  /// are left untouched.
  void step(numerics::ParameterSet& params, const NamedGradients& gradients);

  std::size_t steps() const noexcept { return steps_; }
  const AdamSettings& settings() const noexcept { return settings_; }

 private:
  AdamSettings settings_;
  std::size_t steps_ = 0;
  std::unordered_map<std::string, numerics::Array> first_;
  std::unordered_map<std::string, numerics::Array> second_;
};

}  // namespace fs3d::trainer
