#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fs3d/rdp/objective.hpp"
#include "json.hpp"

namespace fs3d::trainer {

/// Few-shot adaptation settings.
struct AdaptationConfig {
  rdp::Setup setup = rdp::Setup::A;
  rdp::Mode mode = rdp::Mode::Ours;
  rdp::LossWeights weights;
  double r1_weight = 1.0;
  std::size_t batch_size = 4;
  double lr_generator = 0.0005;
  double lr_discriminator = 0.0005;
  std::size_t iterations = 2000;
  std::uint64_t seed = 7;
  std::size_t grid_resolution = 16;
  std::size_t render_resolution = 32;
  std::size_t ray_samples = 24;
  double temperature = 0.05;
  std::size_t views = 8;
  std::string source_checkpoint;
  std::string target_data;

  /// Throws ConfigError on negative weights or rates, batch < 2 and the
  /// FreezeT / Setup B combination.
  void validate() const;
};

/// Source-model training settings.
struct PretrainConfig {
  double reg_weight = 0.01;
  double r1_weight = 1.0;
  std::size_t batch_size = 4;
  double lr_generator = 0.002;
  double lr_discriminator = 0.002;
  std::size_t iterations = 1000;
  std::uint64_t seed = 7;
  std::size_t grid_resolution = 16;
  std::size_t render_resolution = 32;
  std::size_t ray_samples = 24;
  double temperature = 0.05;
  std::size_t views = 8;
  std::string source_data;

  void validate() const;
};

nlohmann::json to_json(const AdaptationConfig& config);
nlohmann::json to_json(const PretrainConfig& config);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
AdaptationConfig adaptation_config_from_json(const nlohmann::json& doc);
PretrainConfig pretrain_config_from_json(const nlohmann::json& doc);

}  // namespace fs3d::trainer
