#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "fs3d/trainer/config.hpp"
#include "json.hpp"

namespace fs3d::cli {

/// Synthetic source and few-shot target datasets written by gen-data.
struct DataConfig {
  std::string source_preset = "source";
  std::size_t source_count = 60;
  std::string target_preset = "target";
  std::size_t target_count = 10;
  std::uint64_t seed = 7;
  std::size_t resolution = 32;
  std::size_t grid_resolution = 32;
  std::size_t ray_samples = 24;
  double temperature = 0.05;
  std::size_t views = 8;
  bool with_rgb = true;

  std::uint64_t source_seed() const;
  std::uint64_t target_seed() const;
};

struct EvalConfig {
  std::string preset = "desk";
  std::uint64_t seed = 7;
};

/// Everything a command reads; stored as one JSON document with the sections
/// "data", "pretrain", "adapt" and "eval".
struct RunConfig {
  DataConfig data;
  trainer::PretrainConfig pretrain;
  trainer::AdaptationConfig adapt;
  EvalConfig eval;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing sections and keys keep their defaults; unknown keys are a ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fs3d::cli
