#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "fs3d/adversarial/adversarial.hpp"
#include "fs3d/data/dataset.hpp"
#include "fs3d/generator/generator.hpp"
#include "fs3d/rdp/objective.hpp"
#include "fs3d/renderer/renderer.hpp"
#include "fs3d/trainer/checkpoint.hpp"
#include "fs3d/trainer/config.hpp"
#include "fs3d/trainer/optimizer.hpp"

namespace fs3d::trainer {

/// One row of losses.tsv plus the discriminator side of the step.
struct StepLog {
  std::size_t step = 0;
  double total = 0.0;
  rdp::TermBreakdown breakdown;
  double d_mask = 0.0;  // includes the weighted R1 penalty
  double d_rgb = 0.0;
};

/// Everything a training step reads and updates. Pretraining runs the same
/// step as Setup B without relative-distance terms and without a source model.
struct TrainingState {
  rdp::Setup setup = rdp::Setup::A;
  rdp::Mode mode = rdp::Mode::Ours;
  rdp::LossWeights weights;
  double r1_weight = 1.0;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  renderer::RenderSettings render;
  std::vector<renderer::Camera> cameras;

  std::optional<generator::Generator> source;
  generator::Generator target;
  adversarial::Discriminator d_mask;
  std::optional<adversarial::Discriminator> d_rgb;
  Adam g_optimizer;
  Adam d_mask_optimizer;
  Adam d_rgb_optimizer;

  /// Real images; cameras[v] is the camera of view v of every sample.
  const data::Dataset* real = nullptr;
};

/// Latent codes of step `step`.
generator::LatentBatch step_latents(const TrainingState& state, std::size_t step);
/// Ring index of batch entry i at step t: (t * batch + i) mod views.
std::vector<std::size_t> step_views(const TrainingState& state, std::size_t step);

/// One discriminator update followed by one generator update on a shared
/// latent batch and camera assignment. A non-finite value raises NumericError
/// naming the term that produced it.
StepLog training_step(TrainingState& state, std::size_t step);

using StepCallback = std::function<void(const StepLog&)>;

struct RunResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
};

/// Trains a source generator from scratch against both discriminators. The
/// dataset needs at least 50 shapes with RGB views on the configured ring.
RunResult pretrain_source(const PretrainConfig& config, const data::Dataset& source,
                          const StepCallback& on_step = nullptr);

/// State of an adaptation run at step 0: target and discriminators copied from
/// the source checkpoint, mappings frozen, texture frozen under FreezeT.
TrainingState adaptation_state(const AdaptationConfig& config, const Checkpoint& source,
                               const data::Dataset& target);

RunResult adapt(const AdaptationConfig& config, const Checkpoint& source, const data::Dataset& target,
                const StepCallback& on_step = nullptr);

/// Tab-separated columns step, total, adv_mask, adv_rgb, reg, geo, mask, tex,
/// rgb with a header line; values printed with 17 significant digits.
void write_loss_log(const std::filesystem::path& path, const std::vector<StepLog>& log);
/// Columns step, d_mask, d_rgb.
void write_discriminator_log(const std::filesystem::path& path, const std::vector<StepLog>& log);
/// Parses a file written by write_loss_log.
std::vector<StepLog> read_loss_log(const std::filesystem::path& path);

}  // namespace fs3d::trainer
