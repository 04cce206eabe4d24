#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fs3d/cli/run_config.hpp"
#include "fs3d/metrics/metrics.hpp"
#include "fs3d/trainer/checkpoint.hpp"

namespace fs3d::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Parses `args` (without the program name) and runs one command. Normal output
/// goes to `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes `<dir>/source` and `<dir>/target` datasets.
void generate_datasets(const DataConfig& config, const std::filesystem::path& dir);

/// Renders `samples` fixed-seed generator samples on the camera ring as one
/// mask grid (`masks.pgm`) and one color grid (`rgb.ppm`): a row per sample,
/// a column per view.
void render_grid(const trainer::Checkpoint& checkpoint, std::size_t samples, std::size_t views,
                 std::size_t resolution, std::uint64_t seed, const std::filesystem::path& dir);

struct AblationRow {
  std::string label;
  metrics::MetricReport report;
};

/// Adapts once per row of the loss-term matrix (full model, then each active
/// relative-distance term switched off) and evaluates every result. Row outputs
/// go to `<dir>/<label>/`.
std::vector<AblationRow> run_ablation(const RunConfig& config, const trainer::Checkpoint& source,
                                      const std::filesystem::path& target_dir, const std::filesystem::path& dir,
                                      std::ostream& err);

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace fs3d::cli
