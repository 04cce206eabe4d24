#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fs3d::cli {

struct GradientSuiteOptions {
  std::uint64_t seed = 1;
  std::size_t batch_size = 4;
  std::size_t render_resolution = 8;
  std::size_t grid_resolution = 8;
  /// Components probed per parameter entry, at seeded positions.
  std::size_t components_per_entry = 6;
  double step = 1e-5;
  double tolerance = 1e-4;
};

struct GradCheckRow {
  std::string loss;
  double max_relative_error = 0.0;
  std::size_t components = 0;
  bool passed = false;
};

/// Central differences against the analytic parameter gradient of every
/// registered loss: the four relative-distance terms, the SDF regularizer, both
/// generator adversarial terms and both discriminator losses with R1.
std::vector<GradCheckRow> gradient_suite(const GradientSuiteOptions& options = {});

std::string gradcheck_table(const std::vector<GradCheckRow>& rows);

}  // namespace fs3d::cli
