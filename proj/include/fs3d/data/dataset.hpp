#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fs3d/data/shapes.hpp"
#include "fs3d/renderer/renderer.hpp"

namespace fs3d::data {

/// P2 grayscale with max value 255, values read back divided by the max.
void write_pgm(const std::filesystem::path& path, const numerics::Array& image);
numerics::Array read_pgm(const std::filesystem::path& path);
/// P3 color with max value 255, [R x R x 3] in [0, 1].
void write_ppm(const std::filesystem::path& path, const numerics::Array& image);
numerics::Array read_ppm(const std::filesystem::path& path);

struct ViewRecord {
  double azimuth = 0.0;
  double elevation = 0.0;
  std::string mask_file;
  std::string rgb_file;  // empty without RGB

  friend bool operator==(const ViewRecord&, const ViewRecord&) = default;
};

/// Enough to redraw a synthetic dataset's shapes.
struct FamilyRecord {
  std::string preset;
  FamilySpec spec;
  std::size_t count = 0;
  std::uint64_t seed = 0;

  std::vector<AnalyticShape> shapes(std::size_t check_resolution = 16) const;
  friend bool operator==(const FamilyRecord&, const FamilyRecord&) = default;
};

struct DatasetManifest {
  std::size_t resolution = 32;
  std::size_t grid_resolution = 32;
  std::size_t ray_samples = 24;
  double temperature = 0.05;
  std::uint64_t seed = 0;
  bool with_rgb = false;
  std::optional<FamilyRecord> family;
  std::vector<std::vector<ViewRecord>> samples;

  std::size_t sample_count() const { return samples.size(); }
  std::size_t view_count() const { return samples.empty() ? 0 : samples.front().size(); }
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string manifest_to_json(const DatasetManifest& manifest);
/// Throws ConfigError on a malformed document.
DatasetManifest manifest_from_json(const std::string& text);
void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& dir);

struct RenderDatasetOptions {
  std::size_t resolution = 32;
  std::size_t grid_resolution = 32;
  std::size_t ray_samples = 24;
  double temperature = 0.05;
  bool with_rgb = false;
  std::uint64_t seed = 0;
  std::optional<FamilyRecord> family;
};

/// Hard silhouette at 0.5 of the soft render of `shape` sampled on the
/// lattice, [R x R] with values in {0, 1}.
renderer::RenderedView render_shape(const AnalyticShape& shape, const renderer::Camera& camera,
                                    const RenderDatasetOptions& options);

/// Writes `<dir>/s<i>_v<j>.pgm` (+ `.ppm`) for every shape and camera, then
/// `<dir>/manifest.json`.
DatasetManifest render_dataset(const std::vector<AnalyticShape>& shapes, const std::vector<renderer::Camera>& cameras,
                               const std::filesystem::path& dir, const RenderDatasetOptions& options);

/// A loaded dataset. masks[i][j] is [R x R]; rgb[i][j] is [R x R x 3] when present.
struct Dataset {
  DatasetManifest manifest;
  std::vector<std::vector<numerics::Array>> masks;
  std::vector<std::vector<numerics::Array>> rgb;
  std::vector<renderer::Camera> cameras;

  std::size_t size() const { return masks.size(); }
  bool has_rgb() const { return !rgb.empty(); }
};

/// Loads and validates every referenced file: equal view lists across samples
/// and masks containing only 0 and 1.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace fs3d::data
