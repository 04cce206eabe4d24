#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fs3d/data/dataset.hpp"
#include "fs3d/generator/generator.hpp"
#include "fs3d/renderer/renderer.hpp"

namespace fs3d::metrics {

using Point = std::array<double, 3>;
using PointCloud = std::vector<Point>;

/// Zero crossings of the SDF along lattice edges, linearly interpolated and
/// mapped back through the deformation so they lie on the rendered surface.
/// More than `n` crossings are subsampled by `seed`; fewer are topped up by
/// repetition. Throws DegenerateShapeError without a sign change.
PointCloud sample_surface_points(const generator::ShapeField& shape, std::size_t n = 256, std::uint64_t seed = 0);

/// Mean squared nearest-neighbour distance from a to b plus the reverse term.
double chamfer(const PointCloud& a, const PointCloud& b);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population mean and standard deviation.
MeanStd mean_std(const std::vector<double>& values);

using PairDistance = std::function<double(std::size_t, std::size_t)>;

/// Mean and spread of `distance(i, j)` over all unordered pairs i < j.
MeanStd pairwise_diversity(std::size_t count, const PairDistance& distance);

/// Index of the nearest reference for every item under `distance(item, ref)`,
/// ties resolved to the lowest reference index.
std::vector<std::size_t> assign_clusters(std::size_t items, std::size_t references, const PairDistance& distance);

/// Mean pairwise distance within each cluster, 0 for clusters with fewer than
/// two members, then mean and spread across all clusters.
MeanStd intra_diversity(const std::vector<std::size_t>& assignment, std::size_t clusters,
                        const PairDistance& distance);

/// Mean over a three-level pyramid of the squared differences of 4x4 patch
/// means plus those of patch variances. Channels are the mask and, when both
/// views carry it, the RGB image. Resolutions must match and divide by 16.
double perceptual_proxy(const renderer::RenderedView& a, const renderer::RenderedView& b);

/// One item's renders under a fixed camera list.
using ViewSet = std::vector<renderer::RenderedView>;
/// Mean proxy over matched views.
double view_set_distance(const ViewSet& a, const ViewSet& b);

/// Chamfer scaled for reporting.
inline constexpr double kChamferScale = 1e3;

/// Mean over `generated` of the smallest chamfer to any target cloud.
double cd_to_target(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& targets);

struct EvalPreset {
  std::string name = "desk";
  std::size_t cd_samples = 200;
  std::size_t pairwise_samples = 100;
  std::size_t intra_samples = 100;
  std::size_t target_samples = 100;
  std::size_t surface_points = 256;
  std::size_t views = 8;
  std::size_t resolution = 32;
};

/// "desk" or "full"; anything else is a ConfigError.
EvalPreset eval_preset(const std::string& name);

struct MetricReport {
  std::string preset;
  std::uint64_t seed = 0;
  double cd_to_target = 0.0;  // x 1e3
  MeanStd intra_cd;           // x 1e3
  MeanStd pairwise_cd;        // x 1e3
  MeanStd intra_perc;
  MeanStd pairwise_perc;
  std::size_t cd_samples = 0;
  std::size_t pairwise_samples = 0;
  std::size_t intra_samples = 0;
  std::size_t target_samples = 0;
  std::size_t references = 0;
  std::size_t degenerate_samples = 0;
  std::vector<std::size_t> cluster_sizes;

  std::string to_json() const;
  /// Fixed-width table in the column order CD, Intra-CD, Pairwise-CD,
  /// Intra-perc, Pairwise-perc.
  std::string to_table(const std::string& label) const;
};

/// Inputs of a model evaluation: surface clouds of the larger held-out target
/// draw used for CD, and ring renders of the few-shot references used for
/// cluster assignment.
struct EvalInputs {
  std::vector<PointCloud> target_clouds;
  std::vector<ViewSet> reference_views;
};

/// Redraws the few-shot family and a `preset.target_samples` held-out draw of
/// the same family spec, sampled on the generator's lattice.
EvalInputs make_eval_inputs(const data::FamilyRecord& fewshot, std::size_t grid_resolution,
                            const EvalPreset& preset);

struct GeneratedSet {
  std::vector<PointCloud> clouds;
  std::vector<ViewSet> views;
  std::size_t degenerate = 0;
};

/// Surface clouds and ring renders of a model's fixed-noise samples. Clouds
/// are produced for the first `clouds` samples and views for the first `views`.
/// A sample without a sign change is represented by its vertices nearest the
/// zero level and counted in `degenerate`.
GeneratedSet sample_model(const generator::Generator& generator, std::size_t clouds, std::size_t views,
                          const EvalPreset& preset, std::uint64_t seed);

MetricReport evaluate(const GeneratedSet& generated, const EvalInputs& inputs, const EvalPreset& preset,
                      std::uint64_t seed);

MetricReport evaluate_model(const generator::Generator& generator, const EvalInputs& inputs,
                            const EvalPreset& preset, std::uint64_t seed);

}  // namespace fs3d::metrics
