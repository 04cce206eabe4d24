#pragma once

#include <span>
#include <vector>

#include "fs3d/numerics/graph.hpp"
#include "fs3d/renderer/renderer.hpp"

namespace fs3d::rdp {

using numerics::Array;
using numerics::Var;

/// Cosine similarity of two same-shaped arrays, dot / max(|a| |b|, eps).
Var cosine(Var a, Var b);

/// Log-probabilities of each owner's similarity row. Row i is the log-softmax of
/// cos(f_i, f_j) over j != i in ascending j, so it has N - 1 entries.
std::vector<Var> similarity_log_rows(std::span<const Var> features);

/// Plain-value similarity rows as probabilities.
std::vector<std::vector<double>> similarity_rows(const std::vector<Array>& features);

/// KL(p || q) from log-probabilities.
Var kl_divergence(Var log_p, Var log_q);
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// Sum over owners of KL(target row || source row) for per-sample feature
/// vectors. Source features are treated as constants.
Var relative_distance_loss(std::span<const Var> source, std::span<const Var> target);

/// Soft intersection of two masks: the pointwise minimum.
Var shared_mask(Var a, Var b);

/// Rendered views of one batch, view i showing sample i under cameras[i].
struct BatchViews {
  std::vector<renderer::ViewVars> views;
  std::vector<renderer::Camera> cameras;
};

Var geometry_feature_loss(std::span<const Var> source_taps, std::span<const Var> target_taps);
Var mask_loss(const BatchViews& source, const BatchViews& target);
/// Similarities of per-pixel feature maps restricted to each pair's shared mask.
Var texture_feature_loss(const BatchViews& source, const BatchViews& target);
/// As texture_feature_loss with the RGB images in place of feature maps.
Var rgb_loss(const BatchViews& source, const BatchViews& target);

}  // namespace fs3d::rdp
