#include "fs3d/rdp/rdp_losses.hpp"

#include <cmath>
#include <string>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/ops.hpp"

namespace fs3d::rdp {

using numerics::Graph;

namespace {

Var detach(Var v) { return v.graph().constant(v.value()); }

void check_batch(std::size_t source, std::size_t target, const char* what) {
  if (source != target) {
    throw ContractError(std::string(what) + ": source batch of " + std::to_string(source) +
                        " does not match target batch of " + std::to_string(target));
  }
  if (source < 2) throw ContractError(std::string(what) + ": pairwise losses need a batch of at least 2");
}

void check_views(const BatchViews& source, const BatchViews& target, const char* what) {
  check_batch(source.views.size(), target.views.size(), what);
  if (source.cameras.size() != source.views.size() || target.cameras.size() != target.views.size()) {
    throw ContractError(std::string(what) + ": every view needs a camera");
  }
  for (std::size_t i = 0; i < source.cameras.size(); ++i) {
    if (!(source.cameras[i] == target.cameras[i])) {
      throw ContractError(std::string(what) + ": camera mismatch at batch index " + std::to_string(i));
    }
  }
}

Var total_kl(const std::vector<Var>& source_rows, const std::vector<Var>& target_rows) {
  Var total = kl_divergence(target_rows[0], source_rows[0]);
  for (std::size_t i = 1; i < target_rows.size(); ++i) {
    total = numerics::add(total, kl_divergence(target_rows[i], source_rows[i]));
  }
  return total;
}

// Row i from a symmetric table of pairwise similarity scalars.
std::vector<Var> rows_from_table(const std::vector<std::vector<Var>>& sim) {
  const std::size_t n = sim.size();
  std::vector<Var> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Var> logits;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) logits.push_back(i < j ? sim[i][j] : sim[j][i]);
    }
    rows.push_back(numerics::log_softmax(numerics::stack(logits)));
  }
  return rows;
}

// Masked-cosine rows for maps [P x C] restricted to pairwise shared masks.
std::vector<Var> masked_rows(const std::vector<Var>& maps, const std::vector<Var>& masks) {
  const std::size_t n = maps.size();
  std::vector<std::vector<Var>> sim(n, std::vector<Var>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Var m = shared_mask(masks[i], masks[j]);
      sim[i][j] = cosine(numerics::mask_multiply(maps[i], m), numerics::mask_multiply(maps[j], m));
    }
  }
  return rows_from_table(sim);
}

enum class MapKind { Features, Rgb };

Var masked_loss(const BatchViews& source, const BatchViews& target, MapKind kind, const char* what) {
  check_views(source, target, what);
  std::vector<Var> s_maps, s_masks, t_maps, t_masks;
  for (std::size_t i = 0; i < source.views.size(); ++i) {
    const auto& sv = source.views[i];
    const auto& tv = target.views[i];
    const Var s_map = kind == MapKind::Features ? sv.features : sv.rgb;
    const Var t_map = kind == MapKind::Features ? tv.features : tv.rgb;
    if (!s_map.valid() || !t_map.valid()) {
      throw ContractError(std::string(what) + ": view " + std::to_string(i) + " lacks the required image");
    }
    s_maps.push_back(detach(s_map));
    s_masks.push_back(detach(sv.mask));
    t_maps.push_back(t_map);
    t_masks.push_back(tv.mask);
  }
  return total_kl(masked_rows(s_maps, s_masks), masked_rows(t_maps, t_masks));
}

}  // namespace

Var cosine(Var a, Var b) {
  using namespace numerics;
  return div_guarded(dot(a, b), mul(l2_norm(a), l2_norm(b)));
}

std::vector<Var> similarity_log_rows(std::span<const Var> features) {
  const std::size_t n = features.size();
  if (n < 2) throw ContractError("similarity rows need at least 2 feature vectors");
  for (const Var& f : features) {
    if (f.shape() != features[0].shape()) {
      throw ContractError("similarity rows need feature vectors of one shape, got " +
                          numerics::format_shape(features[0].shape()) + " and " +
                          numerics::format_shape(f.shape()));
    }
  }
  std::vector<std::vector<Var>> sim(n, std::vector<Var>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = cosine(features[i], features[j]);
  }
  return rows_from_table(sim);
}

std::vector<std::vector<double>> similarity_rows(const std::vector<Array>& features) {
  Graph graph;
  std::vector<Var> vars;
  for (const Array& f : features) vars.push_back(graph.constant(f));
  std::vector<std::vector<double>> rows;
  for (const Var& row : similarity_log_rows(vars)) {
    std::vector<double> p;
    for (double v : row.value().values()) p.push_back(std::exp(v));
    rows.push_back(std::move(p));
  }
  return rows;
}

Var kl_divergence(Var log_p, Var log_q) {
  using namespace numerics;
  if (log_p.shape() != log_q.shape()) {
    throw ContractError("KL divergence between rows of shape " + format_shape(log_p.shape()) + " and " +
                        format_shape(log_q.shape()));
  }
  return dot(exp(log_p), sub(log_p, log_q));
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw ContractError("KL divergence between rows of length " + std::to_string(p.size()) + " and " +
                        std::to_string(q.size()));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) total += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return total;
}

Var relative_distance_loss(std::span<const Var> source, std::span<const Var> target) {
  check_batch(source.size(), target.size(), "relative distance loss");
  std::vector<Var> fixed;
  for (const Var& s : source) fixed.push_back(detach(s));
  return total_kl(similarity_log_rows(fixed), similarity_log_rows(target));
}

Var shared_mask(Var a, Var b) { return numerics::minimum(a, b); }

Var geometry_feature_loss(std::span<const Var> source_taps, std::span<const Var> target_taps) {
  return relative_distance_loss(source_taps, target_taps);
}

Var mask_loss(const BatchViews& source, const BatchViews& target) {
  check_views(source, target, "mask loss");
  std::vector<Var> s, t;
  for (const auto& v : source.views) s.push_back(v.mask);
  for (const auto& v : target.views) t.push_back(v.mask);
  return relative_distance_loss(s, t);
}

Var texture_feature_loss(const BatchViews& source, const BatchViews& target) {
  return masked_loss(source, target, MapKind::Features, "texture feature loss");
}

Var rgb_loss(const BatchViews& source, const BatchViews& target) {
  return masked_loss(source, target, MapKind::Rgb, "rgb loss");
}

}  // namespace fs3d::rdp
