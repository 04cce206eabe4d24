#pragma once

// Direct evaluation of the relative-distance losses from their definitions,
// written against plain vectors without the graph.

#include <algorithm>
#include <cmath>
#include <vector>

namespace fs3d::oracle {

using Vec = std::vector<double>;

inline double cosine(const Vec& a, const Vec& b) {
  const double eps = 1e-8;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / std::max(std::sqrt(aa + eps * eps) * std::sqrt(bb + eps * eps), eps);
}

inline Vec softmax(const Vec& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  Vec p;
  double z = 0.0;
  for (double l : logits) {
    p.push_back(std::exp(l - top));
    z += p.back();
  }
  for (double& v : p) v /= z;
  return p;
}

inline double kl(const Vec& p, const Vec& q) {
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += p[k] * std::log(p[k] / q[k]);
  return total;
}

/// sim[i][j] for every ordered pair; rows drop the diagonal.
inline std::vector<Vec> rows_from_similarities(const std::vector<Vec>& sim) {
  std::vector<Vec> rows;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    Vec logits;
    for (std::size_t j = 0; j < sim.size(); ++j) {
      if (j != i) logits.push_back(sim[i][j]);
    }
    rows.push_back(softmax(logits));
  }
  return rows;
}

inline std::vector<Vec> rows(const std::vector<Vec>& features) {
  const std::size_t n = features.size();
  std::vector<Vec> sim(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sim[i][j] = cosine(features[i], features[j]);
  }
  return rows_from_similarities(sim);
}

inline double loss_from_rows(const std::vector<Vec>& source, const std::vector<Vec>& target) {
  double total = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) total += kl(target[i], source[i]);
  return total;
}

/// Loss over per-sample vectors (taps or flattened masks).
inline double vector_loss(const std::vector<Vec>& source, const std::vector<Vec>& target) {
  return loss_from_rows(rows(source), rows(target));
}

/// Rows of masked maps: maps[i] is P x C row-major, masks[i] has P entries.
inline std::vector<Vec> masked_rows(const std::vector<Vec>& maps, const std::vector<Vec>& masks,
                                    std::size_t channels) {
  const std::size_t n = maps.size();
  const std::size_t pixels = masks[0].size();
  std::vector<Vec> sim(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      Vec a(pixels * channels), b(pixels * channels);
      for (std::size_t p = 0; p < pixels; ++p) {
        const double shared = std::min(masks[i][p], masks[j][p]);
        for (std::size_t c = 0; c < channels; ++c) {
          a[p * channels + c] = maps[i][p * channels + c] * shared;
          b[p * channels + c] = maps[j][p * channels + c] * shared;
        }
      }
      sim[i][j] = cosine(a, b);
    }
  }
  return rows_from_similarities(sim);
}

inline double masked_loss(const std::vector<Vec>& source_maps, const std::vector<Vec>& source_masks,
                          const std::vector<Vec>& target_maps, const std::vector<Vec>& target_masks,
                          std::size_t channels) {
  return loss_from_rows(masked_rows(source_maps, source_masks, channels),
                        masked_rows(target_maps, target_masks, channels));
}

}  // namespace fs3d::oracle
