#pragma once

// Brute-force reference implementations of the evaluation metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace fs3d::oracle {

using P3 = std::array<double, 3>;
using Matrix = std::vector<std::vector<double>>;

inline Matrix squared_distance_matrix(const std::vector<P3>& a, const std::vector<P3>& b) {
  Matrix d(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += (a[i][c] - b[j][c]) * (a[i][c] - b[j][c]);
      d[i][j] = s;
    }
  }
  return d;
}

inline double chamfer(const std::vector<P3>& a, const std::vector<P3>& b) {
  const Matrix d = squared_distance_matrix(a, b);
  double rows = 0.0;
  for (const auto& row : d) rows += *std::min_element(row.begin(), row.end());
  double cols = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    double best = d[0][j];
    for (std::size_t i = 1; i < a.size(); ++i) best = std::min(best, d[i][j]);
    cols += best;
  }
  return rows / static_cast<double>(a.size()) + cols / static_cast<double>(b.size());
}

struct Stats {
  double mean, std;
};

// Population statistics over every ordered pair i != j of a symmetric matrix.
inline Stats pairwise(const Matrix& d) {
  std::vector<double> values;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (i != j) values.push_back(d[i][j]);
    }
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

// `to_ref[i][r]` assigns items, `within` scores pairs of items.
inline Stats intra(const Matrix& to_ref, const Matrix& within) {
  const std::size_t refs = to_ref.front().size();
  std::vector<std::vector<std::size_t>> clusters(refs);
  for (std::size_t i = 0; i < to_ref.size(); ++i) {
    const auto best = std::min_element(to_ref[i].begin(), to_ref[i].end());
    clusters[static_cast<std::size_t>(best - to_ref[i].begin())].push_back(i);
  }
  std::vector<double> scores;
  for (const auto& members : clusters) {
    if (members.size() < 2) {
      scores.push_back(0.0);
      continue;
    }
    Matrix sub(members.size(), std::vector<double>(members.size()));
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = 0; b < members.size(); ++b) sub[a][b] = within[members[a]][members[b]];
    }
    scores.push_back(pairwise(sub).mean);
  }
  double mean = 0.0;
  for (double v : scores) mean += v;
  mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double v : scores) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(scores.size()))};
}

// Pyramid patch statistics read straight from the full-resolution image:
// at level l a patch covers a (4 * 2^l)-pixel square of 2^l-pixel blocks.
// `image[y][x][c]`.
using Image = std::vector<std::vector<std::vector<double>>>;

inline double perceptual(const Image& a, const Image& b) {
  const std::size_t r = a.size(), channels = a[0][0].size();
  double total = 0.0;
  for (std::size_t level = 0; level < 3; ++level) {
    const std::size_t block = std::size_t{1} << level;
    const std::size_t side = r / block;
    const auto pooled = [&](const Image& img, std::size_t y, std::size_t x, std::size_t c) {
      double s = 0.0;
      for (std::size_t dy = 0; dy < block; ++dy) {
        for (std::size_t dx = 0; dx < block; ++dx) s += img[y * block + dy][x * block + dx][c];
      }
      return s / static_cast<double>(block * block);
    };
    double term = 0.0;
    std::size_t count = 0;
    for (std::size_t py = 0; py < side / 4; ++py) {
      for (std::size_t px = 0; px < side / 4; ++px) {
        for (std::size_t c = 0; c < channels; ++c) {
          double stats[2][2] = {};
          for (int which = 0; which < 2; ++which) {
            const Image& img = which == 0 ? a : b;
            std::vector<double> v;
            for (std::size_t y = 0; y < 4; ++y) {
              for (std::size_t x = 0; x < 4; ++x) v.push_back(pooled(img, py * 4 + y, px * 4 + x, c));
            }
            double m = 0.0;
            for (double e : v) m += e;
            m /= 16.0;
            double var = 0.0;
            for (double e : v) var += (e - m) * (e - m);
            stats[which][0] = m;
            stats[which][1] = var / 16.0;
          }
          term += (stats[0][0] - stats[1][0]) * (stats[0][0] - stats[1][0]) +
                  (stats[0][1] - stats[1][1]) * (stats[0][1] - stats[1][1]);
          ++count;
        }
      }
    }
    total += term / static_cast<double>(count);
  }
  return total / 3.0;
}

}  // namespace fs3d::oracle
