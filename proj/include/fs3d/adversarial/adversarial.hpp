#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fs3d/numerics/parameters.hpp"

namespace fs3d::adversarial {

using numerics::Array;
using numerics::Var;

enum class ImageKind { Mask, Rgb };

struct DiscriminatorConfig {
  std::size_t resolution = 32;
  std::size_t channels = 1;
  std::vector<std::size_t> hidden{64, 64};
  /// 2x average pooling before the first layer.
  bool pool = true;

  std::size_t input_dim() const;
};

/// MLP over the (pooled) flattened image, one score per image.
struct Discriminator {
  DiscriminatorConfig config;
  ImageKind kind = ImageKind::Mask;
  numerics::ParameterSet params;

  /// Parameter name prefix, "d_mask" or "d_rgb".
  std::string prefix() const;
};

Discriminator initialize_discriminator(const DiscriminatorConfig& config, ImageKind kind, std::uint64_t seed);

/// Scores [B] for images [B x R x R x C].
Var discriminate(const Discriminator& d, const numerics::BoundParameters& params, Var images);

/// g(u) = -log(1 + exp(-u)).
double logistic_g(double u);

struct DiscriminatorLoss {
  Var total;
  double fake_term = 0.0;
  double real_term = 0.0;
  double r1 = 0.0;  // weighted penalty
};

/// mean softplus(D(fake)) + mean softplus(-D(real)) + lambda mean |grad_x D(real)|^2.
/// `params` must bind the discriminator in `fake`'s graph; the fake images are
/// detached here and `real` becomes a gradient leaf for the penalty.
DiscriminatorLoss discriminator_loss(const Discriminator& d, const numerics::BoundParameters& params,
                                     const Array& real, Var fake, double lambda);

/// mean softplus(-D(fake)), with D bound as constants by the caller.
Var generator_adv_loss(const Discriminator& d, const numerics::BoundParameters& params, Var fake);

/// Unique axis-aligned edges of the R^3 lattice.
struct GridTopology {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

GridTopology grid_topology(std::size_t resolution);

/// Mean over edges of H(sigmoid(s_i), 1[s_j > 0]) + H(sigmoid(s_j), 1[s_i > 0]).
Var sdf_regularizer(Var sdf, const GridTopology& topology);

}  // namespace fs3d::adversarial
