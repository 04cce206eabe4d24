#include "fs3d/adversarial/adversarial.hpp"

#include <cmath>
#include <random>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/ops.hpp"
#include "fs3d/numerics/random.hpp"

namespace fs3d::adversarial {

using numerics::Graph;
using numerics::Shape;

std::size_t DiscriminatorConfig::input_dim() const {
  const std::size_t side = pool ? resolution / 2 : resolution;
  return side * side * channels;
}

std::string Discriminator::prefix() const { return kind == ImageKind::Mask ? "d_mask" : "d_rgb"; }

Discriminator initialize_discriminator(const DiscriminatorConfig& config, ImageKind kind, std::uint64_t seed) {
  if (config.pool && config.resolution % 2 != 0) {
    throw ConfigError("pooled discriminator needs an even resolution");
  }
  Discriminator d;
  d.config = config;
  d.kind = kind;
  std::mt19937_64 rng(numerics::derive_seed(seed, kind == ImageKind::Mask ? 11 : 12));
  std::size_t in = config.input_dim();
  auto add_layer = [&](const std::string& name, std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Array w(Shape{in, out}), b(Shape{out});
    for (double& v : w.values()) v = dist(rng);
    for (double& v : b.values()) v = dist(rng);
    d.params.add(d.prefix() + "." + name + ".weight", std::move(w));
    d.params.add(d.prefix() + "." + name + ".bias", std::move(b));
    in = out;
  };
  for (std::size_t k = 0; k < config.hidden.size(); ++k) add_layer("l" + std::to_string(k), config.hidden[k]);
  add_layer("out", 1);
  return d;
}

Var discriminate(const Discriminator& d, const numerics::BoundParameters& params, Var images) {
  using namespace numerics;
  const auto& c = d.config;
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != c.resolution || s[2] != c.resolution || s[3] != c.channels) {
    throw StructuralError("discriminator " + d.prefix() + " expects [B x " + std::to_string(c.resolution) +
                          " x " + std::to_string(c.resolution) + " x " + std::to_string(c.channels) +
                          "], got " + format_shape(s));
  }
  const std::size_t batch = s[0];
  Var x = c.pool ? avg_pool2(images) : images;
  x = reshape(x, {batch, c.input_dim()});
  const std::string p = d.prefix();
  for (std::size_t k = 0; k < c.hidden.size(); ++k) {
    const std::string layer = p + ".l" + std::to_string(k);
    x = leaky_relu(add_bias(matmul(x, params[layer + ".weight"]), params[layer + ".bias"]));
  }
  x = add_bias(matmul(x, params[p + ".out.weight"]), params[p + ".out.bias"]);
  return reshape(x, {batch});
}

double logistic_g(double u) {
  // -softplus(-u)
  if (u > 30.0) return -std::exp(-u);
  if (u < -30.0) return u;
  return -std::log1p(std::exp(-u));
}

DiscriminatorLoss discriminator_loss(const Discriminator& d, const numerics::BoundParameters& params,
                                     const Array& real, Var fake, double lambda) {
  using namespace numerics;
  if (!(lambda >= 0.0)) throw ConfigError("R1 weight must be non-negative");
  Graph& graph = params.graph();
  const Var real_leaf = graph.parameter("real_images", real);
  const Var fake_fixed = graph.constant(fake.value());

  const Var fake_scores = discriminate(d, params, fake_fixed);
  const Var real_scores = discriminate(d, params, real_leaf);
  const Var fake_term = mean(softplus(fake_scores));
  const Var real_term = mean(softplus(scale(real_scores, -1.0)));

  DiscriminatorLoss out;
  out.total = add(fake_term, real_term);
  out.fake_term = fake_term.value().item();
  out.real_term = real_term.value().item();
  if (lambda > 0.0) {
    const Var wrt[] = {real_leaf};
    const Var grad = graph.gradients(sum(real_scores), wrt)[0];
    const double batch = static_cast<double>(real.dim(0));
    const Var penalty = scale(sum(mul(grad, grad)), lambda / batch);
    out.r1 = penalty.value().item();
    out.total = add(out.total, penalty);
  }
  return out;
}

Var generator_adv_loss(const Discriminator& d, const numerics::BoundParameters& params, Var fake) {
  using namespace numerics;
  return mean(softplus(scale(discriminate(d, params, fake), -1.0)));
}

GridTopology grid_topology(std::size_t resolution) {
  if (resolution < 2) throw ContractError("grid topology needs resolution >= 2");
  GridTopology t;
  const std::size_t r = resolution;
  t.edges.reserve(3 * r * r * (r - 1));
  for (std::size_t iz = 0; iz < r; ++iz) {
    for (std::size_t iy = 0; iy < r; ++iy) {
      for (std::size_t ix = 0; ix < r; ++ix) {
        const std::size_t v = (iz * r + iy) * r + ix;
        if (ix + 1 < r) t.edges.emplace_back(v, v + 1);
        if (iy + 1 < r) t.edges.emplace_back(v, v + r);
        if (iz + 1 < r) t.edges.emplace_back(v, v + r * r);
      }
    }
  }
  return t;
}

Var sdf_regularizer(Var sdf, const GridTopology& topology) {
  using namespace numerics;
  if (topology.edges.empty()) throw ContractError("sdf regularizer needs at least one edge");
  const std::size_t count = topology.edges.size();
  std::vector<std::size_t> first, second;
  first.reserve(count);
  second.reserve(count);
  for (const auto& [i, j] : topology.edges) {
    if (i >= sdf.value().size() || j >= sdf.value().size()) {
      throw StructuralError("sdf regularizer edge references a vertex outside the field");
    }
    first.push_back(i);
    second.push_back(j);
  }
  const Var s_i = gather(sdf, first);
  const Var s_j = gather(sdf, second);
  Array y_i(Shape{count}), y_j(Shape{count});
  for (std::size_t e = 0; e < count; ++e) {
    y_i[e] = s_i.value()[e] > 0.0 ? 1.0 : 0.0;
    y_j[e] = s_j.value()[e] > 0.0 ? 1.0 : 0.0;
  }
  Graph& g = sdf.graph();
  // H(sigmoid(s), y) = softplus(s) - y s.
  const Var ce = sub(add(sum(softplus(s_i)), sum(softplus(s_j))),
                     add(dot(s_i, g.constant(std::move(y_j))), dot(s_j, g.constant(std::move(y_i)))));
  return scale(ce, 1.0 / static_cast<double>(count));
}

}  // namespace fs3d::adversarial
