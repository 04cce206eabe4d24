#include "fs3d/generator/generator.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/random.hpp"

namespace fs3d::generator {

using numerics::Graph;
using numerics::Shape;

namespace {

bool has_prefix(const std::string& name, const char* prefix) {
  return name.rfind(prefix, 0) == 0;
}

Array uniform(const Shape& shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Array out(shape);
  for (double& v : out.values()) v = dist(rng);
  return out;
}

Array normal(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Array out(Shape{n, dim});
  for (double& v : out.values()) v = dist(rng);
  return out;
}

// Dense layer whose input is the concatenation of several blocks; each block
// gets its own weight matrix and all share the fan-in bound.
void add_split_layer(numerics::ParameterSet& params, const std::string& prefix,
                     const std::vector<std::pair<std::string, std::size_t>>& blocks, std::size_t out,
                     std::mt19937_64& rng) {
  std::size_t fan_in = 0;
  for (const auto& [name, width] : blocks) fan_in += width;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (const auto& [name, width] : blocks) {
    params.add(prefix + "." + name, uniform({width, out}, bound, rng));
  }
  params.add(prefix + ".bias", uniform({out}, bound, rng));
}

void add_layer(numerics::ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  params.add(prefix + ".weight", uniform({in, out}, bound, rng));
  params.add(prefix + ".bias", uniform({out}, bound, rng));
}

Var dense(const GeneratorGraph& g, const std::string& prefix, Var x) {
  return numerics::add_bias(numerics::matmul(x, g[prefix + ".weight"]), g[prefix + ".bias"]);
}

Var mapping(const GeneratorGraph& g, const std::string& prefix, const Array& z) {
  Var x = g.graph().constant(z);
  return dense(g, prefix + ".l1", numerics::leaky_relu(dense(g, prefix + ".l0", x)));
}

Var row(Var x, std::size_t i) {
  return numerics::reshape(numerics::slice_rows(x, i, i + 1), {x.shape()[1]});
}

}  // namespace

LatentBatch sample_latents(std::size_t n, std::uint64_t seed, std::size_t latent_dim) {
  if (n < 2) throw ContractError("sample_latents needs n >= 2, got " + std::to_string(n));
  LatentBatch batch;
  batch.z1 = normal(n, latent_dim, numerics::derive_seed(seed, 1));
  batch.z2 = normal(n, latent_dim, numerics::derive_seed(seed, 2));
  batch.seed = seed;
  return batch;
}

bool Generator::is_mapping(const std::string& name) const {
  return has_prefix(name, "mapping_geo.") || has_prefix(name, "mapping_tex.");
}

bool Generator::is_texture(const std::string& name) const {
  return has_prefix(name, "mapping_tex.") || has_prefix(name, "tex.");
}

bool Generator::trainable(const std::string& name) const {
  if (frozen_mapping && is_mapping(name)) return false;
  if (frozen_texture && is_texture(name)) return false;
  return true;
}

Generator initialize_generator(const GeneratorConfig& config, std::uint64_t seed) {
  if (config.grid_resolution < 2) throw ConfigError("grid resolution must be at least 2");
  Generator gen;
  gen.config = config;
  std::mt19937_64 rng(numerics::derive_seed(seed, 0));
  auto& p = gen.params;
  for (const char* net : {"mapping_geo", "mapping_tex"}) {
    add_layer(p, std::string(net) + ".l0", config.latent_dim, config.style_dim, rng);
    add_layer(p, std::string(net) + ".l1", config.style_dim, config.style_dim, rng);
  }
  const std::size_t pos = config.positional_dim();
  for (const char* head : {"geo.sdf", "geo.deform"}) {
    add_split_layer(p, head, {{"pos_weight", pos}, {"style_weight", config.style_dim}}, config.geo_hidden, rng);
  }
  add_layer(p, "geo.sdf.out", config.geo_hidden, 1, rng);
  add_layer(p, "geo.deform.out", config.geo_hidden, 3, rng);
  add_split_layer(p, "tex.l0",
                  {{"pos_weight", pos}, {"geo_weight", config.style_dim}, {"tex_weight", config.style_dim}},
                  config.tex_hidden, rng);
  add_layer(p, "tex.l1", config.tex_hidden, config.tex_features, rng);
  add_layer(p, "tex.rgb", config.tex_features, 3, rng);
  return gen;
}

Array lattice_positions(std::size_t resolution) {
  if (resolution < 2) throw ContractError("lattice resolution must be at least 2");
  const double h = 2.0 / static_cast<double>(resolution - 1);
  Array out(Shape{resolution * resolution * resolution, 3});
  std::size_t v = 0;
  for (std::size_t iz = 0; iz < resolution; ++iz) {
    for (std::size_t iy = 0; iy < resolution; ++iy) {
      for (std::size_t ix = 0; ix < resolution; ++ix, ++v) {
        out[v * 3 + 0] = -1.0 + h * static_cast<double>(ix);
        out[v * 3 + 1] = -1.0 + h * static_cast<double>(iy);
        out[v * 3 + 2] = -1.0 + h * static_cast<double>(iz);
      }
    }
  }
  return out;
}

Array positional_features(std::size_t resolution, std::size_t frequencies) {
  const Array xyz = lattice_positions(resolution);
  const std::size_t count = xyz.dim(0);
  const std::size_t dim = 3 + 6 * frequencies;
  Array out(Shape{count, dim});
  for (std::size_t v = 0; v < count; ++v) {
    double* dst = out.data() + v * dim;
    for (std::size_t c = 0; c < 3; ++c) dst[c] = xyz[v * 3 + c];
    std::size_t k = 3;
    for (std::size_t f = 0; f < frequencies; ++f) {
      const double omega = std::ldexp(std::numbers::pi, static_cast<int>(f));
      for (std::size_t c = 0; c < 3; ++c) {
        dst[k++] = std::sin(omega * xyz[v * 3 + c]);
        dst[k++] = std::cos(omega * xyz[v * 3 + c]);
      }
    }
  }
  return out;
}

GeneratorGraph::GeneratorGraph(Graph& graph, const Generator& generator, bool trainable)
    : config_(generator.config),
      bound_(graph, generator.params,
             [&](const std::string& name) { return trainable && generator.trainable(name); }),
      positions_(graph.constant(positional_features(config_.grid_resolution, config_.frequencies))) {}

MappedLatents map_latents(const GeneratorGraph& g, const LatentBatch& batch) {
  const auto& c = g.config();
  if (batch.z1.shape() != Shape{batch.size(), c.latent_dim} || batch.z2.shape() != batch.z1.shape()) {
    throw StructuralError("latent batch shape " + numerics::format_shape(batch.z1.shape()) +
                          " does not match latent dim " + std::to_string(c.latent_dim));
  }
  return {mapping(g, "mapping_geo", batch.z1), mapping(g, "mapping_tex", batch.z2)};
}

std::vector<ShapeFieldVars> synthesize_geometry(const GeneratorGraph& g, Var w1) {
  using namespace numerics;
  const auto& c = g.config();
  const std::size_t v_count = c.vertex_count();
  const Var p = g.positions();
  const Var pos_s = matmul(p, g["geo.sdf.pos_weight"]);
  const Var pos_d = matmul(p, g["geo.deform.pos_weight"]);
  const Var style_s = add_bias(matmul(w1, g["geo.sdf.style_weight"]), g["geo.sdf.bias"]);
  const Var style_d = add_bias(matmul(w1, g["geo.deform.style_weight"]), g["geo.deform.bias"]);

  std::vector<ShapeFieldVars> out;
  for (std::size_t i = 0; i < w1.shape()[0]; ++i) {
    const Var h_s = leaky_relu(add_bias(pos_s, row(style_s, i)));
    const Var h_d = leaky_relu(add_bias(pos_d, row(style_d, i)));
    ShapeFieldVars field;
    field.sdf = reshape(add_bias(matmul(h_s, g["geo.sdf.out.weight"]), g["geo.sdf.out.bias"]), {v_count});
    field.deform = scale(tanh(add_bias(matmul(h_d, g["geo.deform.out.weight"]), g["geo.deform.out.bias"])),
                         c.deformation_bound());
    const Var parts[] = {h_s, h_d};
    field.tap = reshape(concat(parts, 1), {c.tap_length()});
    out.push_back(field);
  }
  return out;
}

std::vector<TextureFieldVars> synthesize_texture(const GeneratorGraph& g, Var w1, Var w2) {
  using namespace numerics;
  const Var pos = matmul(g.positions(), g["tex.l0.pos_weight"]);
  const Var style =
      add_bias(add(matmul(w1, g["tex.l0.geo_weight"]), matmul(w2, g["tex.l0.tex_weight"])), g["tex.l0.bias"]);
  std::vector<TextureFieldVars> out;
  for (std::size_t i = 0; i < w1.shape()[0]; ++i) {
    const Var h0 = leaky_relu(add_bias(pos, row(style, i)));
    TextureFieldVars field;
    field.features = leaky_relu(dense(g, "tex.l1", h0));
    field.colors = sigmoid(dense(g, "tex.rgb", field.features));
    out.push_back(field);
  }
  return out;
}

GeneratedBatch generate(const Generator& generator, const LatentBatch& batch, bool keep_taps) {
  Graph graph;
  const GeneratorGraph g(graph, generator, false);
  const MappedLatents w = map_latents(g, batch);
  const auto shapes = synthesize_geometry(g, w.w1);
  const auto textures = synthesize_texture(g, w.w1, w.w2);
  GeneratedBatch out;
  for (const auto& s : shapes) {
    out.shapes.push_back({generator.config.grid_resolution, s.sdf.value(), s.deform.value(),
                          keep_taps ? s.tap.value() : Array()});
  }
  for (const auto& t : textures) out.textures.push_back({t.colors.value(), t.features.value()});
  return out;
}

}  // namespace fs3d::generator
