#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fs3d/numerics/ops.hpp"
#include "fs3d/numerics/parameters.hpp"

namespace fs3d::generator {

using numerics::Array;
using numerics::Var;

struct GeneratorConfig {
  std::size_t latent_dim = 16;
  std::size_t style_dim = 32;
  std::size_t geo_hidden = 64;
  std::size_t tex_hidden = 32;
  std::size_t tex_features = 8;
  std::size_t grid_resolution = 16;
  std::size_t frequencies = 4;

  std::size_t vertex_count() const { return grid_resolution * grid_resolution * grid_resolution; }
  std::size_t positional_dim() const { return 3 + 6 * frequencies; }
  /// Length of one sample's flattened geometry feature tap.
  std::size_t tap_length() const { return vertex_count() * 2 * geo_hidden; }
  /// Deformation components lie in [-bound, bound].
  double deformation_bound() const { return 0.5 / static_cast<double>(grid_resolution); }

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Paired geometry and texture codes, one row per sample.
struct LatentBatch {
  Array z1;
  Array z2;
  std::uint64_t seed = 0;

  std::size_t size() const { return z1.rank() == 2 ? z1.dim(0) : 0; }
};

/// Standard normal codes. z1 and z2 come from separately seeded streams.
LatentBatch sample_latents(std::size_t n, std::uint64_t seed, std::size_t latent_dim = 16);

/// Generator weights. Names follow `<network>.<layer>.<tensor>`; the
/// `mapping_geo`, `mapping_tex`, `geo` and `tex` prefixes select the four networks.
struct Generator {
  GeneratorConfig config;
  numerics::ParameterSet params;
  bool frozen_mapping = false;
  bool frozen_texture = false;

  bool is_mapping(const std::string& name) const;
  bool is_texture(const std::string& name) const;
  bool trainable(const std::string& name) const;
};

Generator initialize_generator(const GeneratorConfig& config, std::uint64_t seed);

/// Lattice vertex coordinates in [-1, 1]^3, vertex v = (iz * R + iy) * R + ix, as [V x 3].
Array lattice_positions(std::size_t resolution);
/// xyz followed by sin/cos(2^f pi c) for f < frequencies and each axis c, as [V x D].
Array positional_features(std::size_t resolution, std::size_t frequencies);

/// Generator parameters bound into one graph.
class GeneratorGraph {
 public:
  /// With `trainable` false every parameter is a constant (reference model).
  GeneratorGraph(numerics::Graph& graph, const Generator& generator, bool trainable = true);

  numerics::Graph& graph() const { return bound_.graph(); }
  const GeneratorConfig& config() const { return config_; }
  Var operator[](const std::string& name) const { return bound_[name]; }
  Var positions() const { return positions_; }
  const std::vector<std::string>& trainable_names() const { return bound_.trainable_names(); }

 private:
  GeneratorConfig config_;
  numerics::BoundParameters bound_;
  Var positions_;
};

struct MappedLatents {
  Var w1;  // [N x style]
  Var w2;  // [N x style]
};

struct ShapeFieldVars {
  Var sdf;     // [V]
  Var deform;  // [V x 3]
  Var tap;     // [V * 2 * geo_hidden]
};

struct TextureFieldVars {
  Var colors;    // [V x 3], in [0, 1]
  Var features;  // [V x tex_features], pre-color activations
};

MappedLatents map_latents(const GeneratorGraph& g, const LatentBatch& batch);
std::vector<ShapeFieldVars> synthesize_geometry(const GeneratorGraph& g, Var w1);
/// Texture field evaluated at the lattice vertices; the renderer interpolates
/// it at ray sample positions.
std::vector<TextureFieldVars> synthesize_texture(const GeneratorGraph& g, Var w1, Var w2);

/// Plain-value shape field of one sample.
struct ShapeField {
  std::size_t resolution = 0;
  Array sdf;
  Array deform;
  Array tap;
};

struct TextureField {
  Array colors;
  Array features;
};

struct GeneratedBatch {
  std::vector<ShapeField> shapes;
  std::vector<TextureField> textures;
};

/// Forward evaluation without gradients. Taps are large and only kept on request.
GeneratedBatch generate(const Generator& generator, const LatentBatch& batch, bool keep_taps = false);

}  // namespace fs3d::generator
