#pragma once

#include <cstddef>
#include <vector>

#include "fs3d/numerics/graph.hpp"

namespace fs3d::renderer {

using numerics::Array;
using numerics::Var;

inline constexpr double kDefaultElevation = 0.349;

struct Camera {
  double azimuth = 0.0;
  double elevation = kDefaultElevation;
  double half_width = 1.0;

  friend bool operator==(const Camera&, const Camera&) = default;
};

/// `count` cameras at azimuths 2 pi k / count.
std::vector<Camera> camera_ring(std::size_t count, double elevation = kDefaultElevation);

struct RenderSettings {
  std::size_t resolution = 32;
  std::size_t samples = 24;
  double temperature = 0.05;
};

/// Soft silhouette compositing of a lattice field along orthographic rays.
///
/// `sdf` is [V], `deform` is [V x 3] and `attrs` is [V x C] or invalid for C = 0,
/// all on the R^3 lattice spanning [-1, 1]^3. The result is [P x (1 + C)] for
/// P = resolution^2 pixels in row-major order, top row first: column 0 is the
/// mask and the remaining columns are the composited attributes over a zero
/// background. Occupancy at a sample x uses the SDF at x + deform(x); the
/// attributes are read at x.
Var render_fields(Var sdf, Var deform, Var attrs, std::size_t grid_resolution, const Camera& camera,
                  const RenderSettings& settings);

/// Graph handles of one rendered view.
struct ViewVars {
  Var mask;      // [P]
  Var rgb;       // [P x 3], invalid when rendered without colors
  Var features;  // [P x F], invalid when rendered without features
};

/// Renders colors and features together; either may be invalid.
ViewVars render(Var sdf, Var deform, Var colors, Var features, std::size_t grid_resolution,
                const Camera& camera, const RenderSettings& settings);

struct RenderedView {
  Array mask;      // [R x R]
  Array rgb;       // [R x R x 3], empty without colors
  Array features;  // [R x R x F], empty without features
  Camera camera;
};

/// Plain-value render. Empty `colors` or `features` arrays are skipped.
RenderedView render_view(const Array& sdf, const Array& deform, const Array& colors, const Array& features,
                         std::size_t grid_resolution, const Camera& camera, const RenderSettings& settings);

}  // namespace fs3d::renderer
