#include "fs3d/data/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/random.hpp"

namespace fs3d::data {

using numerics::Array;
using numerics::Shape;

namespace {

constexpr double kCubeLimit = 0.9;

double box_sdf(const Vec3& p, const Vec3& center, const Vec3& half) {
  double outside = 0.0;
  double inside = -1e300;
  for (int c = 0; c < 3; ++c) {
    const double q = std::abs(p[c] - center[c]) - half[c];
    outside += std::max(q, 0.0) * std::max(q, 0.0);
    inside = std::max(inside, q);
  }
  return std::sqrt(outside) + std::min(inside, 0.0);
}

struct Sampler {
  std::mt19937_64 rng;
  double operator()(const Range& r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
  }
};

void check_range(const Range& r, const std::string& what, double lo, double hi) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw ConfigError("family range " + what + " is empty or not finite");
  }
  if (r.lo < lo || r.hi > hi) {
    throw ConfigError("family range " + what + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "]");
  }
}

ColorFunction gradient_color(Vec3 base, Vec3 accent) {
  return [base, accent](const Vec3& p) {
    const double t = std::clamp(0.5 * (p[1] + 1.0), 0.0, 1.0);
    Vec3 c;
    for (int k = 0; k < 3; ++k) c[k] = base[k] + (accent[k] - base[k]) * t;
    return c;
  };
}

SdfFunction superellipsoid(Vec3 half, double e) {
  const double scale = std::min({half[0], half[1], half[2]});
  return [half, e, scale](const Vec3& p) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::pow(std::abs(p[c]) / half[c], e);
    return (std::pow(s, 1.0 / e) - 1.0) * scale;
  };
}

SdfFunction box_union(Vec3 half, double shift, double ratio) {
  const Vec3 top{half[0] * ratio, half[1] * ratio, half[2] * ratio};
  const Vec3 low_center{0.0, -0.5 * top[1], 0.0};
  const Vec3 top_center{shift, half[1] - 0.5 * top[1], 0.0};
  return [half, top, low_center, top_center](const Vec3& p) {
    return std::min(box_sdf(p, low_center, half), box_sdf(p, top_center, top));
  };
}

SdfFunction chair_frame(Vec3 half, double seat, double t) {
  struct Box {
    Vec3 center, half;
  };
  std::vector<Box> parts;
  parts.push_back({{0.0, seat, 0.0}, {half[0], t, half[2]}});
  const double leg_half = 0.5 * (seat + half[1]);
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      parts.push_back({{sx * (half[0] - t), 0.5 * (seat - half[1]), sz * (half[2] - t)}, {t, leg_half, t}});
    }
  }
  parts.push_back({{0.0, 0.5 * (seat + half[1]), -(half[2] - t)}, {half[0], 0.5 * (half[1] - seat), t}});
  return [parts](const Vec3& p) {
    double d = 1e300;
    for (const Box& b : parts) d = std::min(d, box_sdf(p, b.center, b.half));
    return d;
  };
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Superellipsoid: return "superellipsoid";
    case FamilyKind::BoxUnion: return "box-union";
    case FamilyKind::ChairFrame: return "chair-frame";
  }
  return "unknown";
}

FamilyKind parse_family_kind(const std::string& text) {
  for (FamilyKind k : {FamilyKind::Superellipsoid, FamilyKind::BoxUnion, FamilyKind::ChairFrame}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown family kind '" + text + "'");
}

void FamilySpec::validate() const {
  check_range(extent_x, "extent_x", 0.05, kCubeLimit);
  check_range(extent_y, "extent_y", 0.05, kCubeLimit);
  check_range(extent_z, "extent_z", 0.05, kCubeLimit);
  check_range(exponent, "exponent", 1.0, 64.0);
  for (int c = 0; c < 3; ++c) {
    check_range(base_color[c], "base_color", 0.0, 1.0);
    check_range(accent_color[c], "accent_color", 0.0, 1.0);
  }
  switch (kind) {
    case FamilyKind::Superellipsoid: break;
    case FamilyKind::BoxUnion:
      check_range(offset, "offset", -kCubeLimit, kCubeLimit);
      check_range(detail, "detail", 0.05, 1.0);
      if (extent_y.hi * (1.0 + 0.5 * detail.hi) > kCubeLimit ||
          std::max(std::abs(offset.lo), std::abs(offset.hi)) + extent_x.hi * detail.hi > kCubeLimit) {
        throw ConfigError("box-union ranges leave the unit cube margin");
      }
      break;
    case FamilyKind::ChairFrame:
      check_range(offset, "offset", -kCubeLimit, kCubeLimit);
      check_range(detail, "detail", 0.01, kCubeLimit);
      if (offset.hi + detail.hi >= extent_y.lo || offset.lo - detail.hi <= -extent_y.lo) {
        throw ConfigError("chair-frame seat must lie strictly between the floor and the backrest top");
      }
      if (2.0 * detail.hi >= std::min(extent_x.lo, extent_z.lo)) {
        throw ConfigError("chair-frame thickness must be below half the seat size");
      }
      break;
  }
}

bool FamilySpec::contains(const FamilySpec& other) const {
  if (kind != other.kind) return false;
  bool ok = extent_x.contains(other.extent_x) && extent_y.contains(other.extent_y) &&
            extent_z.contains(other.extent_z) && exponent.contains(other.exponent) && offset.contains(other.offset) &&
            detail.contains(other.detail);
  for (int c = 0; c < 3; ++c) {
    ok = ok && base_color[c].contains(other.base_color[c]) && accent_color[c].contains(other.accent_color[c]);
  }
  return ok;
}

FamilySpec family_preset(const std::string& name) {
  FamilySpec s;
  if (name == "source") return s;
  if (name == "target") {
    s.extent_x = {0.75, 0.9};
    s.extent_y = {0.3, 0.45};
    s.extent_z = {0.3, 0.45};
    s.exponent = {8.0, 10.0};
    s.base_color = {Range{0.6, 0.85}, Range{0.15, 0.3}, Range{0.1, 0.25}};
    s.accent_color = {Range{0.7, 0.9}, Range{0.6, 0.8}, Range{0.2, 0.35}};
    return s;
  }
  if (name == "boxes") {
    s.kind = FamilyKind::BoxUnion;
    s.extent_x = {0.5, 0.8};
    s.extent_y = {0.15, 0.3};
    s.extent_z = {0.3, 0.6};
    s.exponent = {2.0, 2.0};
    s.offset = {-0.2, 0.2};
    s.detail = {0.4, 0.7};
    return s;
  }
  if (name == "chairs") {
    s.kind = FamilyKind::ChairFrame;
    s.extent_x = {0.4, 0.7};
    s.extent_y = {0.6, 0.9};
    s.extent_z = {0.4, 0.7};
    s.exponent = {2.0, 2.0};
    s.offset = {-0.2, 0.1};
    s.detail = {0.06, 0.12};
    return s;
  }
  throw ConfigError("unknown family preset '" + name + "'");
}

std::vector<std::string> family_preset_names() { return {"source", "target", "boxes", "chairs"}; }

std::vector<AnalyticShape> make_family(const FamilySpec& spec, std::size_t n, std::uint64_t seed,
                                       std::size_t check_resolution) {
  spec.validate();
  if (n == 0) throw ConfigError("a family needs at least one shape");
  std::vector<AnalyticShape> shapes;
  shapes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sampler draw{std::mt19937_64(numerics::derive_seed(seed, i))};
    const Vec3 half{draw(spec.extent_x), draw(spec.extent_y), draw(spec.extent_z)};
    const double e = draw(spec.exponent);
    const double offset = draw(spec.offset);
    const double detail = draw(spec.detail);
    Vec3 base, accent;
    for (int c = 0; c < 3; ++c) base[c] = draw(spec.base_color[c]);
    for (int c = 0; c < 3; ++c) accent[c] = draw(spec.accent_color[c]);

    AnalyticShape shape;
    shape.label = to_string(spec.kind) + "_" + std::to_string(i);
    switch (spec.kind) {
      case FamilyKind::Superellipsoid: shape.sdf = superellipsoid(half, e); break;
      case FamilyKind::BoxUnion: shape.sdf = box_union(half, offset, detail); break;
      case FamilyKind::ChairFrame: shape.sdf = chair_frame(half, offset, detail); break;
    }
    shape.color = gradient_color(base, accent);
    require_sign_change(sample_sdf(shape.sdf, check_resolution), shape.label);
    shapes.push_back(std::move(shape));
  }
  return shapes;
}

Array sample_sdf(const SdfFunction& sdf, std::size_t resolution) {
  const Array xyz = generator::lattice_positions(resolution);
  const std::size_t count = xyz.dim(0);
  Array out(Shape{count});
  for (std::size_t v = 0; v < count; ++v) out[v] = sdf({xyz[v * 3], xyz[v * 3 + 1], xyz[v * 3 + 2]});
  return out;
}

Array sample_colors(const ColorFunction& color, std::size_t resolution) {
  const Array xyz = generator::lattice_positions(resolution);
  const std::size_t count = xyz.dim(0);
  Array out(Shape{count, 3});
  for (std::size_t v = 0; v < count; ++v) {
    const Vec3 c = color({xyz[v * 3], xyz[v * 3 + 1], xyz[v * 3 + 2]});
    for (int k = 0; k < 3; ++k) out[v * 3 + k] = c[k];
  }
  return out;
}

generator::ShapeField shape_field(const AnalyticShape& shape, std::size_t resolution) {
  generator::ShapeField field;
  field.resolution = resolution;
  field.sdf = sample_sdf(shape.sdf, resolution);
  field.deform = Array(Shape{field.sdf.size(), 3}, 0.0);
  return field;
}

void require_sign_change(const Array& sdf, const std::string& label) {
  bool negative = false, positive = false;
  for (double v : sdf.values()) {
    if (!std::isfinite(v)) throw NumericError("shape " + label + " has a non-finite SDF sample");
    negative = negative || v < 0.0;
    positive = positive || v > 0.0;
  }
  if (!negative || !positive) {
    throw DegenerateShapeError("shape " + label + " does not change sign on the lattice");
  }
}

}  // namespace fs3d::data
