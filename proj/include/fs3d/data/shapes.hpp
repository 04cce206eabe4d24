#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fs3d/generator/generator.hpp"

namespace fs3d::data {

using Vec3 = std::array<double, 3>;
using SdfFunction = std::function<double(const Vec3&)>;
using ColorFunction = std::function<Vec3(const Vec3&)>;

/// A shape given by closures over [-1, 1]^3. Negative SDF is inside.
struct AnalyticShape {
  std::string label;
  SdfFunction sdf;
  ColorFunction color;
};

enum class FamilyKind { Superellipsoid, BoxUnion, ChairFrame };

std::string to_string(FamilyKind kind);
FamilyKind parse_family_kind(const std::string& text);

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(const Range& other) const { return lo <= other.lo && other.hi <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Parameter ranges of one family. Extents are half-widths along x, y, z.
/// For box unions `offset` is the upper box's shift along x and `detail`
/// scales its extents; for chair frames `offset` is the seat height and
/// `detail` the leg and backrest thickness. Superellipsoids ignore both.
struct FamilySpec {
  FamilyKind kind = FamilyKind::Superellipsoid;
  Range extent_x{0.3, 0.9};
  Range extent_y{0.3, 0.9};
  Range extent_z{0.3, 0.9};
  Range exponent{2.0, 10.0};
  Range offset{0.0, 0.0};
  Range detail{0.0, 0.0};
  std::array<Range, 3> base_color{Range{0.1, 0.9}, Range{0.1, 0.9}, Range{0.1, 0.9}};
  std::array<Range, 3> accent_color{Range{0.1, 0.9}, Range{0.1, 0.9}, Range{0.1, 0.9}};

  /// Throws ConfigError for empty, inverted or out-of-cube ranges.
  void validate() const;
  /// Every range of `other` lies inside the matching range here.
  bool contains(const FamilySpec& other) const;
  friend bool operator==(const FamilySpec&, const FamilySpec&) = default;
};

/// Named presets: "source" (wide superellipsoids), "target" (elongated boxes),
/// "boxes" (box unions) and "chairs" (chair frames).
FamilySpec family_preset(const std::string& name);
std::vector<std::string> family_preset_names();

/// `n` shapes drawn from `spec`, deterministic in `seed`. Each shape is checked
/// to change sign on the `check_resolution` lattice.
std::vector<AnalyticShape> make_family(const FamilySpec& spec, std::size_t n, std::uint64_t seed,
                                       std::size_t check_resolution = 16);

/// SDF values on the R^3 lattice, vertex order as the generator's.
numerics::Array sample_sdf(const SdfFunction& sdf, std::size_t resolution);
/// Colors on the R^3 lattice as [V x 3].
numerics::Array sample_colors(const ColorFunction& color, std::size_t resolution);
/// Lattice shape field with zero deformation.
generator::ShapeField shape_field(const AnalyticShape& shape, std::size_t resolution);

/// Throws DegenerateShapeError unless the lattice samples take both signs.
void require_sign_change(const numerics::Array& sdf, const std::string& label);

}  // namespace fs3d::data
