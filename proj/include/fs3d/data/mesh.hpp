#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "fs3d/data/shapes.hpp"

namespace fs3d::data {

struct Triangle {
  Vec3 a, b, c;
};

/// Signed distance to a triangle soup. The magnitude is the exact unsigned
/// distance; the sign is a majority vote of ray parity along three
/// near-axis directions.
class MeshSdf {
 public:
  explicit MeshSdf(std::vector<Triangle> triangles);

  double operator()(const Vec3& p) const;
  double unsigned_distance(const Vec3& p) const;
  bool inside(const Vec3& p) const;
  const std::vector<Triangle>& triangles() const { return triangles_; }

 private:
  std::vector<Triangle> triangles_;
};

struct IngestedMesh {
  AnalyticShape shape;
  std::size_t faces = 0;
  std::vector<std::string> warnings;
};

/// Reads an ASCII OBJ. Polygons are fan-triangulated, zero-area faces are
/// skipped with a warning, and the mesh is centred and scaled so its longest
/// half-extent is 0.9. Errors carry the offending line number.
IngestedMesh ingest_obj(std::istream& in, const std::string& label, std::size_t check_resolution = 16);
IngestedMesh ingest_mesh(const std::filesystem::path& path, std::size_t check_resolution = 16);

}  // namespace fs3d::data
