#include "fs3d/data/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "fs3d/errors.hpp"

namespace fs3d::data {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 axpy(double s, const Vec3& d, const Vec3& p) { return {p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]}; }

// Closest point on triangle abc to p.
Vec3 closest_point(const Vec3& p, const Triangle& t) {
  const Vec3 ab = sub(t.b, t.a), ac = sub(t.c, t.a), ap = sub(p, t.a);
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return t.a;
  const Vec3 bp = sub(p, t.b);
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return t.b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return axpy(d1 / (d1 - d3), ab, t.a);
  const Vec3 cp = sub(p, t.c);
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return t.c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return axpy(d2 / (d2 - d6), ac, t.a);
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return axpy((d4 - d3) / ((d4 - d3) + (d5 - d6)), sub(t.c, t.b), t.b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return axpy(vc * denom, ac, axpy(vb * denom, ab, t.a));
}

bool ray_hits(const Vec3& origin, const Vec3& dir, const Triangle& t) {
  const Vec3 e1 = sub(t.b, t.a), e2 = sub(t.c, t.a);
  const Vec3 h = cross(dir, e2);
  const double det = dot(e1, h);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 s = sub(origin, t.a);
  const double u = inv * dot(s, h);
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = cross(s, e1);
  const double v = inv * dot(dir, q);
  if (v < 0.0 || u + v > 1.0) return false;
  return inv * dot(e2, q) > 0.0;
}

// Slightly tilted off the axes so rays through lattice points miss mesh edges.
constexpr Vec3 kRays[3] = {
    {1.0, 0.0012345, 0.0023456},
    {0.0031415, 1.0, 0.0017321},
    {0.0014142, 0.0027183, 1.0},
};

std::size_t resolve_index(long long raw, std::size_t count, std::size_t line) {
  long long index = raw > 0 ? raw - 1 : static_cast<long long>(count) + raw;
  if (raw == 0 || index < 0 || index >= static_cast<long long>(count)) {
    throw IngestionError("face index " + std::to_string(raw) + " is out of range", line);
  }
  return static_cast<std::size_t>(index);
}

}  // namespace

MeshSdf::MeshSdf(std::vector<Triangle> triangles) : triangles_(std::move(triangles)) {
  if (triangles_.empty()) throw ContractError("mesh SDF needs at least one triangle");
}

double MeshSdf::unsigned_distance(const Vec3& p) const {
  double best = 1e300;
  for (const Triangle& t : triangles_) {
    const Vec3 d = sub(p, closest_point(p, t));
    best = std::min(best, dot(d, d));
  }
  return std::sqrt(best);
}

bool MeshSdf::inside(const Vec3& p) const {
  int votes = 0;
  for (const Vec3& dir : kRays) {
    std::size_t hits = 0;
    for (const Triangle& t : triangles_) hits += ray_hits(p, dir, t) ? 1 : 0;
    votes += static_cast<int>(hits % 2);
  }
  return votes >= 2;
}

double MeshSdf::operator()(const Vec3& p) const {
  const double d = unsigned_distance(p);
  return inside(p) ? -d : d;
}

IngestedMesh ingest_obj(std::istream& in, const std::string& label, std::size_t check_resolution) {
  std::vector<Vec3> vertices;
  struct Face {
    std::vector<std::size_t> corners;
    std::size_t line;
  };
  std::vector<Face> faces;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    std::istringstream tokens(text);
    std::string keyword;
    if (!(tokens >> keyword)) continue;
    if (keyword == "v") {
      Vec3 v;
      if (!(tokens >> v[0] >> v[1] >> v[2])) throw IngestionError("vertex needs three coordinates", line);
      if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
        throw IngestionError("vertex has a non-finite coordinate", line);
      }
      vertices.push_back(v);
    } else if (keyword == "f") {
      Face face{{}, line};
      std::string corner;
      while (tokens >> corner) {
        const std::string head = corner.substr(0, corner.find('/'));
        std::size_t used = 0;
        long long raw = 0;
        try {
          raw = std::stoll(head, &used);
        } catch (const std::exception&) {
          throw IngestionError("cannot parse face corner '" + corner + "'", line);
        }
        if (used != head.size()) throw IngestionError("cannot parse face corner '" + corner + "'", line);
        face.corners.push_back(resolve_index(raw, vertices.size(), line));
      }
      if (face.corners.size() < 3) throw IngestionError("face needs at least three corners", line);
      faces.push_back(std::move(face));
    } else if (keyword == "vn" || keyword == "vt" || keyword == "vp" || keyword == "o" || keyword == "g" ||
               keyword == "s" || keyword == "usemtl" || keyword == "mtllib" || keyword == "l" || keyword == "p") {
      continue;
    } else {
      throw IngestionError("unknown statement '" + keyword + "'", line);
    }
  }
  if (in.bad()) throw IngestionError("read failure", line);
  if (faces.empty()) throw IngestionError("mesh has no faces", line);

  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const Face& f : faces) {
    for (std::size_t i : f.corners) {
      for (int c = 0; c < 3; ++c) {
        lo[c] = std::min(lo[c], vertices[i][c]);
        hi[c] = std::max(hi[c], vertices[i][c]);
      }
    }
  }
  const double half = 0.5 * std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  if (!(half > 0.0)) throw IngestionError("mesh has zero extent", 0);
  const double scale = 0.9 / half;
  const auto normalize = [&](const Vec3& v) {
    Vec3 out;
    for (int c = 0; c < 3; ++c) out[c] = (v[c] - 0.5 * (lo[c] + hi[c])) * scale;
    return out;
  };

  IngestedMesh result;
  std::vector<Triangle> triangles;
  for (const Face& f : faces) {
    for (std::size_t k = 1; k + 1 < f.corners.size(); ++k) {
      const Triangle t{normalize(vertices[f.corners[0]]), normalize(vertices[f.corners[k]]),
                       normalize(vertices[f.corners[k + 1]])};
      const Vec3 n = cross(sub(t.b, t.a), sub(t.c, t.a));
      if (std::sqrt(dot(n, n)) <= 1e-12) {
        result.warnings.push_back("line " + std::to_string(f.line) + ": skipped zero-area face");
        continue;
      }
      triangles.push_back(t);
    }
  }
  if (triangles.empty()) throw IngestionError("mesh has no faces of nonzero area", line);
  result.faces = triangles.size();

  auto sdf = std::make_shared<MeshSdf>(std::move(triangles));
  result.shape.label = label;
  result.shape.sdf = [sdf](const Vec3& p) { return (*sdf)(p); };
  result.shape.color = [](const Vec3&) { return Vec3{0.7, 0.7, 0.7}; };
  require_sign_change(sample_sdf(result.shape.sdf, check_resolution), label);
  return result;
}

IngestedMesh ingest_mesh(const std::filesystem::path& path, std::size_t check_resolution) {
  std::ifstream in(path);
  if (!in) throw FilesystemError("cannot open mesh " + path.string());
  return ingest_obj(in, path.stem().string(), check_resolution);
}

}  // namespace fs3d::data
