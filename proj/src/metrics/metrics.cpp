#include "fs3d/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "fs3d/adversarial/adversarial.hpp"
#include "fs3d/errors.hpp"
#include "fs3d/numerics/random.hpp"
#include "json.hpp"

namespace fs3d::metrics {

using numerics::Array;

namespace {

constexpr std::size_t kPatch = 4;
constexpr std::size_t kLevels = 3;
constexpr std::size_t kGenerateChunk = 25;

double squared_distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

double mean_nearest(const PointCloud& from, const PointCloud& to) {
  double total = 0.0;
  for (const Point& p : from) {
    double best = squared_distance(p, to[0]);
    for (std::size_t j = 1; j < to.size(); ++j) best = std::min(best, squared_distance(p, to[j]));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

// [R x R x C] stack of the mask and, when shared, the RGB channels.
struct Image {
  std::size_t size = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * size + x) * channels + c]; }
};

Image stack(const renderer::RenderedView& v, bool with_rgb) {
  Image img;
  img.size = v.mask.dim(0);
  img.channels = with_rgb ? 4 : 1;
  img.pixels.resize(img.size * img.size * img.channels);
  for (std::size_t p = 0; p < img.size * img.size; ++p) {
    img.pixels[p * img.channels] = v.mask[p];
    if (with_rgb) {
      for (std::size_t c = 0; c < 3; ++c) img.pixels[p * img.channels + 1 + c] = v.rgb[p * 3 + c];
    }
  }
  return img;
}

Image pool(const Image& in) {
  Image out;
  out.size = in.size / 2;
  out.channels = in.channels;
  out.pixels.resize(out.size * out.size * out.channels);
  for (std::size_t y = 0; y < out.size; ++y) {
    for (std::size_t x = 0; x < out.size; ++x) {
      for (std::size_t c = 0; c < in.channels; ++c) {
        out.pixels[(y * out.size + x) * out.channels + c] =
            0.25 * (in.at(2 * y, 2 * x, c) + in.at(2 * y, 2 * x + 1, c) + in.at(2 * y + 1, 2 * x, c) +
                    in.at(2 * y + 1, 2 * x + 1, c));
      }
    }
  }
  return out;
}

// Per 4x4 patch and channel: mean then variance, interleaved.
std::vector<double> patch_stats(const Image& img) {
  const std::size_t patches = img.size / kPatch;
  std::vector<double> out;
  out.reserve(patches * patches * img.channels * 2);
  const double count = static_cast<double>(kPatch * kPatch);
  for (std::size_t py = 0; py < patches; ++py) {
    for (std::size_t px = 0; px < patches; ++px) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        double sum = 0.0;
        for (std::size_t y = 0; y < kPatch; ++y) {
          for (std::size_t x = 0; x < kPatch; ++x) sum += img.at(py * kPatch + y, px * kPatch + x, c);
        }
        const double mean = sum / count;
        double var = 0.0;
        for (std::size_t y = 0; y < kPatch; ++y) {
          for (std::size_t x = 0; x < kPatch; ++x) {
            const double d = img.at(py * kPatch + y, px * kPatch + x, c) - mean;
            var += d * d;
          }
        }
        out.push_back(mean);
        out.push_back(var / count);
      }
    }
  }
  return out;
}

std::string format_mean_std(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f +- %.3f", m.mean, m.std);
  return buf;
}

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

// Stand-in cloud for a field without a sign change: the vertices whose
// values are nearest zero, in vertex order.
PointCloud closest_vertices(const generator::ShapeField& shape, std::size_t n) {
  const Array xyz = generator::lattice_positions(shape.resolution);
  std::vector<std::size_t> order(shape.sdf.size());
  std::iota(order.begin(), order.end(), 0);
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = std::abs(shape.sdf[a]), db = std::abs(shape.sdf[b]);
                      return da < db || (da == db && a < b);
                    });
  order.resize(n);
  std::sort(order.begin(), order.end());
  PointCloud out;
  for (std::size_t v : order) out.push_back({xyz[v * 3], xyz[v * 3 + 1], xyz[v * 3 + 2]});
  return out;
}

}  // namespace

PointCloud sample_surface_points(const generator::ShapeField& shape, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("surface sampling needs n >= 1");
  const std::size_t r = shape.resolution;
  if (r < 2 || shape.sdf.size() != r * r * r) throw StructuralError("shape field does not match its resolution");
  const bool deformed = !shape.deform.empty();
  if (deformed && shape.deform.size() != shape.sdf.size() * 3) {
    throw StructuralError("deformation does not match the shape field");
  }
  const Array xyz = generator::lattice_positions(r);
  PointCloud crossings;
  for (const auto& [i, j] : adversarial::grid_topology(r).edges) {
    const double si = shape.sdf[i], sj = shape.sdf[j];
    if ((si < 0.0) == (sj < 0.0)) continue;
    const double t = si / (si - sj);
    Point p;
    for (std::size_t c = 0; c < 3; ++c) {
      p[c] = xyz[i * 3 + c] + t * (xyz[j * 3 + c] - xyz[i * 3 + c]);
      if (deformed) {
        p[c] -= shape.deform[i * 3 + c] + t * (shape.deform[j * 3 + c] - shape.deform[i * 3 + c]);
      }
    }
    crossings.push_back(p);
  }
  if (crossings.empty()) throw DegenerateShapeError("shape field has no zero crossing to sample");

  std::mt19937_64 rng(seed);
  if (crossings.size() >= n) {
    std::vector<std::size_t> order(crossings.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
      std::swap(order[k], order[pick(rng)]);
    }
    order.resize(n);
    std::sort(order.begin(), order.end());
    PointCloud out;
    out.reserve(n);
    for (std::size_t k : order) out.push_back(crossings[k]);
    return out;
  }
  PointCloud out = crossings;
  std::uniform_int_distribution<std::size_t> pick(0, crossings.size() - 1);
  while (out.size() < n) out.push_back(crossings[pick(rng)]);
  return out;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw ContractError("chamfer needs non-empty point clouds");
  return mean_nearest(a, b) + mean_nearest(b, a);
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("mean_std of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

MeanStd pairwise_diversity(std::size_t count, const PairDistance& distance) {
  if (count < 2) throw ContractError("pairwise diversity needs at least 2 items");
  std::vector<double> values;
  values.reserve(count * (count - 1) / 2);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = i + 1; j < count; ++j) values.push_back(distance(i, j));
  }
  return mean_std(values);
}

std::vector<std::size_t> assign_clusters(std::size_t items, std::size_t references, const PairDistance& distance) {
  if (references == 0) throw ContractError("cluster assignment needs at least one reference");
  std::vector<std::size_t> out(items, 0);
  for (std::size_t i = 0; i < items; ++i) {
    double best = distance(i, 0);
    for (std::size_t r = 1; r < references; ++r) {
      const double d = distance(i, r);
      if (d < best) {
        best = d;
        out[i] = r;
      }
    }
  }
  return out;
}

MeanStd intra_diversity(const std::vector<std::size_t>& assignment, std::size_t clusters,
                        const PairDistance& distance) {
  if (clusters == 0) throw ContractError("intra diversity needs at least one cluster");
  std::vector<std::vector<std::size_t>> members(clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] >= clusters) throw ContractError("cluster index out of range");
    members[assignment[i]].push_back(i);
  }
  std::vector<double> per_cluster;
  for (const auto& m : members) {
    if (m.size() < 2) {
      per_cluster.push_back(0.0);
      continue;
    }
    double total = 0.0;
    for (std::size_t a = 0; a < m.size(); ++a) {
      for (std::size_t b = a + 1; b < m.size(); ++b) total += distance(m[a], m[b]);
    }
    per_cluster.push_back(total / static_cast<double>(m.size() * (m.size() - 1) / 2));
  }
  return mean_std(per_cluster);
}

double perceptual_proxy(const renderer::RenderedView& a, const renderer::RenderedView& b) {
  if (a.mask.shape() != b.mask.shape() || a.mask.rank() != 2 || a.mask.dim(0) != a.mask.dim(1)) {
    throw ContractError("perceptual proxy needs square views of one resolution");
  }
  if (!(a.camera == b.camera)) throw ContractError("perceptual proxy compares views from different cameras");
  const std::size_t r = a.mask.dim(0);
  if (r % (kPatch << (kLevels - 1)) != 0) {
    throw ContractError("perceptual proxy needs a resolution divisible by " +
                        std::to_string(kPatch << (kLevels - 1)));
  }
  const bool rgb = !a.rgb.empty() && !b.rgb.empty();
  Image ia = stack(a, rgb), ib = stack(b, rgb);
  double total = 0.0;
  for (std::size_t level = 0; level < kLevels; ++level) {
    if (level > 0) {
      ia = pool(ia);
      ib = pool(ib);
    }
    const std::vector<double> sa = patch_stats(ia), sb = patch_stats(ib);
    double mean_term = 0.0, var_term = 0.0;
    for (std::size_t k = 0; k < sa.size(); k += 2) {
      mean_term += (sa[k] - sb[k]) * (sa[k] - sb[k]);
      var_term += (sa[k + 1] - sb[k + 1]) * (sa[k + 1] - sb[k + 1]);
    }
    const double count = static_cast<double>(sa.size() / 2);
    total += (mean_term + var_term) / count;
  }
  return total / static_cast<double>(kLevels);
}

double view_set_distance(const ViewSet& a, const ViewSet& b) {
  if (a.empty() || a.size() != b.size()) throw ContractError("view sets must be non-empty and of equal size");
  double total = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) total += perceptual_proxy(a[v], b[v]);
  return total / static_cast<double>(a.size());
}

double cd_to_target(const std::vector<PointCloud>& generated, const std::vector<PointCloud>& targets) {
  if (targets.empty()) throw ContractError("cd_to_target needs a non-empty target set");
  if (generated.empty()) throw ContractError("cd_to_target needs at least one generated sample");
  double total = 0.0;
  for (const PointCloud& g : generated) {
    double best = chamfer(g, targets[0]);
    for (std::size_t t = 1; t < targets.size(); ++t) best = std::min(best, chamfer(g, targets[t]));
    total += best;
  }
  return total / static_cast<double>(generated.size());
}

EvalPreset eval_preset(const std::string& name) {
  EvalPreset p;
  if (name == "desk") return p;
  if (name == "full") {
    p.name = "full";
    p.cd_samples = 5000;
    p.pairwise_samples = 1000;
    p.intra_samples = 1000;
    return p;
  }
  throw ConfigError("unknown evaluation preset '" + name + "' (expected desk or full)");
}

std::string MetricReport::to_json() const {
  nlohmann::json doc = {{"preset", preset},
                        {"seed", seed},
                        {"cd_to_target", cd_to_target},
                        {"intra_cd", mean_std_json(intra_cd)},
                        {"pairwise_cd", mean_std_json(pairwise_cd)},
                        {"intra_perc", mean_std_json(intra_perc)},
                        {"pairwise_perc", mean_std_json(pairwise_perc)},
                        {"cd_scale", kChamferScale},
                        {"counts",
                         {{"cd_samples", cd_samples},
                          {"pairwise_samples", pairwise_samples},
                          {"intra_samples", intra_samples},
                          {"target_samples", target_samples},
                          {"references", references},
                          {"degenerate_samples", degenerate_samples}}},
                        {"cluster_sizes", cluster_sizes},
                        {"perceptual_metric", "pyramid patch statistics"},
                        {"excluded", {"FID"}}};
  return doc.dump(2) + "\n";
}

std::string MetricReport::to_table(const std::string& label) const {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-12s %10s %18s %18s %18s %18s\n", "model", "CD", "Intra-CD", "Pairwise-CD",
                "Intra-perc", "Pairwise-perc");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-12s %10.3f %18s %18s %18s %18s\n", label.c_str(), cd_to_target,
                format_mean_std(intra_cd).c_str(), format_mean_std(pairwise_cd).c_str(),
                format_mean_std(intra_perc).c_str(), format_mean_std(pairwise_perc).c_str());
  out += buf;
  return out;
}

EvalInputs make_eval_inputs(const data::FamilyRecord& fewshot, std::size_t grid_resolution,
                            const EvalPreset& preset) {
  EvalInputs in;
  const auto cameras = renderer::camera_ring(preset.views);
  data::RenderDatasetOptions options;
  options.resolution = preset.resolution;
  options.with_rgb = true;
  for (const data::AnalyticShape& shape : fewshot.shapes()) {
    ViewSet views;
    for (const auto& camera : cameras) views.push_back(data::render_shape(shape, camera, options));
    in.reference_views.push_back(std::move(views));
  }
  const auto held_out =
      data::make_family(fewshot.spec, preset.target_samples, numerics::derive_seed(fewshot.seed, 0x7e57));
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    in.target_clouds.push_back(sample_surface_points(data::shape_field(held_out[i], grid_resolution),
                                                     preset.surface_points, numerics::derive_seed(fewshot.seed, i)));
  }
  return in;
}

GeneratedSet sample_model(const generator::Generator& generator, std::size_t clouds, std::size_t views,
                          const EvalPreset& preset, std::uint64_t seed) {
  GeneratedSet out;
  const std::size_t total = std::max(clouds, views);
  if (total == 0) return out;
  const auto latents = generator::sample_latents(total, seed, generator.config.latent_dim);
  const auto cameras = renderer::camera_ring(preset.views);
  const renderer::RenderSettings settings{preset.resolution, 24, 0.05};
  const std::size_t dim = generator.config.latent_dim;
  const std::size_t grid = generator.config.grid_resolution;
  for (std::size_t start = 0; start < total; start += kGenerateChunk) {
    const std::size_t count = std::min(kGenerateChunk, total - start);
    generator::LatentBatch chunk;
    chunk.seed = latents.seed;
    chunk.z1 = Array(numerics::Shape{count, dim});
    chunk.z2 = Array(numerics::Shape{count, dim});
    std::copy_n(latents.z1.data() + start * dim, count * dim, chunk.z1.data());
    std::copy_n(latents.z2.data() + start * dim, count * dim, chunk.z2.data());
    const generator::GeneratedBatch batch = generator::generate(generator, chunk);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = start + k;
      const auto& shape = batch.shapes[k];
      if (i < clouds) {
        try {
          out.clouds.push_back(sample_surface_points(shape, preset.surface_points, numerics::derive_seed(seed, i)));
        } catch (const DegenerateShapeError&) {
          out.clouds.push_back(closest_vertices(shape, preset.surface_points));
          ++out.degenerate;
        }
      }
      if (i < views) {
        ViewSet set;
        for (const auto& camera : cameras) {
          set.push_back(
              renderer::render_view(shape.sdf, shape.deform, batch.textures[k].colors, Array(), grid, camera, settings));
        }
        out.views.push_back(std::move(set));
      }
    }
  }
  return out;
}

MetricReport evaluate(const GeneratedSet& generated, const EvalInputs& inputs, const EvalPreset& preset,
                      std::uint64_t seed) {
  MetricReport r;
  r.preset = preset.name;
  r.seed = seed;
  r.references = inputs.reference_views.size();
  r.degenerate_samples = generated.degenerate;
  r.target_samples = inputs.target_clouds.size();
  r.cd_samples = std::min(preset.cd_samples, generated.clouds.size());
  r.pairwise_samples = std::min({preset.pairwise_samples, generated.clouds.size(), generated.views.size()});
  r.intra_samples = std::min({preset.intra_samples, generated.clouds.size(), generated.views.size()});

  const std::vector<PointCloud> cd_set(generated.clouds.begin(), generated.clouds.begin() + r.cd_samples);
  r.cd_to_target = kChamferScale * cd_to_target(cd_set, inputs.target_clouds);

  const auto& clouds = generated.clouds;
  const auto& views = generated.views;
  const PairDistance cd = [&](std::size_t i, std::size_t j) { return kChamferScale * chamfer(clouds[i], clouds[j]); };
  const PairDistance perc = [&](std::size_t i, std::size_t j) { return view_set_distance(views[i], views[j]); };
  r.pairwise_cd = pairwise_diversity(r.pairwise_samples, cd);
  r.pairwise_perc = pairwise_diversity(r.pairwise_samples, perc);

  const auto assignment = assign_clusters(r.intra_samples, r.references, [&](std::size_t i, std::size_t ref) {
    return view_set_distance(views[i], inputs.reference_views[ref]);
  });
  r.cluster_sizes.assign(r.references, 0);
  for (std::size_t c : assignment) ++r.cluster_sizes[c];
  r.intra_cd = intra_diversity(assignment, r.references, cd);
  r.intra_perc = intra_diversity(assignment, r.references, perc);
  return r;
}

MetricReport evaluate_model(const generator::Generator& generator, const EvalInputs& inputs,
                            const EvalPreset& preset, std::uint64_t seed) {
  const std::size_t clouds = std::max({preset.cd_samples, preset.pairwise_samples, preset.intra_samples});
  const std::size_t views = std::max(preset.pairwise_samples, preset.intra_samples);
  return evaluate(sample_model(generator, clouds, views, preset, seed), inputs, preset, seed);
}

}  // namespace fs3d::metrics
