#include <cmath>
#include <random>

#include "doctest.h"
#include "fs3d/data/shapes.hpp"
#include "fs3d/errors.hpp"
#include "fs3d/metrics/metrics.hpp"
#include "metrics_oracle.hpp"
#include "test_support.hpp"

using namespace fs3d::metrics;
using fs3d::numerics::Array;
using fs3d::numerics::Shape;
using fs3d::renderer::RenderedView;

namespace {

PointCloud random_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c(n);
  for (auto& p : c) p = {u(rng), u(rng), u(rng)};
  return c;
}

RenderedView random_view(std::size_t r, bool rgb, std::mt19937_64& rng) {
  RenderedView v;
  v.mask = fs3d::testing::random_array({r, r}, rng, 0.0, 1.0);
  if (rgb) v.rgb = fs3d::testing::random_array({r, r, 3}, rng, 0.0, 1.0);
  return v;
}

fs3d::oracle::Image as_image(const RenderedView& v) {
  const std::size_t r = v.mask.dim(0);
  const bool rgb = !v.rgb.empty();
  fs3d::oracle::Image img(r, std::vector<std::vector<double>>(r));
  for (std::size_t y = 0; y < r; ++y) {
    for (std::size_t x = 0; x < r; ++x) {
      img[y][x].push_back(v.mask[y * r + x]);
      if (rgb) {
        for (std::size_t c = 0; c < 3; ++c) img[y][x].push_back(v.rgb[(y * r + x) * 3 + c]);
      }
    }
  }
  return img;
}

fs3d::generator::ShapeField sphere_field(std::size_t r, double radius) {
  return fs3d::data::shape_field(
      {"sphere", [radius](const fs3d::data::Vec3& p) { return std::hypot(p[0], p[1], p[2]) - radius; }, nullptr}, r);
}

}  // namespace

TEST_CASE("chamfer closed forms and oracle") {
  CHECK(std::abs(chamfer({{0.0, 0.0, 0.0}}, {{3.0, 4.0, 0.0}}) - 50.0) <= 1e-9);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud a = random_cloud(1 + trial % 7 * 7, rng);
    const PointCloud b = random_cloud(20, rng);
    CHECK(chamfer(a, a) == 0.0);
    CHECK(chamfer(a, b) == doctest::Approx(chamfer(b, a)).epsilon(1e-15));
    CHECK(std::abs(chamfer(a, b) - fs3d::oracle::chamfer(a, b)) <= 1e-12);
    CHECK(chamfer(a, b) >= 0.0);
  }
  CHECK_THROWS_AS(chamfer({}, {{0.0, 0.0, 0.0}}), fs3d::ContractError);
}

TEST_CASE("pairwise diversity matches pair enumeration and ignores order") {
  std::mt19937_64 rng(2);
  std::vector<PointCloud> clouds;
  for (int i = 0; i < 6; ++i) clouds.push_back(random_cloud(12, rng));
  fs3d::oracle::Matrix d(6, std::vector<double>(6));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) d[i][j] = fs3d::oracle::chamfer(clouds[i], clouds[j]);
  }
  const MeanStd got = pairwise_diversity(6, [&](std::size_t i, std::size_t j) { return chamfer(clouds[i], clouds[j]); });
  const auto want = fs3d::oracle::pairwise(d);
  CHECK(std::abs(got.mean - want.mean) <= 1e-12);
  CHECK(std::abs(got.std - want.std) <= 1e-12);

  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  const MeanStd shuffled =
      pairwise_diversity(6, [&](std::size_t i, std::size_t j) { return chamfer(clouds[perm[i]], clouds[perm[j]]); });
  CHECK(std::abs(shuffled.mean - got.mean) <= 1e-12);
  CHECK(std::abs(shuffled.std - got.std) <= 1e-12);

  const MeanStd same = pairwise_diversity(5, [&](std::size_t, std::size_t) { return chamfer(clouds[0], clouds[0]); });
  CHECK(same.mean == 0.0);
  CHECK(same.std == 0.0);
  CHECK_THROWS_AS(pairwise_diversity(1, [](std::size_t, std::size_t) { return 0.0; }), fs3d::ContractError);
}

TEST_CASE("intra diversity matches the cluster oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  fs3d::oracle::Matrix to_ref(12, std::vector<double>(3)), within(12, std::vector<double>(12, 0.0));
  for (auto& row : to_ref) {
    for (double& v : row) v = u(rng);
  }
  to_ref[4] = {0.2, 0.2, 0.5};  // tie goes to reference 0
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i + 1; j < 12; ++j) within[i][j] = within[j][i] = u(rng);
  }
  const auto assignment = assign_clusters(12, 3, [&](std::size_t i, std::size_t r) { return to_ref[i][r]; });
  CHECK(assignment[4] == 0);
  const MeanStd got = intra_diversity(assignment, 3, [&](std::size_t i, std::size_t j) { return within[i][j]; });
  const auto want = fs3d::oracle::intra(to_ref, within);
  CHECK(std::abs(got.mean - want.mean) <= 1e-12);
  CHECK(std::abs(got.std - want.std) <= 1e-12);

  const MeanStd singles = intra_diversity({0, 1, 2}, 3, [](std::size_t, std::size_t) { return 1.0; });
  CHECK(singles.mean == 0.0);
  CHECK(singles.std == 0.0);
}

TEST_CASE("replicated references give zero intra diversity") {
  std::mt19937_64 rng(4);
  std::vector<ViewSet> refs;
  for (int i = 0; i < 10; ++i) refs.push_back({random_view(32, true, rng), random_view(32, true, rng)});
  std::vector<ViewSet> generated;
  for (int k = 0; k < 30; ++k) generated.push_back(refs[static_cast<std::size_t>(k % 10)]);
  const auto assignment =
      assign_clusters(30, 10, [&](std::size_t i, std::size_t r) { return view_set_distance(generated[i], refs[r]); });
  for (std::size_t k = 0; k < 30; ++k) CHECK(assignment[k] == k % 10);
  const MeanStd intra = intra_diversity(assignment, 10, [&](std::size_t i, std::size_t j) {
    return view_set_distance(generated[i], generated[j]);
  });
  CHECK(intra.mean == 0.0);
  CHECK(intra.std == 0.0);
}

TEST_CASE("perceptual proxy closed form, symmetry and oracle") {
  RenderedView black, white;
  black.mask = Array(Shape{32, 32}, 0.0);
  black.rgb = Array(Shape{32, 32, 3}, 0.0);
  white.mask = Array(Shape{32, 32}, 1.0);
  white.rgb = Array(Shape{32, 32, 3}, 1.0);
  CHECK(std::abs(perceptual_proxy(black, white) - 1.0) <= 1e-12);
  CHECK(perceptual_proxy(black, black) == 0.0);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const bool rgb = trial % 2 == 0;
    const RenderedView a = random_view(32, rgb, rng), b = random_view(32, rgb, rng);
    CHECK(perceptual_proxy(a, a) == 0.0);
    CHECK(perceptual_proxy(a, b) == perceptual_proxy(b, a));
    CHECK(perceptual_proxy(a, b) > 0.0);
    CHECK(std::abs(perceptual_proxy(a, b) - fs3d::oracle::perceptual(as_image(a), as_image(b))) <= 1e-12);
  }
  RenderedView small;
  small.mask = Array(Shape{16, 16}, 0.0);
  CHECK_THROWS_AS(perceptual_proxy(black, small), fs3d::ContractError);
  RenderedView odd;
  odd.mask = Array(Shape{24, 24}, 0.0);
  CHECK_THROWS_AS(perceptual_proxy(odd, odd), fs3d::ContractError);
  RenderedView turned = black;
  turned.camera.azimuth = 1.0;
  CHECK_THROWS_AS(perceptual_proxy(black, turned), fs3d::ContractError);
}

TEST_CASE("surface points of a sphere lie near its radius") {
  const auto field = sphere_field(16, 0.5);
  const double cell = 2.0 / 15.0;
  const PointCloud cloud = sample_surface_points(field, 256, 1);
  CHECK(cloud.size() == 256);
  for (const Point& p : cloud) CHECK(std::abs(std::hypot(p[0], p[1], p[2]) - 0.5) <= cell);
  CHECK(sample_surface_points(field, 256, 1) == cloud);
  CHECK_FALSE(sample_surface_points(field, 256, 2) == cloud);

  const PointCloud many = sample_surface_points(sphere_field(4, 0.7), 500, 3);
  CHECK(many.size() == 500);

  fs3d::generator::ShapeField full = field;
  full.sdf = Array(Shape{field.sdf.size()}, 1.0);
  CHECK_THROWS_AS(sample_surface_points(full, 16, 0), fs3d::DegenerateShapeError);
}

TEST_CASE("surface points follow the inverse deformation") {
  auto field = sphere_field(8, 0.6);
  const PointCloud plain = sample_surface_points(field, 64, 4);
  for (std::size_t v = 0; v < field.sdf.size(); ++v) field.deform[v * 3 + 1] = 0.03;
  const PointCloud moved = sample_surface_points(field, 64, 4);
  REQUIRE(moved.size() == plain.size());
  for (std::size_t k = 0; k < plain.size(); ++k) {
    CHECK(moved[k][0] == plain[k][0]);
    CHECK(moved[k][1] == doctest::Approx(plain[k][1] - 0.03).epsilon(1e-12));
  }
}

TEST_CASE("cd to target and report formatting") {
  std::mt19937_64 rng(6);
  std::vector<PointCloud> targets{random_cloud(10, rng), random_cloud(10, rng), random_cloud(10, rng)};
  CHECK(cd_to_target(targets, targets) == 0.0);
  const std::vector<PointCloud> gen{random_cloud(10, rng), random_cloud(10, rng)};
  double want = 0.0;
  for (const auto& g : gen) {
    double best = 1e300;
    for (const auto& t : targets) best = std::min(best, fs3d::oracle::chamfer(g, t));
    want += best / 2.0;
  }
  CHECK(std::abs(cd_to_target(gen, targets) - want) <= 1e-12);
  CHECK_THROWS_AS(cd_to_target(gen, {}), fs3d::ContractError);

  CHECK(eval_preset("full").cd_samples == 5000);
  CHECK(eval_preset("full").pairwise_samples == 1000);
  CHECK(eval_preset("desk").cd_samples == 200);
  CHECK_THROWS_AS(eval_preset("huge"), fs3d::ConfigError);

  MetricReport r;
  r.preset = "desk";
  r.cd_to_target = 1.5;
  const std::string table = r.to_table("ours");
  CHECK(table.find("CD") < table.find("Intra-CD"));
  CHECK(table.find("Intra-CD") < table.find("Pairwise-CD"));
  CHECK(table.find("Pairwise-CD") < table.find("Intra-perc"));
  CHECK(table.find("Intra-perc") < table.find("Pairwise-perc"));
  CHECK(r.to_json().find("\"cd_to_target\": 1.5") != std::string::npos);
}

TEST_CASE("model evaluation is deterministic") {
  const auto gen = fs3d::generator::initialize_generator({}, 3);
  EvalPreset preset;
  preset.cd_samples = 6;
  preset.pairwise_samples = 4;
  preset.intra_samples = 4;
  preset.target_samples = 5;
  preset.surface_points = 32;
  preset.views = 2;
  const fs3d::data::FamilyRecord fewshot{"target", fs3d::data::family_preset("target"), 3, 8};
  const EvalInputs inputs = make_eval_inputs(fewshot, 16, preset);
  CHECK(inputs.target_clouds.size() == 5);
  CHECK(inputs.reference_views.size() == 3);
  const MetricReport a = evaluate_model(gen, inputs, preset, 11);
  const MetricReport b = evaluate_model(gen, inputs, preset, 11);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.cd_samples == 6);
  CHECK(a.cd_to_target > 0.0);
  CHECK(a.pairwise_cd.std >= 0.0);
  CHECK(a.intra_perc.std >= 0.0);
  std::size_t members = 0;
  for (std::size_t s : a.cluster_sizes) members += s;
  CHECK(members == 4);
}
