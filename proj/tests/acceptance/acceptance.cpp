// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   fs3d_acceptance [--only 1,3,5] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "fs3d/adversarial/adversarial.hpp"
#include "fs3d/cli/cli.hpp"
#include "fs3d/cli/gradcheck.hpp"
#include "fs3d/data/shapes.hpp"
#include "fs3d/generator/generator.hpp"
#include "fs3d/metrics/metrics.hpp"
#include "fs3d/numerics/ops.hpp"
#include "fs3d/numerics/random.hpp"
#include "fs3d/rdp/rdp_losses.hpp"
#include "fs3d/renderer/renderer.hpp"
#include "fs3d/trainer/checkpoint.hpp"
#include "metrics_oracle.hpp"
#include "rdp_oracle.hpp"

using namespace fs3d;
using numerics::Array;
using numerics::Graph;
using numerics::Shape;
using numerics::Var;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Array random_array(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Array a(shape);
  for (double& v : a.values()) v = u(rng);
  return a;
}

std::vector<double> to_vec(const Array& a) { return {a.values().begin(), a.values().end()}; }

struct Invocation {
  int code;
  std::string out;
};

// Runs one CLI command in process; diagnostics stream to stderr.
Invocation cli_call(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::cerr << "  $ fs3d";
  for (const auto& a : args) std::cerr << ' ' << a;
  std::cerr << std::endl;
  const int code = cli::run(args, out, std::cerr);
  return {code, out.str()};
}

// ---------------------------------------------------------------- 1

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const cli::GradientSuiteOptions options;
  const auto rows = cli::gradient_suite(options);
  const double elapsed = seconds_since(t0);
  std::cerr << cli::gradcheck_table(rows);
  double worst = 0.0;
  bool all = !rows.empty();
  for (const auto& r : rows) {
    worst = std::max(worst, r.max_relative_error);
    all = all && r.passed && r.max_relative_error <= 1e-4;
  }
  return {all && elapsed <= 120.0,
          fmt("gradient suite over %zu losses: max rel err %.3g (<= 1e-4), %.1f s (<= 120 s)", rows.size(), worst,
              elapsed)};
}

// ---------------------------------------------------------------- 2

struct BatchRender {
  std::vector<Var> taps;
  rdp::BatchViews views;
};

BatchRender render_generator(const generator::GeneratorGraph& g, const generator::LatentBatch& latents,
                             const std::vector<renderer::Camera>& cameras,
                             const renderer::RenderSettings& settings) {
  BatchRender out;
  const auto mapped = generator::map_latents(g, latents);
  const auto shapes = generator::synthesize_geometry(g, mapped.w1);
  const auto textures = generator::synthesize_texture(g, mapped.w1, mapped.w2);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.taps.push_back(shapes[i].tap);
    out.views.cameras.push_back(cameras[i]);
    out.views.views.push_back(renderer::render(shapes[i].sdf, shapes[i].deform, textures[i].colors,
                                               textures[i].features, g.config().grid_resolution, cameras[i],
                                               settings));
  }
  return out;
}

// The four relative-distance losses of a bit-copied target against its source.
std::array<double, 4> identity_losses(const generator::Generator& source, std::uint64_t seed) {
  const generator::Generator target = source;
  const auto latents = generator::sample_latents(4, seed, source.config.latent_dim);
  const auto ring = renderer::camera_ring(8);
  const std::vector<renderer::Camera> cameras(ring.begin(), ring.begin() + 4);
  const renderer::RenderSettings settings{32, 24, 0.05};
  Graph graph;
  const generator::GeneratorGraph t(graph, target, true);
  const generator::GeneratorGraph s(graph, source, false);
  const BatchRender fake = render_generator(t, latents, cameras, settings);
  const BatchRender ref = render_generator(s, latents, cameras, settings);
  return {rdp::geometry_feature_loss(ref.taps, fake.taps).value().item(),
          rdp::mask_loss(ref.views, fake.views).value().item(),
          rdp::texture_feature_loss(ref.views, fake.views).value().item(),
          rdp::rgb_loss(ref.views, fake.views).value().item()};
}

Outcome identity_zero(const fs::path& source_checkpoint) {
  std::vector<std::pair<std::string, generator::Generator>> models;
  generator::GeneratorConfig config;
  config.grid_resolution = 16;
  models.emplace_back("initialized", generator::initialize_generator(config, 11));
  if (fs::exists(trainer::header_path(source_checkpoint))) {
    models.emplace_back("pretrained", trainer::load_checkpoint(source_checkpoint).generator);
  }
  double worst = 0.0;
  std::string detail;
  for (const auto& [label, model] : models) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto l = identity_losses(model, seed);
      for (double v : l) worst = std::max(worst, std::abs(v));
    }
    detail += label + " ";
  }
  return {worst <= 1e-9 && models.size() == 2,
          fmt("identity zero (%smodels, geo/mask/tex/rgb, 3 latent draws): max |loss| %.3g (<= 1e-9)",
              detail.c_str(), worst)};
}

// ---------------------------------------------------------------- 3

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& key, double err) { worst[key] = std::max(worst[key], err); };
  const auto cloud = [&](std::size_t n) {
    metrics::PointCloud c(n);
    for (auto& p : c) p = {u(rng), u(rng), u(rng)};
    return c;
  };

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t na = 1 + trial % 6, nb = 1 + (trial / 6) % 6;
    const auto a = cloud(na), b = cloud(nb);
    note("chamfer", std::abs(metrics::chamfer(a, b) - oracle::chamfer(a, b)));

    const std::size_t n = 2 + trial % 5;
    std::vector<metrics::PointCloud> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back(cloud(1 + (i + trial) % 6));
    oracle::Matrix d(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i][j] = oracle::chamfer(items[i], items[j]);
    }
    const auto got = metrics::pairwise_diversity(
        n, [&](std::size_t i, std::size_t j) { return metrics::chamfer(items[i], items[j]); });
    const auto want = oracle::pairwise(d);
    note("pairwise_diversity", std::max(std::abs(got.mean - want.mean), std::abs(got.std - want.std)));

    const std::size_t refs = 1 + trial % 3;
    oracle::Matrix to_ref(n, std::vector<double>(refs));
    for (auto& row : to_ref) {
      for (double& v : row) v = std::abs(u(rng));
    }
    const auto assignment =
        metrics::assign_clusters(n, refs, [&](std::size_t i, std::size_t r) { return to_ref[i][r]; });
    const auto intra = metrics::intra_diversity(
        assignment, refs, [&](std::size_t i, std::size_t j) { return metrics::chamfer(items[i], items[j]); });
    const auto intra_want = oracle::intra(to_ref, d);
    note("intra_diversity",
         std::max(std::abs(intra.mean - intra_want.mean), std::abs(intra.std - intra_want.std)));
  }

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const std::size_t pixels = 1 + (trial / 5) % 6;
    std::vector<std::vector<double>> st, tt, sm, tm, srgb, trgb, sf, tf;
    Graph g;
    std::vector<Var> s_taps, t_taps;
    rdp::BatchViews s_views, t_views;
    for (std::size_t i = 0; i < n; ++i) {
      const Array a = random_array({pixels}, rng, -1.0, 1.0), b = random_array({pixels}, rng, -1.0, 1.0);
      st.push_back(to_vec(a));
      tt.push_back(to_vec(b));
      s_taps.push_back(g.constant(a));
      t_taps.push_back(g.constant(b));
      const renderer::Camera cam{0.4 * static_cast<double>(i), 0.349, 1.0};
      const Array ms = random_array({pixels}, rng, 0.0, 1.0), mt = random_array({pixels}, rng, 0.0, 1.0);
      const Array cs = random_array({pixels, 3}, rng, 0.0, 1.0), ct = random_array({pixels, 3}, rng, 0.0, 1.0);
      const Array fs_ = random_array({pixels, 4}, rng, -1.0, 1.0), ft = random_array({pixels, 4}, rng, -1.0, 1.0);
      sm.push_back(to_vec(ms));
      tm.push_back(to_vec(mt));
      srgb.push_back(to_vec(cs));
      trgb.push_back(to_vec(ct));
      sf.push_back(to_vec(fs_));
      tf.push_back(to_vec(ft));
      s_views.views.push_back({g.constant(ms), g.constant(cs), g.constant(fs_)});
      t_views.views.push_back({g.constant(mt), g.constant(ct), g.constant(ft)});
      s_views.cameras.push_back(cam);
      t_views.cameras.push_back(cam);
    }
    note("L_geo", std::abs(rdp::geometry_feature_loss(s_taps, t_taps).value().item() - oracle::vector_loss(st, tt)));
    note("L_mask", std::abs(rdp::mask_loss(s_views, t_views).value().item() - oracle::vector_loss(sm, tm)));
    note("L_tex", std::abs(rdp::texture_feature_loss(s_views, t_views).value().item() -
                           oracle::masked_loss(sf, sm, tf, tm, 4)));
    note("L_rgb",
         std::abs(rdp::rgb_loss(s_views, t_views).value().item() - oracle::masked_loss(srgb, sm, trgb, tm, 3)));
  }

  bool ok = worst.size() == 7;
  std::string detail;
  for (const auto& [key, err] : worst) {
    ok = ok && err <= 1e-12;
    detail += fmt(" %s %.2g", key.c_str(), err);
  }
  return {ok, "oracle equivalence, sizes <= 6, max abs err (<= 1e-12):" + detail};
}

// ---------------------------------------------------------------- 4

Outcome closed_forms() {
  Graph g;
  const Var ls = numerics::log_softmax(g.constant(Array::vector({0.0, std::log(2.0)})));
  const double e_softmax =
      std::max(std::abs(std::exp(ls.value()[0]) - 1.0 / 3.0), std::abs(std::exp(ls.value()[1]) - 2.0 / 3.0));
  const double e_kl = std::abs(rdp::kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75}) -
                               0.5 * std::log(4.0 / 3.0));
  const double e_g = std::abs(adversarial::logistic_g(0.0) + std::log(2.0));
  const adversarial::GridTopology edge{{{0, 1}}};
  const double e_reg =
      std::abs(adversarial::sdf_regularizer(g.constant(Array::vector({0.0, 0.0})), edge).value().item() -
               2.0 * std::log(2.0));
  const double e_cd = std::abs(metrics::chamfer({{0.0, 0.0, 0.0}}, {{3.0, 4.0, 0.0}}) - 50.0);
  const double worst = std::max({e_softmax, e_kl, e_g, e_reg, e_cd});
  return {worst <= 1e-9, fmt("closed forms: softmax %.2g, KL %.2g, g(0) %.2g, L_reg edge %.2g, chamfer %.2g "
                             "(each <= 1e-9)",
                             e_softmax, e_kl, e_g, e_reg, e_cd)};
}

// ---------------------------------------------------------------- 5

double report_value(const json& r, const char* key) {
  return r.at(key).is_object() ? r.at(key).at("mean").get<double>() : r.at(key).get<double>();
}

std::vector<double> mapping_entries(const trainer::Checkpoint& c) {
  std::vector<double> out;
  for (const auto& [name, value] : c.generator.params.entries()) {
    if (c.generator.is_mapping(name)) out.insert(out.end(), value.data(), value.data() + value.size());
  }
  return out;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome desk_experiment(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string data = (root / "data").string();
  const std::string source = (root / "pre" / "source").string();
  const std::string target = (root / "data" / "target").string();
  auto step = [&](const std::vector<std::string>& args) {
    const auto r = cli_call(args);
    if (r.code != cli::kExitOk) throw std::runtime_error("command failed with exit " + std::to_string(r.code));
    return r;
  };
  auto evaluate = [&](const std::string& ckpt, const std::string& label) {
    step({"eval", "--seed", "7", "--ckpt", ckpt, "--target", target, "--out", (root / ("eval_" + label)).string()});
    const json r = json::parse(slurp(root / ("eval_" + label) / "report.json"));
    std::cerr << label << ": " << r.dump() << "\n";
    return r;
  };
  step({"gen-data", "--seed", "7", "--out", data});
  step({"pretrain", "--seed", "7", "--target", (root / "data" / "source").string(), "--out",
        (root / "pre").string()});
  const json r_source = evaluate(source, "source");
  step({"adapt", "--seed", "7", "--mode", "dftm", "--ckpt", source, "--target", target, "--out",
        (root / "dftm").string()});
  const json r_dftm = evaluate((root / "dftm" / "target").string(), "dftm");
  step({"adapt", "--seed", "7", "--mode", "ours", "--ckpt", source, "--target", target, "--out",
        (root / "ours").string()});
  const json r_ours = evaluate((root / "ours" / "target").string(), "ours");
  const double elapsed = seconds_since(t0);

  const double cd_src = report_value(r_source, "cd_to_target");
  const double cd_dftm = report_value(r_dftm, "cd_to_target");
  const double cd_ours = report_value(r_ours, "cd_to_target");
  const double icd_dftm = report_value(r_dftm, "intra_cd"), icd_ours = report_value(r_ours, "intra_cd");
  const double ip_dftm = report_value(r_dftm, "intra_perc"), ip_ours = report_value(r_ours, "intra_perc");
  const bool a = cd_dftm < cd_src && cd_ours < cd_src;
  const bool b = icd_ours > icd_dftm && ip_ours > ip_dftm;

  const auto pre = trainer::load_checkpoint(source);
  const auto dftm = trainer::load_checkpoint((root / "dftm" / "target").string());
  const auto ours = trainer::load_checkpoint((root / "ours" / "target").string());
  const auto mapping = mapping_entries(pre);
  const bool c = !mapping.empty() && same_bits(mapping_entries(dftm), mapping) &&
                 same_bits(mapping_entries(ours), mapping) && dftm.generator.frozen_mapping &&
                 ours.generator.frozen_mapping;
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  const bool time_ok = elapsed <= 1800.0;

  std::string detail = fmt(
      "desk experiment: (a) CD src %.3f dftm %.3f ours %.3f [%s]; (b) Intra-CD ours %.3f vs dftm %.3f, "
      "Intra-perc ours %.5f vs dftm %.5f [%s]; (c) frozen mapping bits [%s]; %.0f s on %u core(s) (<= 1800 s) [%s]",
      cd_src, cd_dftm, cd_ours, a ? "ok" : "FAIL", icd_ours, icd_dftm, ip_ours, ip_dftm, b ? "ok" : "FAIL",
      c ? "ok" : "FAIL", elapsed, cores, time_ok ? "ok" : "FAIL");
  return {a && b && c && time_ok, detail};
}

// ---------------------------------------------------------------- 6

Outcome replication_signature() {
  const cli::DataConfig data;
  const data::FamilyRecord family{data.target_preset, data::family_preset(data.target_preset), data.target_count,
                                  data.target_seed()};
  const auto preset = metrics::eval_preset("desk");
  const auto inputs = metrics::make_eval_inputs(family, 16, preset);
  const auto shapes = family.shapes();

  auto replicate = [&](std::size_t copies) {
    metrics::GeneratedSet set;
    for (std::size_t k = 0; k < copies; ++k) {
      for (std::size_t i = 0; i < shapes.size(); ++i) {
        set.clouds.push_back(metrics::sample_surface_points(data::shape_field(shapes[i], 16), preset.surface_points,
                                                            numerics::derive_seed(family.seed, i)));
        set.views.push_back(inputs.reference_views[i]);
      }
    }
    return metrics::evaluate(set, inputs, preset, 7);
  };
  const auto once = replicate(1);
  const auto many = replicate(preset.intra_samples / shapes.size());
  bool clusters = many.cluster_sizes.size() == shapes.size();
  for (std::size_t size : many.cluster_sizes) clusters = clusters && size == many.intra_samples / shapes.size();
  const bool zero = once.intra_cd.mean == 0.0 && once.intra_perc.mean == 0.0 && many.intra_cd.mean == 0.0 &&
                    many.intra_perc.mean == 0.0 && many.intra_cd.std == 0.0 && many.intra_perc.std == 0.0;
  return {zero && clusters,
          fmt("replication: %zu references as the generated set give Intra-CD %g, Intra-perc %g; "
              "%zu replicated copies give Intra-CD %g, Intra-perc %g (== 0)",
              shapes.size(), once.intra_cd.mean, once.intra_perc.mean, many.intra_samples, many.intra_cd.mean,
              many.intra_perc.mean)};
}

// ---------------------------------------------------------------- 7

Outcome determinism(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  cli::RunConfig c;
  c.data.source_count = 50;
  c.data.target_count = 3;
  c.data.resolution = 16;
  c.data.grid_resolution = 16;
  for (auto* stage : {&c.pretrain.iterations, &c.adapt.iterations}) *stage = 3;
  c.pretrain.grid_resolution = c.adapt.grid_resolution = 8;
  c.pretrain.render_resolution = c.adapt.render_resolution = 16;
  c.pretrain.ray_samples = c.adapt.ray_samples = 8;
  const fs::path config = root / "config.json";
  std::ofstream(config) << cli::to_json(c).dump(2);
  const std::string cfg = config.string();
  const fs::path run = root / "run";

  auto pipeline = [&] {
    std::vector<std::string> outs;
    auto step = [&](const std::vector<std::string>& args) {
      const auto r = cli_call(args);
      if (r.code != cli::kExitOk) throw std::runtime_error("command failed with exit " + std::to_string(r.code));
      outs.push_back(r.out);
    };
    const std::string d = (run / "data").string(), ckpt = (run / "pre" / "source").string();
    const std::string target = (run / "data" / "target").string();
    step({"gen-data", "--config", cfg, "--out", d});
    step({"pretrain", "--config", cfg, "--target", (run / "data" / "source").string(), "--out",
          (run / "pre").string()});
    for (const char* mode : {"dftm", "ours", "freezet"}) {
      step({"adapt", "--config", cfg, "--mode", mode, "--ckpt", ckpt, "--target", target, "--out",
            (run / mode).string()});
    }
    step({"eval", "--config", cfg, "--ckpt", (run / "ours" / "target").string(), "--target", target, "--out",
          (run / "eval").string()});
    step({"render", "--config", cfg, "--ckpt", (run / "ours" / "target").string(), "--out",
          (run / "render").string()});
    step({"ablate", "--config", cfg, "--ckpt", ckpt, "--target", target, "--out", (run / "ablate").string()});
    step({"gradcheck"});
    return outs;
  };
  const auto first = pipeline();
  fs::rename(run, root / "first");
  const auto second = pipeline();

  std::size_t files = 0, mismatches = 0, bytes = 0;
  std::string first_bad;
  std::set<fs::path> seen;
  for (const auto& e : fs::recursive_directory_iterator(run)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), run);
    seen.insert(rel);
    const std::string now = slurp(e.path());
    bytes += now.size();
    ++files;
    if (!fs::exists(root / "first" / rel) || now != slurp(root / "first" / rel)) {
      ++mismatches;
      if (first_bad.empty()) first_bad = rel.string();
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(root / "first")) {
    if (e.is_regular_file() && !seen.count(fs::relative(e.path(), root / "first"))) ++mismatches;
  }
  std::size_t stdout_mismatch = 0;
  for (std::size_t i = 0; i < first.size(); ++i) stdout_mismatch += first[i] != second[i];
  return {mismatches == 0 && stdout_mismatch == 0 && files > 0,
          fmt("determinism: %zu commands rerun, %zu files (%zu bytes) compared, %zu differing files, "
              "%zu differing stdout%s%s",
              first.size(), files, bytes, mismatches, stdout_mismatch, first_bad.empty() ? "" : ", first: ",
              first_bad.c_str())};
}

// ---------------------------------------------------------------- 8

Outcome renderer_properties() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> offset(1e-3, 0.2), scale(0.2, 1.0);
  const std::size_t grid = 8, v = grid * grid * grid;
  const double cell = 2.0 / static_cast<double>(grid - 1);
  const renderer::RenderSettings settings{16, 24, 0.05};
  const auto ring = renderer::camera_ring(8);
  std::size_t range_violations = 0, shrink_violations = 0, pixels = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double s = scale(rng);
    const Array sdf = random_array({v}, rng, -s, s);
    const Array deform = random_array({v, 3}, rng, -0.45 * cell, 0.45 * cell);
    const Array colors = random_array({v, 3}, rng, 0.0, 1.0);
    Array shifted = sdf;
    const double delta = offset(rng);
    for (double& x : shifted.values()) x += delta;
    const auto& cam = ring[static_cast<std::size_t>(trial) % ring.size()];
    const auto a = renderer::render_view(sdf, deform, colors, Array(), grid, cam, settings);
    const auto b = renderer::render_view(shifted, deform, colors, Array(), grid, cam, settings);
    for (std::size_t p = 0; p < a.mask.size(); ++p) {
      ++pixels;
      for (double m : {a.mask[p], b.mask[p]}) range_violations += !(m >= 0.0 && m <= 1.0);
      shrink_violations += !(b.mask[p] <= a.mask[p]);
    }
  }
  return {range_violations == 0 && shrink_violations == 0,
          fmt("renderer: 100 random fields, %zu pixels, %zu range violations, %zu shrink violations (== 0)", pixels,
              range_violations, shrink_violations)};
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  std::set<int> only;
  fs::path work = fs::current_path() / "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::cerr << "usage: fs3d_acceptance [--only 1,2,...] [--work DIR]\n";
      return 2;
    }
  }

  const fs::path desk = work / "desk";
  // Criterion 2 also checks the desk source model, so 5 runs before it.
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradient_suite},
      {3, oracle_equivalence},
      {4, closed_forms},
      {6, replication_signature},
      {8, renderer_properties},
      {5, [&] { return desk_experiment(desk); }},
      {2, [&] { return identity_zero(desk / "pre" / "source"); }},
      {7, [&] { return determinism(work / "determinism"); }},
  };
  std::map<int, Outcome> results;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    std::cerr << "== criterion " << id << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      results[id] = check();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("aborted: ") + e.what()};
    }
    std::cerr << "== criterion " << id << " done in " << fmt("%.1f", seconds_since(t0)) << " s" << std::endl;
  }
  int failed = 0;
  for (const auto& [id, r] : results) {
    std::cout << (r.passed ? "PASS" : "FAIL") << "  [" << id << "] " << r.detail << "\n";
    failed += !r.passed;
  }
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
