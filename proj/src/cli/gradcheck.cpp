#include "fs3d/cli/gradcheck.hpp"

#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "fs3d/adversarial/adversarial.hpp"
#include "fs3d/generator/generator.hpp"
#include "fs3d/numerics/grad_check.hpp"
#include "fs3d/numerics/ops.hpp"
#include "fs3d/numerics/random.hpp"
#include "fs3d/rdp/rdp_losses.hpp"
#include "fs3d/renderer/renderer.hpp"

namespace fs3d::cli {

using numerics::Array;
using numerics::Graph;
using numerics::ParameterSet;
using numerics::Var;

namespace {

struct Rendered {
  std::vector<Var> taps;
  std::vector<Var> sdf;
  rdp::BatchViews views;
};

Rendered forward(const generator::GeneratorGraph& g, const generator::LatentBatch& latents,
                 const std::vector<renderer::Camera>& cameras, const renderer::RenderSettings& settings) {
  Rendered out;
  const auto mapped = generator::map_latents(g, latents);
  const auto shapes = generator::synthesize_geometry(g, mapped.w1);
  const auto textures = generator::synthesize_texture(g, mapped.w1, mapped.w2);
  out.views.cameras = cameras;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.taps.push_back(shapes[i].tap);
    out.sdf.push_back(shapes[i].sdf);
    out.views.views.push_back(renderer::render(shapes[i].sdf, shapes[i].deform, textures[i].colors,
                                               textures[i].features, g.config().grid_resolution, cameras[i],
                                               settings));
  }
  return out;
}

Var images(const Rendered& r, bool rgb, std::size_t resolution) {
  std::vector<Var> parts;
  for (const auto& v : r.views.views) parts.push_back(rgb ? v.rgb : v.mask);
  return numerics::reshape(numerics::concat(parts, 0), {parts.size(), resolution, resolution, rgb ? 3u : 1u});
}

Array uniform_images(std::size_t batch, std::size_t resolution, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Array out(numerics::Shape{batch, resolution, resolution, channels});
  for (double& v : out.values()) v = dist(rng);
  return out;
}

}  // namespace

std::vector<GradCheckRow> gradient_suite(const GradientSuiteOptions& o) {
  generator::GeneratorConfig gc;
  gc.grid_resolution = o.grid_resolution;
  const generator::Generator source = generator::initialize_generator(gc, numerics::derive_seed(o.seed, 1));
  const generator::Generator target = generator::initialize_generator(gc, numerics::derive_seed(o.seed, 2));
  const generator::LatentBatch latents = generator::sample_latents(o.batch_size, numerics::derive_seed(o.seed, 3));
  const auto ring = renderer::camera_ring(8);
  std::vector<renderer::Camera> cameras;
  for (std::size_t i = 0; i < o.batch_size; ++i) cameras.push_back(ring[i % ring.size()]);
  const renderer::RenderSettings settings{o.render_resolution, 24, 0.05};

  adversarial::DiscriminatorConfig mask_config;
  mask_config.resolution = o.render_resolution;
  mask_config.channels = 1;
  adversarial::DiscriminatorConfig rgb_config = mask_config;
  rgb_config.channels = 3;
  const auto d_mask = adversarial::initialize_discriminator(mask_config, adversarial::ImageKind::Mask, o.seed);
  const auto d_rgb = adversarial::initialize_discriminator(rgb_config, adversarial::ImageKind::Rgb, o.seed);
  const auto topology = adversarial::grid_topology(o.grid_resolution);

  using GeneratorLoss = std::function<Var(const Rendered& src, const Rendered& tgt, Graph& graph)>;
  auto generator_case = [&](const GeneratorLoss& loss, bool needs_source) {
    return [&, loss, needs_source](Graph& graph, const ParameterSet& values) {
      generator::Generator probe = target;
      probe.params = values;
      const generator::GeneratorGraph tg(graph, probe, true);
      const Rendered tgt = forward(tg, latents, cameras, settings);
      if (!needs_source) return loss(tgt, tgt, graph);
      const generator::GeneratorGraph sg(graph, source, false);
      return loss(forward(sg, latents, cameras, settings), tgt, graph);
    };
  };
  auto discriminator_case = [&](const adversarial::Discriminator& d, std::size_t channels) {
    const Array real = uniform_images(o.batch_size, o.render_resolution, channels, numerics::derive_seed(o.seed, 4));
    const Array fake = uniform_images(o.batch_size, o.render_resolution, channels, numerics::derive_seed(o.seed, 5));
    return [&d, real, fake](Graph& graph, const ParameterSet& values) {
      adversarial::Discriminator probe = d;
      probe.params = values;
      const numerics::BoundParameters bound(graph, values, [](const std::string&) { return true; });
      return adversarial::discriminator_loss(probe, bound, real, graph.constant(fake), 1.0).total;
    };
  };

  struct Case {
    std::string name;
    numerics::ParameterFunction function;
    const ParameterSet* params;
  };
  const std::size_t r = o.render_resolution;
  const std::vector<Case> cases = {
      {"L_geo",
       generator_case([](const Rendered& s, const Rendered& t, Graph&) { return rdp::geometry_feature_loss(s.taps, t.taps); },
                      true),
       &target.params},
      {"L_mask",
       generator_case([](const Rendered& s, const Rendered& t, Graph&) { return rdp::mask_loss(s.views, t.views); }, true),
       &target.params},
      {"L_tex",
       generator_case(
           [](const Rendered& s, const Rendered& t, Graph&) { return rdp::texture_feature_loss(s.views, t.views); }, true),
       &target.params},
      {"L_rgb",
       generator_case([](const Rendered& s, const Rendered& t, Graph&) { return rdp::rgb_loss(s.views, t.views); }, true),
       &target.params},
      {"L_reg",
       generator_case(
           [&topology](const Rendered&, const Rendered& t, Graph&) {
             std::vector<Var> parts;
             for (const Var& s : t.sdf) parts.push_back(adversarial::sdf_regularizer(s, topology));
             return numerics::mean(numerics::stack(parts));
           },
           false),
       &target.params},
      {"L_adv_G_mask",
       generator_case(
           [&d_mask, r](const Rendered&, const Rendered& t, Graph& graph) {
             const numerics::BoundParameters bound(graph, d_mask.params, nullptr);
             return adversarial::generator_adv_loss(d_mask, bound, images(t, false, r));
           },
           false),
       &target.params},
      {"L_adv_G_rgb",
       generator_case(
           [&d_rgb, r](const Rendered&, const Rendered& t, Graph& graph) {
             const numerics::BoundParameters bound(graph, d_rgb.params, nullptr);
             return adversarial::generator_adv_loss(d_rgb, bound, images(t, true, r));
           },
           false),
       &target.params},
      {"L_adv_D_mask+R1", discriminator_case(d_mask, 1), &d_mask.params},
      {"L_adv_D_rgb+R1", discriminator_case(d_rgb, 3), &d_rgb.params},
  };

  std::vector<GradCheckRow> rows;
  for (const Case& c : cases) {
    numerics::GradCheckOptions options;
    options.step = o.step;
    options.max_components_per_leaf = o.components_per_entry;
    options.seed = numerics::derive_seed(o.seed, rows.size() + 10);
    const auto result = numerics::parameter_grad_check(c.function, *c.params, options);
    rows.push_back({c.name, result.max_relative_error, result.components_checked,
                    result.max_relative_error <= o.tolerance && result.components_checked > 0});
  }
  return rows;
}

std::string gradcheck_table(const std::vector<GradCheckRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %14s %11s  %s\n", "loss", "max_rel_error", "components", "result");
  out << line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%-18s %14.3e %11zu  %s\n", row.loss.c_str(), row.max_relative_error,
                  row.components, row.passed ? "PASS" : "FAIL");
    out << line;
  }
  return out.str();
}

}  // namespace fs3d::cli
