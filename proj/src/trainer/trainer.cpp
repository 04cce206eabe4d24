#include "fs3d/trainer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/ops.hpp"
#include "fs3d/numerics/random.hpp"
#include "fs3d/rdp/rdp_losses.hpp"

namespace fs3d::trainer {

using numerics::Array;
using numerics::Graph;
using numerics::Shape;
using numerics::Var;

namespace {

constexpr std::uint64_t kLatentStream = 101;
constexpr std::uint64_t kRealStream = 102;
constexpr std::uint64_t kDiscriminatorStream = 103;
constexpr std::size_t kMinSourceShapes = 50;

// Runs `body`, prefixing any NumericError with the term it came from.
template <typename F>
auto guarded(const char* term, F&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    throw NumericError(std::string("non-finite value in term '") + term + "': " + e.what());
  }
}

void require_finite(const char* term, double value) {
  if (!std::isfinite(value)) throw NumericError(std::string("non-finite value in term '") + term + "'");
}

// Concatenates per-view images into [B x R x R x C].
Var image_batch(const std::vector<Var>& views, std::size_t resolution, std::size_t channels) {
  return numerics::reshape(numerics::concat(views, 0), {views.size(), resolution, resolution, channels});
}

Array real_batch(const std::vector<std::vector<Array>>& images, const std::vector<std::size_t>& samples,
                 const std::vector<std::size_t>& views, std::size_t resolution, std::size_t channels) {
  Array out(Shape{samples.size(), resolution, resolution, channels});
  const std::size_t per = resolution * resolution * channels;
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const Array& img = images[samples[b]][views[b]];
    if (img.size() != per) throw StructuralError("real image has " + std::to_string(img.size()) + " values");
    std::copy(img.data(), img.data() + per, out.data() + b * per);
  }
  return out;
}

NamedGradients collect(const Graph& graph, const numerics::BoundParameters& bound) {
  NamedGradients out;
  for (const std::string& name : bound.trainable_names()) out.emplace_back(name, graph.gradient(bound[name]));
  return out;
}

// One discriminator update; returns the loss value including the penalty.
double update_discriminator(adversarial::Discriminator& d, Adam& optimizer, const Array& real, const Array& fake,
                            double r1_weight) {
  Graph graph;
  const numerics::BoundParameters bound(graph, d.params, [](const std::string&) { return true; });
  const auto loss = adversarial::discriminator_loss(d, bound, real, graph.constant(fake), r1_weight);
  graph.backward(loss.total);
  optimizer.step(d.params, collect(graph, bound));
  return loss.total.value().item();
}

struct RenderedBatch {
  std::vector<Var> taps;
  std::vector<Var> sdf;
  rdp::BatchViews views;
};

RenderedBatch render_batch(const generator::GeneratorGraph& g, const generator::LatentBatch& latents,
                           const std::vector<renderer::Camera>& cameras, const renderer::RenderSettings& settings,
                           bool colors, bool features) {
  RenderedBatch out;
  const auto mapped = guarded("generator", [&] { return generator::map_latents(g, latents); });
  const auto shapes = guarded("generator", [&] { return generator::synthesize_geometry(g, mapped.w1); });
  std::vector<generator::TextureFieldVars> textures;
  if (colors || features) {
    textures = guarded("generator", [&] { return generator::synthesize_texture(g, mapped.w1, mapped.w2); });
  }
  out.views.cameras = cameras;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.taps.push_back(shapes[i].tap);
    out.sdf.push_back(shapes[i].sdf);
    const Var c = colors ? textures[i].colors : Var();
    const Var f = features ? textures[i].features : Var();
    out.views.views.push_back(guarded("render", [&] {
      return renderer::render(shapes[i].sdf, shapes[i].deform, c, f, g.config().grid_resolution, cameras[i],
                              settings);
    }));
  }
  return out;
}

void check_dataset(const data::Dataset& data, const std::vector<renderer::Camera>& ring, std::size_t resolution,
                   const char* role) {
  if (data.size() == 0) throw ConfigError(std::string(role) + " dataset is empty");
  if (data.cameras.size() != ring.size()) {
    throw ConfigError(std::string(role) + " dataset has " + std::to_string(data.cameras.size()) +
                      " views, config expects " + std::to_string(ring.size()));
  }
  for (std::size_t v = 0; v < ring.size(); ++v) {
    if (std::abs(data.cameras[v].azimuth - ring[v].azimuth) > 1e-9 ||
        std::abs(data.cameras[v].elevation - ring[v].elevation) > 1e-9) {
      throw ConfigError(std::string(role) + " dataset view " + std::to_string(v) + " is not on the camera ring");
    }
  }
  if (data.manifest.resolution != resolution) {
    throw ConfigError(std::string(role) + " dataset resolution " + std::to_string(data.manifest.resolution) +
                      " differs from render_resolution " + std::to_string(resolution));
  }
}

adversarial::DiscriminatorConfig discriminator_config(std::size_t resolution, adversarial::ImageKind kind) {
  adversarial::DiscriminatorConfig c;
  c.resolution = resolution;
  c.channels = kind == adversarial::ImageKind::Mask ? 1 : 3;
  return c;
}

RunResult run(TrainingState& state, std::size_t iterations, const StepCallback& on_step) {
  RunResult result;
  for (std::size_t t = 0; t < iterations; ++t) {
    result.log.push_back(training_step(state, t));
    if (on_step) on_step(result.log.back());
  }
  return result;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

generator::LatentBatch step_latents(const TrainingState& state, std::size_t step) {
  return generator::sample_latents(state.batch_size,
                                   numerics::derive_seed(numerics::derive_seed(state.seed, kLatentStream), step),
                                   state.target.config.latent_dim);
}

std::vector<std::size_t> step_views(const TrainingState& state, std::size_t step) {
  std::vector<std::size_t> out(state.batch_size);
  for (std::size_t i = 0; i < state.batch_size; ++i) out[i] = (step * state.batch_size + i) % state.cameras.size();
  return out;
}

StepLog training_step(TrainingState& s, std::size_t step) {
  if (s.real == nullptr) throw ContractError("training state has no real data");
  const data::Dataset& real = *s.real;
  const rdp::ActiveTerms active = rdp::active_terms(s.setup, s.mode);
  const bool any_rdp = active.geo || active.mask || active.tex || active.rgb;
  const bool use_rgb = active.adv_rgb;
  if (use_rgb && (!s.d_rgb || !real.has_rgb())) throw ConfigError("RGB adversarial term needs RGB data");
  if (any_rdp && !s.source) throw ContractError("relative-distance terms need a source model");

  const auto latents = step_latents(s, step);
  const auto view_index = step_views(s, step);
  std::vector<renderer::Camera> cameras;
  for (std::size_t v : view_index) cameras.push_back(s.cameras[v]);

  std::vector<std::size_t> samples(s.batch_size);
  {
    std::mt19937_64 rng(numerics::derive_seed(numerics::derive_seed(s.seed, kRealStream), step));
    for (auto& j : samples) j = static_cast<std::size_t>(rng() % real.size());
  }
  const std::size_t r = s.render.resolution;

  Graph graph;
  const generator::GeneratorGraph target =
      guarded("generator", [&] { return generator::GeneratorGraph(graph, s.target, true); });
  const bool colors = use_rgb || active.rgb;
  const RenderedBatch fake = render_batch(target, latents, cameras, s.render, colors, active.tex);

  std::vector<Var> masks, rgbs;
  for (const auto& v : fake.views.views) {
    masks.push_back(v.mask);
    if (use_rgb) rgbs.push_back(v.rgb);
  }
  const Var fake_masks = image_batch(masks, r, 1);
  const Var fake_rgb = use_rgb ? image_batch(rgbs, r, 3) : Var();

  StepLog log;
  log.step = step;
  log.d_mask = guarded("d_mask", [&] {
    return update_discriminator(s.d_mask, s.d_mask_optimizer, real_batch(real.masks, samples, view_index, r, 1),
                                fake_masks.value(), s.r1_weight);
  });
  if (use_rgb) {
    log.d_rgb = guarded("d_rgb", [&] {
      return update_discriminator(*s.d_rgb, s.d_rgb_optimizer, real_batch(real.rgb, samples, view_index, r, 3),
                                  fake_rgb.value(), s.r1_weight);
    });
  }

  rdp::LossTerms terms;
  const numerics::BoundParameters d_mask(graph, s.d_mask.params, nullptr);
  terms.adv_mask = guarded("adv_mask", [&] { return adversarial::generator_adv_loss(s.d_mask, d_mask, fake_masks); });
  if (use_rgb) {
    const numerics::BoundParameters d_rgb(graph, s.d_rgb->params, nullptr);
    terms.adv_rgb = guarded("adv_rgb", [&] { return adversarial::generator_adv_loss(*s.d_rgb, d_rgb, fake_rgb); });
  }
  terms.reg = guarded("reg", [&] {
    const auto topology = adversarial::grid_topology(s.target.config.grid_resolution);
    std::vector<Var> per_sample;
    for (const Var& sdf : fake.sdf) per_sample.push_back(adversarial::sdf_regularizer(sdf, topology));
    return numerics::mean(numerics::stack(per_sample));
  });

  if (any_rdp) {
    const generator::GeneratorGraph source =
        guarded("generator", [&] { return generator::GeneratorGraph(graph, *s.source, false); });
    const RenderedBatch ref = render_batch(source, latents, cameras, s.render, active.rgb, active.tex);
    if (active.geo) terms.geo = guarded("geo", [&] { return rdp::geometry_feature_loss(ref.taps, fake.taps); });
    if (active.mask) terms.mask = guarded("mask", [&] { return rdp::mask_loss(ref.views, fake.views); });
    if (active.tex) terms.tex = guarded("tex", [&] { return rdp::texture_feature_loss(ref.views, fake.views); });
    if (active.rgb) terms.rgb = guarded("rgb", [&] { return rdp::rgb_loss(ref.views, fake.views); });
  }

  const rdp::Objective objective =
      guarded("total", [&] { return rdp::total_adaptation_loss(s.weights, s.setup, s.mode, terms); });
  const auto& b = objective.breakdown;
  const std::pair<const char*, double> named[] = {{"adv_mask", b.adv_mask}, {"adv_rgb", b.adv_rgb},
                                                  {"reg", b.reg},           {"geo", b.geo},
                                                  {"mask", b.mask},         {"tex", b.tex},
                                                  {"rgb", b.rgb}};
  for (const auto& [name, value] : named) require_finite(name, value);
  log.total = objective.total.value().item();
  log.breakdown = b;
  require_finite("total", log.total);

  guarded("backward", [&] {
    graph.backward(objective.total);
    return 0;
  });
  NamedGradients grads;
  for (const std::string& name : target.trainable_names()) {
    grads.emplace_back(name, graph.gradient(target[name]));
    if (!grads.back().second.all_finite()) throw NumericError("non-finite gradient of " + name);
  }
  s.g_optimizer.step(s.target.params, grads);
  return log;
}

RunResult pretrain_source(const PretrainConfig& config, const data::Dataset& source, const StepCallback& on_step) {
  config.validate();
  if (source.size() < kMinSourceShapes) {
    throw ConfigError("pretraining needs at least " + std::to_string(kMinSourceShapes) + " source shapes, got " +
                      std::to_string(source.size()));
  }
  if (!source.has_rgb()) throw ConfigError("pretraining needs RGB views of the source shapes");

  TrainingState s;
  s.setup = rdp::Setup::B;
  s.mode = rdp::Mode::Dftm;
  s.weights.reg = config.reg_weight;
  s.r1_weight = config.r1_weight;
  s.batch_size = config.batch_size;
  s.seed = config.seed;
  s.render = {config.render_resolution, config.ray_samples, config.temperature};
  s.cameras = renderer::camera_ring(config.views);
  check_dataset(source, s.cameras, config.render_resolution, "source");

  generator::GeneratorConfig gc;
  gc.grid_resolution = config.grid_resolution;
  s.target = generator::initialize_generator(gc, config.seed);
  const std::uint64_t d_seed = numerics::derive_seed(config.seed, kDiscriminatorStream);
  s.d_mask = adversarial::initialize_discriminator(
      discriminator_config(config.render_resolution, adversarial::ImageKind::Mask), adversarial::ImageKind::Mask,
      d_seed);
  s.d_rgb = adversarial::initialize_discriminator(
      discriminator_config(config.render_resolution, adversarial::ImageKind::Rgb), adversarial::ImageKind::Rgb,
      d_seed);
  s.g_optimizer = Adam({config.lr_generator});
  s.d_mask_optimizer = Adam({config.lr_discriminator});
  s.d_rgb_optimizer = Adam({config.lr_discriminator});
  s.real = &source;

  RunResult result = run(s, config.iterations, on_step);
  result.checkpoint.stage = "pretrain";
  result.checkpoint.generator = s.target;
  result.checkpoint.d_mask = s.d_mask;
  result.checkpoint.d_rgb = s.d_rgb;
  result.checkpoint.config = to_json(config);
  result.checkpoint.seed = config.seed;
  result.checkpoint.iteration = config.iterations;
  return result;
}

TrainingState adaptation_state(const AdaptationConfig& config, const Checkpoint& source, const data::Dataset& target) {
  config.validate();
  if (config.grid_resolution != source.generator.config.grid_resolution) {
    throw ConfigError("grid_resolution " + std::to_string(config.grid_resolution) +
                      " differs from the source checkpoint's " +
                      std::to_string(source.generator.config.grid_resolution));
  }
  if (source.d_mask.config.resolution != config.render_resolution) {
    throw ConfigError("source discriminators were trained at a different render_resolution");
  }
  if (config.setup == rdp::Setup::B) {
    if (!target.has_rgb()) throw ConfigError("setup B needs target RGB views");
    if (!source.d_rgb) throw ConfigError("setup B needs a source RGB discriminator");
  }

  TrainingState s;
  s.setup = config.setup;
  s.mode = config.mode;
  s.weights = config.weights;
  s.r1_weight = config.r1_weight;
  s.batch_size = config.batch_size;
  s.seed = config.seed;
  s.render = {config.render_resolution, config.ray_samples, config.temperature};
  s.cameras = renderer::camera_ring(config.views);
  check_dataset(target, s.cameras, config.render_resolution, "target");

  s.source = source.generator;
  s.target = source.generator;
  s.target.frozen_mapping = true;
  s.target.frozen_texture = config.mode == rdp::Mode::FreezeT;
  s.d_mask = source.d_mask;
  s.d_rgb = source.d_rgb;
  s.g_optimizer = Adam({config.lr_generator});
  s.d_mask_optimizer = Adam({config.lr_discriminator});
  s.d_rgb_optimizer = Adam({config.lr_discriminator});
  s.real = &target;
  return s;
}

RunResult adapt(const AdaptationConfig& config, const Checkpoint& source, const data::Dataset& target,
                const StepCallback& on_step) {
  TrainingState s = adaptation_state(config, source, target);
  RunResult result = run(s, config.iterations, on_step);
  result.checkpoint.stage = "adapt";
  result.checkpoint.generator = s.target;
  result.checkpoint.d_mask = s.d_mask;
  result.checkpoint.d_rgb = s.d_rgb;
  result.checkpoint.config = to_json(config);
  result.checkpoint.seed = config.seed;
  result.checkpoint.iteration = config.iterations;
  return result;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<StepLog>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FilesystemError("cannot write " + path.string());
  out << "step\ttotal\tadv_mask\tadv_rgb\treg\tgeo\tmask\ttex\trgb\n";
  for (const StepLog& l : log) {
    const auto& b = l.breakdown;
    out << l.step;
    for (double v : {l.total, b.adv_mask, b.adv_rgb, b.reg, b.geo, b.mask, b.tex, b.rgb}) out << '\t' << format_real(v);
    out << '\n';
  }
  if (!out) throw FilesystemError("failed writing " + path.string());
}

void write_discriminator_log(const std::filesystem::path& path, const std::vector<StepLog>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FilesystemError("cannot write " + path.string());
  out << "step\td_mask\td_rgb\n";
  for (const StepLog& l : log) out << l.step << '\t' << format_real(l.d_mask) << '\t' << format_real(l.d_rgb) << '\n';
  if (!out) throw FilesystemError("failed writing " + path.string());
}

std::vector<StepLog> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FilesystemError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step\ttotal\tadv_mask\tadv_rgb\treg\tgeo\tmask\ttex\trgb") {
    throw ConfigError(path.string() + " does not start with the loss log header");
  }
  std::vector<StepLog> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    StepLog l;
    auto& b = l.breakdown;
    if (!(row >> l.step >> l.total >> b.adv_mask >> b.adv_rgb >> b.reg >> b.geo >> b.mask >> b.tex >> b.rgb)) {
      throw ConfigError("malformed loss log row: " + line);
    }
    out.push_back(l);
  }
  return out;
}

}  // namespace fs3d::trainer
