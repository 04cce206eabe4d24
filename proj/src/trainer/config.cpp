#include "fs3d/trainer/config.hpp"

#include <cmath>
#include <set>

#include "fs3d/errors.hpp"

namespace fs3d::trainer {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& doc, const std::set<std::string>& known, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& doc, const char* key, T& into, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    into = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

// Counts must be non-negative integers; json would otherwise wrap -1 into a huge size_t.
void read_count(const json& doc, const char* key, std::size_t& into, const std::string& where) {
  if (!doc.contains(key)) return;
  const json& v = doc.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  into = v.get<std::size_t>();
}

void read_seed(const json& doc, std::uint64_t& into, const std::string& where) {
  if (!doc.contains("seed")) return;
  const json& v = doc.at("seed");
  if (!v.is_number_unsigned()) throw ConfigError(where + ".seed must be a non-negative integer");
  into = v.get<std::uint64_t>();
}

void require_rate(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string(name) + " must be finite and non-negative");
  }
}

void require_render(std::size_t grid, std::size_t resolution, std::size_t samples, double temperature,
                    std::size_t views) {
  if (grid < 2) throw ConfigError("grid_resolution must be at least 2");
  if (resolution < 2 || resolution % 2 != 0) throw ConfigError("render_resolution must be even and at least 2");
  if (samples < 1) throw ConfigError("ray_samples must be at least 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be positive");
  if (views < 1) throw ConfigError("views must be at least 1");
}

}  // namespace

void AdaptationConfig::validate() const {
  weights.validate();
  require_rate(r1_weight, "r1_weight");
  require_rate(lr_generator, "lr_generator");
  require_rate(lr_discriminator, "lr_discriminator");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (mode == rdp::Mode::FreezeT && setup == rdp::Setup::B) {
    throw ConfigError("mode freezet is not defined for setup B");
  }
  require_render(grid_resolution, render_resolution, ray_samples, temperature, views);
}

void PretrainConfig::validate() const {
  require_rate(reg_weight, "reg_weight");
  require_rate(r1_weight, "r1_weight");
  require_rate(lr_generator, "lr_generator");
  require_rate(lr_discriminator, "lr_discriminator");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  require_render(grid_resolution, render_resolution, ray_samples, temperature, views);
}

json to_json(const AdaptationConfig& c) {
  return {{"setup", rdp::to_string(c.setup)},
          {"mode", rdp::to_string(c.mode)},
          {"weights",
           {{"reg", c.weights.reg},
            {"geo", c.weights.geo},
            {"mask", c.weights.mask},
            {"tex", c.weights.tex},
            {"rgb", c.weights.rgb}}},
          {"r1_weight", c.r1_weight},
          {"batch_size", c.batch_size},
          {"lr_generator", c.lr_generator},
          {"lr_discriminator", c.lr_discriminator},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"grid_resolution", c.grid_resolution},
          {"render_resolution", c.render_resolution},
          {"ray_samples", c.ray_samples},
          {"temperature", c.temperature},
          {"views", c.views},
          {"source_checkpoint", c.source_checkpoint},
          {"target_data", c.target_data}};
}

json to_json(const PretrainConfig& c) {
  return {{"reg_weight", c.reg_weight},
          {"r1_weight", c.r1_weight},
          {"batch_size", c.batch_size},
          {"lr_generator", c.lr_generator},
          {"lr_discriminator", c.lr_discriminator},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"grid_resolution", c.grid_resolution},
          {"render_resolution", c.render_resolution},
          {"ray_samples", c.ray_samples},
          {"temperature", c.temperature},
          {"views", c.views},
          {"source_data", c.source_data}};
}

AdaptationConfig adaptation_config_from_json(const json& doc) {
  const std::string where = "adapt";
  reject_unknown(doc,
                 {"setup", "mode", "weights", "r1_weight", "batch_size", "lr_generator", "lr_discriminator",
                  "iterations", "seed", "grid_resolution", "render_resolution", "ray_samples", "temperature",
                  "views", "source_checkpoint", "target_data"},
                 where);
  AdaptationConfig c;
  std::string setup = rdp::to_string(c.setup), mode = rdp::to_string(c.mode);
  read(doc, "setup", setup, where);
  read(doc, "mode", mode, where);
  c.setup = rdp::parse_setup(setup);
  c.mode = rdp::parse_mode(mode);
  if (doc.contains("weights")) {
    const json& w = doc.at("weights");
    const std::string ww = where + ".weights";
    reject_unknown(w, {"reg", "geo", "mask", "tex", "rgb"}, ww);
    read(w, "reg", c.weights.reg, ww);
    read(w, "geo", c.weights.geo, ww);
    read(w, "mask", c.weights.mask, ww);
    read(w, "tex", c.weights.tex, ww);
    read(w, "rgb", c.weights.rgb, ww);
  }
  read(doc, "r1_weight", c.r1_weight, where);
  read_count(doc, "batch_size", c.batch_size, where);
  read(doc, "lr_generator", c.lr_generator, where);
  read(doc, "lr_discriminator", c.lr_discriminator, where);
  read_count(doc, "iterations", c.iterations, where);
  read_seed(doc, c.seed, where);
  read_count(doc, "grid_resolution", c.grid_resolution, where);
  read_count(doc, "render_resolution", c.render_resolution, where);
  read_count(doc, "ray_samples", c.ray_samples, where);
  read(doc, "temperature", c.temperature, where);
  read_count(doc, "views", c.views, where);
  read(doc, "source_checkpoint", c.source_checkpoint, where);
  read(doc, "target_data", c.target_data, where);
  c.validate();
  return c;
}

PretrainConfig pretrain_config_from_json(const json& doc) {
  const std::string where = "pretrain";
  reject_unknown(doc,
                 {"reg_weight", "r1_weight", "batch_size", "lr_generator", "lr_discriminator", "iterations",
                  "seed", "grid_resolution", "render_resolution", "ray_samples", "temperature", "views",
                  "source_data"},
                 where);
  PretrainConfig c;
  read(doc, "reg_weight", c.reg_weight, where);
  read(doc, "r1_weight", c.r1_weight, where);
  read_count(doc, "batch_size", c.batch_size, where);
  read(doc, "lr_generator", c.lr_generator, where);
  read(doc, "lr_discriminator", c.lr_discriminator, where);
  read_count(doc, "iterations", c.iterations, where);
  read_seed(doc, c.seed, where);
  read_count(doc, "grid_resolution", c.grid_resolution, where);
  read_count(doc, "render_resolution", c.render_resolution, where);
  read_count(doc, "ray_samples", c.ray_samples, where);
  read(doc, "temperature", c.temperature, where);
  read_count(doc, "views", c.views, where);
  read(doc, "source_data", c.source_data, where);
  c.validate();
  return c;
}

}  // namespace fs3d::trainer
