#include "fs3d/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fs3d/data/shapes.hpp"
#include "fs3d/errors.hpp"
#include "fs3d/metrics/metrics.hpp"
#include "fs3d/numerics/random.hpp"

namespace fs3d::cli {

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
  const json& v = doc.at(key);
  if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  try {
    into = v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

DataConfig data_from(const json& doc) {
  const std::string w = "data";
  reject_unknown(doc,
                 {"source_preset", "source_count", "target_preset", "target_count", "seed", "resolution",
                  "grid_resolution", "ray_samples", "temperature", "views", "with_rgb"},
                 w);
  DataConfig c;
  read(doc, "source_preset", c.source_preset, w);
  read(doc, "source_count", c.source_count, w);
  read(doc, "target_preset", c.target_preset, w);
  read(doc, "target_count", c.target_count, w);
  read(doc, "seed", c.seed, w);
  read(doc, "resolution", c.resolution, w);
  read(doc, "grid_resolution", c.grid_resolution, w);
  read(doc, "ray_samples", c.ray_samples, w);
  read(doc, "temperature", c.temperature, w);
  read(doc, "views", c.views, w);
  read(doc, "with_rgb", c.with_rgb, w);
  data::family_preset(c.source_preset);
  data::family_preset(c.target_preset);
  if (c.source_count < 1 || c.target_count < 1) throw ConfigError("dataset counts must be at least 1");
  if (c.views < 1 || c.resolution < 2 || c.grid_resolution < 2 || c.ray_samples < 1 || !(c.temperature > 0.0)) {
    throw ConfigError("invalid data render settings");
  }
  return c;
}

EvalConfig eval_from(const json& doc) {
  reject_unknown(doc, {"preset", "seed"}, "eval");
  EvalConfig c;
  read(doc, "preset", c.preset, "eval");
  read(doc, "seed", c.seed, "eval");
  metrics::eval_preset(c.preset);
  return c;
}

}  // namespace

std::uint64_t DataConfig::source_seed() const { return numerics::derive_seed(seed, 1); }
std::uint64_t DataConfig::target_seed() const { return numerics::derive_seed(seed, 2); }

json to_json(const RunConfig& c) {
  const auto& d = c.data;
  return {{"data",
           {{"source_preset", d.source_preset},
            {"source_count", d.source_count},
            {"target_preset", d.target_preset},
            {"target_count", d.target_count},
            {"seed", d.seed},
            {"resolution", d.resolution},
            {"grid_resolution", d.grid_resolution},
            {"ray_samples", d.ray_samples},
            {"temperature", d.temperature},
            {"views", d.views},
            {"with_rgb", d.with_rgb}}},
          {"pretrain", trainer::to_json(c.pretrain)},
          {"adapt", trainer::to_json(c.adapt)},
          {"eval", {{"preset", c.eval.preset}, {"seed", c.eval.seed}}}};
}

RunConfig run_config_from_json(const json& doc) {
  reject_unknown(doc, {"data", "pretrain", "adapt", "eval"}, "config");
  RunConfig c;
  if (doc.contains("data")) c.data = data_from(doc.at("data"));
  if (doc.contains("pretrain")) c.pretrain = trainer::pretrain_config_from_json(doc.at("pretrain"));
  if (doc.contains("adapt")) c.adapt = trainer::adaptation_config_from_json(doc.at("adapt"));
  if (doc.contains("eval")) c.eval = eval_from(doc.at("eval"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FilesystemError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return run_config_from_json(json::parse(text.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace fs3d::cli
