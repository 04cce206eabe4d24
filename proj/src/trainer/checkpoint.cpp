#include "fs3d/trainer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fs3d/errors.hpp"

namespace fs3d::trainer {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

json generator_config_json(const generator::GeneratorConfig& c) {
  return {{"latent_dim", c.latent_dim},   {"style_dim", c.style_dim},
          {"geo_hidden", c.geo_hidden},   {"tex_hidden", c.tex_hidden},
          {"tex_features", c.tex_features}, {"grid_resolution", c.grid_resolution},
          {"frequencies", c.frequencies}};
}

generator::GeneratorConfig generator_config_from(const json& j) {
  generator::GeneratorConfig c;
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.style_dim = j.at("style_dim").get<std::size_t>();
  c.geo_hidden = j.at("geo_hidden").get<std::size_t>();
  c.tex_hidden = j.at("tex_hidden").get<std::size_t>();
  c.tex_features = j.at("tex_features").get<std::size_t>();
  c.grid_resolution = j.at("grid_resolution").get<std::size_t>();
  c.frequencies = j.at("frequencies").get<std::size_t>();
  return c;
}

json discriminator_json(const adversarial::Discriminator& d) {
  return {{"resolution", d.config.resolution},
          {"channels", d.config.channels},
          {"hidden", d.config.hidden},
          {"pool", d.config.pool}};
}

adversarial::DiscriminatorConfig discriminator_config_from(const json& j) {
  adversarial::DiscriminatorConfig c;
  c.resolution = j.at("resolution").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.pool = j.at("pool").get<bool>();
  return c;
}

void append_entries(const numerics::ParameterSet& params, std::vector<ManifestEntry>& out, std::size_t& offset) {
  for (const auto& [name, value] : params.entries()) {
    out.push_back({name, offset, value.shape()});
    offset += value.size();
  }
}

std::vector<const numerics::ParameterSet*> parameter_sets(const Checkpoint& c) {
  std::vector<const numerics::ParameterSet*> sets{&c.generator.params, &c.d_mask.params};
  if (c.d_rgb) sets.push_back(&c.d_rgb->params);
  return sets;
}

std::string read_file(const fs::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw FilesystemError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void encode_le(double value, char* out) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) out[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
}

double decode_le(const char* in) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

// Copies payload values into `params`, whose names and shapes must match the manifest in order.
void fill(numerics::ParameterSet& params, const std::vector<ManifestEntry>& manifest, std::size_t& cursor,
          const std::string& payload_bytes) {
  for (auto& [name, value] : params.entries()) {
    if (cursor >= manifest.size()) throw ConfigError("checkpoint manifest is missing " + name);
    const ManifestEntry& e = manifest[cursor++];
    if (e.name != name || e.shape != value.shape()) {
      throw ConfigError("checkpoint manifest entry " + e.name + " does not match architecture entry " + name);
    }
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = decode_le(payload_bytes.data() + 8 * (e.offset + i));
  }
}

}  // namespace

std::vector<ManifestEntry> payload_manifest(const Checkpoint& checkpoint) {
  std::vector<ManifestEntry> out;
  std::size_t offset = 0;
  for (const auto* set : parameter_sets(checkpoint)) append_entries(*set, out, offset);
  return out;
}

std::vector<double> payload(const Checkpoint& checkpoint) {
  std::vector<double> out;
  for (const auto* set : parameter_sets(checkpoint)) {
    for (const auto& [name, value] : set->entries()) out.insert(out.end(), value.data(), value.data() + value.size());
  }
  return out;
}

fs::path checkpoint_base(const fs::path& path) {
  std::string s = path.string();
  for (const std::string suffix : {".ckpt.json", ".ckpt.bin"}) {
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return s.substr(0, s.size() - suffix.size());
    }
  }
  return path;
}

fs::path header_path(const fs::path& base) { return checkpoint_base(base).string() + ".ckpt.json"; }
fs::path payload_path(const fs::path& base) { return checkpoint_base(base).string() + ".ckpt.bin"; }

void save_checkpoint(const fs::path& base, const Checkpoint& c) {
  json manifest = json::array();
  const auto entries = payload_manifest(c);
  for (const auto& e : entries) manifest.push_back({{"name", e.name}, {"offset", e.offset}, {"shape", e.shape}});
  const std::vector<double> values = payload(c);

  json header = {{"format", kFormatVersion},
                 {"stage", c.stage},
                 {"generator", generator_config_json(c.generator.config)},
                 {"frozen_mapping", c.generator.frozen_mapping},
                 {"frozen_texture", c.generator.frozen_texture},
                 {"d_mask", discriminator_json(c.d_mask)},
                 {"d_rgb", c.d_rgb ? discriminator_json(*c.d_rgb) : json(nullptr)},
                 {"config", c.config},
                 {"seed", c.seed},
                 {"iteration", c.iteration},
                 {"payload_values", values.size()},
                 {"manifest", manifest}};

  const fs::path dir = checkpoint_base(base).parent_path();
  std::error_code ec;
  if (!dir.empty()) fs::create_directories(dir, ec);

  std::string bytes(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) encode_le(values[i], bytes.data() + 8 * i);
  {
    std::ofstream out(payload_path(base), std::ios::binary | std::ios::trunc);
    if (!out) throw FilesystemError("cannot write " + payload_path(base).string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FilesystemError("failed writing " + payload_path(base).string());
  }
  std::ofstream out(header_path(base), std::ios::trunc);
  if (!out) throw FilesystemError("cannot write " + header_path(base).string());
  out << header.dump(2) << "\n";
  if (!out) throw FilesystemError("failed writing " + header_path(base).string());
}

Checkpoint load_checkpoint(const fs::path& base) {
  const std::string header_text = read_file(header_path(base), std::ios::in);
  const std::string bytes = read_file(payload_path(base), std::ios::binary);
  try {
    const json h = json::parse(header_text);
    if (h.at("format").get<int>() != kFormatVersion) throw ConfigError("unsupported checkpoint format");
    Checkpoint c;
    c.stage = h.at("stage").get<std::string>();
    c.generator = generator::initialize_generator(generator_config_from(h.at("generator")), 0);
    c.generator.frozen_mapping = h.at("frozen_mapping").get<bool>();
    c.generator.frozen_texture = h.at("frozen_texture").get<bool>();
    c.d_mask = adversarial::initialize_discriminator(discriminator_config_from(h.at("d_mask")),
                                                     adversarial::ImageKind::Mask, 0);
    if (!h.at("d_rgb").is_null()) {
      c.d_rgb = adversarial::initialize_discriminator(discriminator_config_from(h.at("d_rgb")),
                                                      adversarial::ImageKind::Rgb, 0);
    }
    c.config = h.at("config");
    c.seed = h.at("seed").get<std::uint64_t>();
    c.iteration = h.at("iteration").get<std::size_t>();

    std::vector<ManifestEntry> manifest;
    std::size_t expected_offset = 0;
    for (const json& e : h.at("manifest")) {
      ManifestEntry entry{e.at("name").get<std::string>(), e.at("offset").get<std::size_t>(),
                          e.at("shape").get<numerics::Shape>()};
      if (entry.offset != expected_offset) throw ConfigError("checkpoint manifest offsets do not tile the payload");
      expected_offset += numerics::element_count(entry.shape);
      manifest.push_back(std::move(entry));
    }
    if (expected_offset != h.at("payload_values").get<std::size_t>() || bytes.size() != 8 * expected_offset) {
      throw ConfigError("checkpoint payload holds " + std::to_string(bytes.size() / 8) + " values, manifest " +
                        std::to_string(expected_offset));
    }
    std::size_t cursor = 0;
    fill(c.generator.params, manifest, cursor, bytes);
    fill(c.d_mask.params, manifest, cursor, bytes);
    if (c.d_rgb) fill(c.d_rgb->params, manifest, cursor, bytes);
    if (cursor != manifest.size()) throw ConfigError("checkpoint manifest has entries beyond the architecture");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint header " + header_path(base).string() + ": " + e.what());
  }
}

}  // namespace fs3d::trainer
