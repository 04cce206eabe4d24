#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fs3d/adversarial/adversarial.hpp"
#include "fs3d/generator/generator.hpp"
#include "json.hpp"

namespace fs3d::trainer {

/// Generator and discriminator weights with the run that produced them.
struct Checkpoint {
  std::string stage;  // "pretrain" or "adapt"
  generator::Generator generator;
  adversarial::Discriminator d_mask;
  std::optional<adversarial::Discriminator> d_rgb;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
};

struct ManifestEntry {
  std::string name;
  std::size_t offset = 0;
  numerics::Shape shape;
};

/// Parameter names, payload offsets and shapes: generator entries, then the
/// mask discriminator, then the RGB discriminator when present.
std::vector<ManifestEntry> payload_manifest(const Checkpoint& checkpoint);
/// All parameter values in manifest order.
std::vector<double> payload(const Checkpoint& checkpoint);

/// `base` with any ".ckpt.json" or ".ckpt.bin" suffix removed.
std::filesystem::path checkpoint_base(const std::filesystem::path& path);
std::filesystem::path header_path(const std::filesystem::path& base);
std::filesystem::path payload_path(const std::filesystem::path& base);

/// Writes `<base>.ckpt.json` and `<base>.ckpt.bin` (little-endian float64).
void save_checkpoint(const std::filesystem::path& base, const Checkpoint& checkpoint);
/// Throws FilesystemError for missing files and ConfigError when the header is
/// malformed or the manifest does not tile the payload.
Checkpoint load_checkpoint(const std::filesystem::path& base);

}  // namespace fs3d::trainer
