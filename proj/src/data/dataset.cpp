#include "fs3d/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fs3d/errors.hpp"
#include "json.hpp"

namespace fs3d::data {

using json = nlohmann::json;
using numerics::Array;
using numerics::Shape;

namespace {

constexpr int kMaxValue = 255;

int quantize(double v) {
  if (!std::isfinite(v)) throw NumericError("cannot write a non-finite pixel");
  return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * kMaxValue));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FilesystemError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw FilesystemError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FilesystemError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Header and pixel tokens of a plain PNM file, comments removed.
struct PnmReader {
  std::istringstream in;
  std::string path;

  long next() {
    std::string token;
    while (in >> token) {
      if (token[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size()) throw IngestionError(path + ": bad token '" + token + "'", 0);
      return v;
    }
    throw IngestionError(path + ": truncated image", 0);
  }
};

Array read_pnm(const std::filesystem::path& path, const std::string& magic, std::size_t channels) {
  PnmReader r{std::istringstream(read_text(path)), path.string()};
  std::string m;
  r.in >> m;
  if (m != magic) throw IngestionError(path.string() + ": expected " + magic + " header", 0);
  const long w = r.next(), h = r.next(), max = r.next();
  if (w <= 0 || h <= 0 || max <= 0 || max > 65535) throw IngestionError(path.string() + ": bad image header", 0);
  Array out(channels == 1 ? Shape{static_cast<std::size_t>(h), static_cast<std::size_t>(w)}
                          : Shape{static_cast<std::size_t>(h), static_cast<std::size_t>(w), channels});
  for (double& v : out.values()) {
    const long p = r.next();
    if (p < 0 || p > max) throw IngestionError(path.string() + ": pixel value out of range", 0);
    v = static_cast<double>(p) / static_cast<double>(max);
  }
  return out;
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
Range range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json spec_json(const FamilySpec& s) {
  json colors_base = json::array(), colors_accent = json::array();
  for (int c = 0; c < 3; ++c) {
    colors_base.push_back(range_json(s.base_color[c]));
    colors_accent.push_back(range_json(s.accent_color[c]));
  }
  return {{"kind", to_string(s.kind)},
          {"extent_x", range_json(s.extent_x)},
          {"extent_y", range_json(s.extent_y)},
          {"extent_z", range_json(s.extent_z)},
          {"exponent", range_json(s.exponent)},
          {"offset", range_json(s.offset)},
          {"detail", range_json(s.detail)},
          {"base_color", colors_base},
          {"accent_color", colors_accent}};
}

FamilySpec spec_from(const json& j) {
  FamilySpec s;
  s.kind = parse_family_kind(j.at("kind").get<std::string>());
  s.extent_x = range_from(j.at("extent_x"));
  s.extent_y = range_from(j.at("extent_y"));
  s.extent_z = range_from(j.at("extent_z"));
  s.exponent = range_from(j.at("exponent"));
  s.offset = range_from(j.at("offset"));
  s.detail = range_from(j.at("detail"));
  for (int c = 0; c < 3; ++c) {
    s.base_color[c] = range_from(j.at("base_color").at(c));
    s.accent_color[c] = range_from(j.at("accent_color").at(c));
  }
  return s;
}

std::string file_name(std::size_t sample, std::size_t view, const char* ext) {
  return "s" + std::to_string(sample) + "_v" + std::to_string(view) + ext;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Array& image) {
  if (image.rank() != 2) throw ContractError("PGM images are [H x W]");
  std::string text = "P2\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  for (std::size_t y = 0; y < image.dim(0); ++y) {
    for (std::size_t x = 0; x < image.dim(1); ++x) {
      if (x > 0) text += ' ';
      text += std::to_string(quantize(image[y * image.dim(1) + x]));
    }
    text += '\n';
  }
  write_text(path, text);
}

void write_ppm(const std::filesystem::path& path, const Array& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ContractError("PPM images are [H x W x 3]");
  std::string text = "P3\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  for (std::size_t y = 0; y < image.dim(0); ++y) {
    for (std::size_t k = 0; k < image.dim(1) * 3; ++k) {
      if (k > 0) text += ' ';
      text += std::to_string(quantize(image[y * image.dim(1) * 3 + k]));
    }
    text += '\n';
  }
  write_text(path, text);
}

Array read_pgm(const std::filesystem::path& path) { return read_pnm(path, "P2", 1); }
Array read_ppm(const std::filesystem::path& path) { return read_pnm(path, "P3", 3); }

std::vector<AnalyticShape> FamilyRecord::shapes(std::size_t check_resolution) const {
  return make_family(spec, count, seed, check_resolution);
}

std::string manifest_to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& views : m.samples) {
    json list = json::array();
    for (const ViewRecord& v : views) {
      json entry = {{"azimuth", v.azimuth}, {"elevation", v.elevation}, {"mask", v.mask_file}};
      if (!v.rgb_file.empty()) entry["rgb"] = v.rgb_file;
      list.push_back(entry);
    }
    samples.push_back(list);
  }
  json doc = {{"sample_count", m.sample_count()},
              {"resolution", m.resolution},
              {"grid_resolution", m.grid_resolution},
              {"ray_samples", m.ray_samples},
              {"temperature", m.temperature},
              {"seed", m.seed},
              {"with_rgb", m.with_rgb},
              {"samples", samples}};
  if (m.family) {
    doc["family"] = {{"preset", m.family->preset},
                     {"spec", spec_json(m.family->spec)},
                     {"count", m.family->count},
                     {"seed", m.family->seed}};
  }
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    DatasetManifest m;
    m.resolution = doc.at("resolution").get<std::size_t>();
    m.grid_resolution = doc.at("grid_resolution").get<std::size_t>();
    m.ray_samples = doc.at("ray_samples").get<std::size_t>();
    m.temperature = doc.at("temperature").get<double>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.with_rgb = doc.at("with_rgb").get<bool>();
    for (const json& list : doc.at("samples")) {
      std::vector<ViewRecord> views;
      for (const json& e : list) {
        ViewRecord v;
        v.azimuth = e.at("azimuth").get<double>();
        v.elevation = e.at("elevation").get<double>();
        v.mask_file = e.at("mask").get<std::string>();
        if (e.contains("rgb")) v.rgb_file = e.at("rgb").get<std::string>();
        views.push_back(std::move(v));
      }
      m.samples.push_back(std::move(views));
    }
    if (doc.at("sample_count").get<std::size_t>() != m.samples.size()) {
      throw ConfigError("manifest sample_count disagrees with its sample list");
    }
    if (doc.contains("family")) {
      const json& f = doc.at("family");
      m.family = FamilyRecord{f.at("preset").get<std::string>(), spec_from(f.at("spec")),
                              f.at("count").get<std::size_t>(), f.at("seed").get<std::uint64_t>()};
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  write_text(dir / "manifest.json", manifest_to_json(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  return manifest_from_json(read_text(dir / "manifest.json"));
}

renderer::RenderedView render_shape(const AnalyticShape& shape, const renderer::Camera& camera,
                                    const RenderDatasetOptions& options) {
  const Array sdf = sample_sdf(shape.sdf, options.grid_resolution);
  const Array deform(Shape{sdf.size(), 3}, 0.0);
  const Array colors = options.with_rgb ? sample_colors(shape.color, options.grid_resolution) : Array();
  const renderer::RenderSettings settings{options.resolution, options.ray_samples, options.temperature};
  renderer::RenderedView view =
      renderer::render_view(sdf, deform, colors, Array(), options.grid_resolution, camera, settings);
  for (double& m : view.mask.values()) m = m >= 0.5 ? 1.0 : 0.0;
  return view;
}

DatasetManifest render_dataset(const std::vector<AnalyticShape>& shapes, const std::vector<renderer::Camera>& cameras,
                               const std::filesystem::path& dir, const RenderDatasetOptions& options) {
  if (shapes.empty()) throw ContractError("render_dataset needs at least one shape");
  if (cameras.empty()) throw ContractError("render_dataset needs at least one camera");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FilesystemError("cannot create " + dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.resolution = options.resolution;
  m.grid_resolution = options.grid_resolution;
  m.ray_samples = options.ray_samples;
  m.temperature = options.temperature;
  m.seed = options.seed;
  m.with_rgb = options.with_rgb;
  m.family = options.family;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    std::vector<ViewRecord> views;
    for (std::size_t j = 0; j < cameras.size(); ++j) {
      const renderer::RenderedView view = render_shape(shapes[i], cameras[j], options);
      ViewRecord record{cameras[j].azimuth, cameras[j].elevation, file_name(i, j, ".pgm"), ""};
      write_pgm(dir / record.mask_file, view.mask);
      if (options.with_rgb) {
        record.rgb_file = file_name(i, j, ".ppm");
        write_ppm(dir / record.rgb_file, view.rgb);
      }
      views.push_back(std::move(record));
    }
    m.samples.push_back(std::move(views));
  }
  write_manifest(dir, m);
  return m;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.manifest = read_manifest(dir);
  const auto& m = d.manifest;
  if (m.samples.empty()) throw ConfigError(dir.string() + ": dataset has no samples");
  const auto& first = m.samples.front();
  for (const ViewRecord& v : first) d.cameras.push_back(renderer::Camera{v.azimuth, v.elevation, 1.0});
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const auto& views = m.samples[i];
    if (views.size() != first.size()) {
      throw ConfigError(dir.string() + ": sample " + std::to_string(i) + " has " + std::to_string(views.size()) +
                        " views, expected " + std::to_string(first.size()));
    }
    std::vector<Array> masks, colors;
    for (std::size_t j = 0; j < views.size(); ++j) {
      if (views[j].azimuth != first[j].azimuth || views[j].elevation != first[j].elevation) {
        throw ConfigError(dir.string() + ": sample " + std::to_string(i) + " uses a different camera list");
      }
      Array mask = read_pgm(dir / views[j].mask_file);
      if (mask.dim(0) != m.resolution || mask.dim(1) != m.resolution) {
        throw ConfigError(dir.string() + "/" + views[j].mask_file + " does not match the manifest resolution");
      }
      for (double v : mask.values()) {
        if (v != 0.0 && v != 1.0) throw ConfigError(dir.string() + "/" + views[j].mask_file + " is not a hard mask");
      }
      masks.push_back(std::move(mask));
      if (m.with_rgb) {
        if (views[j].rgb_file.empty()) {
          throw ConfigError(dir.string() + ": sample " + std::to_string(i) + " lacks an RGB view");
        }
        Array rgb = read_ppm(dir / views[j].rgb_file);
        if (rgb.dim(0) != m.resolution || rgb.dim(1) != m.resolution) {
          throw ConfigError(dir.string() + "/" + views[j].rgb_file + " does not match the manifest resolution");
        }
        colors.push_back(std::move(rgb));
      }
    }
    d.masks.push_back(std::move(masks));
    if (m.with_rgb) d.rgb.push_back(std::move(colors));
  }
  return d;
}

}  // namespace fs3d::data
