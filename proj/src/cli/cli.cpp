#include "fs3d/cli/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "fs3d/cli/gradcheck.hpp"
#include "fs3d/data/dataset.hpp"
#include "fs3d/errors.hpp"
#include "fs3d/numerics/random.hpp"
#include "fs3d/renderer/renderer.hpp"
#include "fs3d/trainer/trainer.hpp"

namespace fs3d::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::uint64_t kRenderStream = 0x5e4d;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FilesystemError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FilesystemError("cannot write " + path.string());
  out << text;
  if (!out) throw FilesystemError("failed writing " + path.string());
}

trainer::StepCallback progress(std::ostream& err, const std::string& label, std::size_t total) {
  return [&err, label, total](const trainer::StepLog& l) {
    if (l.step % 100 == 0 || l.step + 1 == total) {
      char line[160];
      std::snprintf(line, sizeof line, "%s step %zu/%zu total %.6f\n", label.c_str(), l.step + 1, total, l.total);
      err << line << std::flush;
    }
  };
}

void write_run(const fs::path& dir, const std::string& name, const trainer::RunResult& result) {
  ensure_dir(dir);
  trainer::save_checkpoint(dir / name, result.checkpoint);
  trainer::write_loss_log(dir / "losses.tsv", result.log);
  trainer::write_discriminator_log(dir / "d_losses.tsv", result.log);
}

metrics::MetricReport evaluate_checkpoint(const trainer::Checkpoint& ckpt, const fs::path& target_dir,
                                          const EvalConfig& eval) {
  const data::DatasetManifest manifest = data::read_manifest(target_dir);
  if (!manifest.family) {
    throw ConfigError("target dataset " + target_dir.string() + " has no family record to draw evaluation shapes from");
  }
  const metrics::EvalPreset preset = metrics::eval_preset(eval.preset);
  const metrics::EvalInputs inputs =
      metrics::make_eval_inputs(*manifest.family, ckpt.generator.config.grid_resolution, preset);
  return metrics::evaluate_model(ckpt.generator, inputs, preset, eval.seed);
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string setup;
  std::string out;
  std::string ckpt;
  std::string target;
  std::string preset;
  bool print_defaults = false;
};

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (!f.mode.empty()) c.adapt.mode = rdp::parse_mode(f.mode);
  if (!f.setup.empty()) c.adapt.setup = rdp::parse_setup(f.setup);
  if (!f.preset.empty()) c.eval.preset = f.preset;
  if (!f.ckpt.empty()) c.adapt.source_checkpoint = f.ckpt;
  c.adapt.validate();
  return c;
}

fs::path required(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw CLI::ValidationError(std::string(command) + " needs " + flag);
  return value;
}

int gen_data(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  if (f.seed) c.data.seed = *f.seed;
  const fs::path dir = required(f.out, "--out", "gen-data");
  generate_datasets(c.data, dir);
  out << "wrote " << (dir / "source").string() << " and " << (dir / "target").string() << "\n";
  return kExitOk;
}

int pretrain(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve(f);
  if (f.seed) c.pretrain.seed = *f.seed;
  if (!f.target.empty()) c.pretrain.source_data = f.target;
  const fs::path dir = required(f.out, "--out", "pretrain");
  if (c.pretrain.source_data.empty()) throw CLI::ValidationError("pretrain needs --target or pretrain.source_data");
  const data::Dataset source = data::load_dataset(c.pretrain.source_data);
  const auto result = trainer::pretrain_source(c.pretrain, source, progress(err, "pretrain", c.pretrain.iterations));
  write_run(dir, "source", result);
  out << "wrote " << trainer::header_path(dir / "source").string() << "\n";
  return kExitOk;
}

int adapt(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve(f);
  if (f.seed) c.adapt.seed = *f.seed;
  if (!f.target.empty()) c.adapt.target_data = f.target;
  const fs::path dir = required(f.out, "--out", "adapt");
  if (c.adapt.source_checkpoint.empty()) throw CLI::ValidationError("adapt needs --ckpt or adapt.source_checkpoint");
  if (c.adapt.target_data.empty()) throw CLI::ValidationError("adapt needs --target or adapt.target_data");
  const trainer::Checkpoint source = trainer::load_checkpoint(c.adapt.source_checkpoint);
  const data::Dataset target = data::load_dataset(c.adapt.target_data);
  const auto result = trainer::adapt(c.adapt, source, target, progress(err, "adapt", c.adapt.iterations));
  write_run(dir, "target", result);
  out << "wrote " << trainer::header_path(dir / "target").string() << "\n";
  return kExitOk;
}

int eval(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  if (f.seed) c.eval.seed = *f.seed;
  const trainer::Checkpoint ckpt = trainer::load_checkpoint(required(f.ckpt, "--ckpt", "eval"));
  const fs::path target = required(f.target.empty() ? c.adapt.target_data : f.target, "--target", "eval");
  const metrics::MetricReport report = evaluate_checkpoint(ckpt, target, c.eval);
  const std::string table = report.to_table(fs::path(f.ckpt).filename().string());
  out << table;
  if (!f.out.empty()) {
    ensure_dir(f.out);
    write_text(fs::path(f.out) / "report.json", report.to_json() + "\n");
    write_text(fs::path(f.out) / "report.txt", table);
  } else {
    out << report.to_json() << "\n";
  }
  return kExitOk;
}

int render(const Flags& f, std::ostream& out) {
  RunConfig c = resolve(f);
  const std::uint64_t seed = f.seed.value_or(c.eval.seed);
  const trainer::Checkpoint ckpt = trainer::load_checkpoint(required(f.ckpt, "--ckpt", "render"));
  const fs::path dir = required(f.out, "--out", "render");
  render_grid(ckpt, 8, c.adapt.views, c.adapt.render_resolution, seed, dir);
  out << "wrote " << (dir / "masks.pgm").string() << " and " << (dir / "rgb.ppm").string() << "\n";
  return kExitOk;
}

int gradcheck(const Flags& f, std::ostream& out) {
  GradientSuiteOptions options;
  if (f.seed) options.seed = *f.seed;
  const auto rows = gradient_suite(options);
  const std::string table = gradcheck_table(rows);
  out << table;
  if (!f.out.empty()) {
    ensure_dir(f.out);
    write_text(fs::path(f.out) / "gradcheck.txt", table);
  }
  for (const auto& row : rows) {
    if (!row.passed) return kExitError;
  }
  return kExitOk;
}

int ablate(const Flags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve(f);
  if (f.seed) c.adapt.seed = *f.seed;
  const fs::path dir = required(f.out, "--out", "ablate");
  if (c.adapt.source_checkpoint.empty()) throw CLI::ValidationError("ablate needs --ckpt or adapt.source_checkpoint");
  const fs::path target = required(f.target.empty() ? c.adapt.target_data : f.target, "--target", "ablate");
  const trainer::Checkpoint source = trainer::load_checkpoint(c.adapt.source_checkpoint);
  const auto rows = run_ablation(c, source, target, dir, err);
  const std::string table = ablation_table(rows);
  write_text(dir / "ablation.txt", table);
  json reports = json::array();
  for (const auto& row : rows) reports.push_back({{"label", row.label}, {"report", json::parse(row.report.to_json())}});
  write_text(dir / "ablation.json", reports.dump(2) + "\n");
  out << table;
  return kExitOk;
}

}  // namespace

void generate_datasets(const DataConfig& c, const fs::path& dir) {
  const auto ring = renderer::camera_ring(c.views);
  const std::pair<std::string, data::FamilyRecord> sets[] = {
      {"source", {c.source_preset, data::family_preset(c.source_preset), c.source_count, c.source_seed()}},
      {"target", {c.target_preset, data::family_preset(c.target_preset), c.target_count, c.target_seed()}}};
  for (const auto& [name, family] : sets) {
    data::RenderDatasetOptions options;
    options.resolution = c.resolution;
    options.grid_resolution = c.grid_resolution;
    options.ray_samples = c.ray_samples;
    options.temperature = c.temperature;
    options.with_rgb = c.with_rgb;
    options.seed = family.seed;
    options.family = family;
    data::render_dataset(family.shapes(), ring, dir / name, options);
  }
}

void render_grid(const trainer::Checkpoint& ckpt, std::size_t samples, std::size_t views, std::size_t resolution,
                 std::uint64_t seed, const fs::path& dir) {
  ensure_dir(dir);
  const auto latents = generator::sample_latents(samples, numerics::derive_seed(seed, kRenderStream),
                                                 ckpt.generator.config.latent_dim);
  const auto batch = generator::generate(ckpt.generator, latents);
  const auto ring = renderer::camera_ring(views);
  const renderer::RenderSettings settings{resolution, 24, 0.05};
  const std::size_t r = resolution;
  numerics::Array masks(numerics::Shape{samples * r, views * r});
  numerics::Array rgb(numerics::Shape{samples * r, views * r, 3});
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t v = 0; v < views; ++v) {
      const auto view = renderer::render_view(batch.shapes[i].sdf, batch.shapes[i].deform, batch.textures[i].colors,
                                              numerics::Array(), ckpt.generator.config.grid_resolution, ring[v],
                                              settings);
      for (std::size_t y = 0; y < r; ++y) {
        for (std::size_t x = 0; x < r; ++x) {
          const std::size_t row = i * r + y, col = v * r + x;
          masks[row * views * r + col] = view.mask[y * r + x];
          for (std::size_t ch = 0; ch < 3; ++ch) rgb[(row * views * r + col) * 3 + ch] = view.rgb[(y * r + x) * 3 + ch];
        }
      }
    }
  }
  data::write_pgm(dir / "masks.pgm", masks);
  data::write_ppm(dir / "rgb.ppm", rgb);
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const trainer::Checkpoint& source,
                                      const fs::path& target_dir, const fs::path& dir, std::ostream& err) {
  trainer::AdaptationConfig base = config.adapt;
  base.mode = rdp::Mode::Ours;
  const rdp::ActiveTerms active = rdp::active_terms(base.setup, base.mode);
  std::vector<std::pair<std::string, trainer::AdaptationConfig>> rows;
  auto without = [&](const char* label, double rdp::LossWeights::*weight) {
    trainer::AdaptationConfig c = base;
    c.weights.*weight = 0.0;
    rows.emplace_back(label, c);
  };
  if (active.tex) without("wo_tex", &rdp::LossWeights::tex);
  if (active.geo) without("wo_geo", &rdp::LossWeights::geo);
  if (active.rgb) without("wo_rgb", &rdp::LossWeights::rgb);
  if (active.mask) without("wo_mask", &rdp::LossWeights::mask);
  rows.emplace_back("full", base);

  const data::Dataset target = data::load_dataset(target_dir);
  std::vector<AblationRow> out;
  for (const auto& [label, c] : rows) {
    const auto result = trainer::adapt(c, source, target, progress(err, "ablate " + label, c.iterations));
    write_run(dir / label, "target", result);
    out.push_back({label, evaluate_checkpoint(result.checkpoint, target_dir, config.eval)});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string text;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string table = rows[i].report.to_table(rows[i].label);
    if (i > 0) table = table.substr(table.find('\n') + 1);
    text += table;
  }
  return text;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot 3D shape generator adaptation with relative-distance preservation"};
  app.require_subcommand(0, 1);
  Flags f;
  app.add_flag("--print-defaults", f.print_defaults, "Print the default run configuration as JSON and exit");

  const std::vector<std::string> modes{"ours", "dftm", "freezet"};
  const std::vector<std::string> setups{"A", "B"};
  const std::vector<std::string> presets{"desk", "full"};
  auto config_opt = [&](CLI::App* s) {
    s->add_option("--config", f.config, "Run configuration JSON")->check(CLI::ExistingFile);
  };
  auto seed_opt = [&](CLI::App* s) { s->add_option("--seed", f.seed, "Seed overriding the configuration"); };
  auto out_opt = [&](CLI::App* s, const char* what) { s->add_option("--out", f.out, what); };
  auto ckpt_opt = [&](CLI::App* s) { s->add_option("--ckpt", f.ckpt, "Checkpoint base path or .ckpt.json file"); };
  auto target_opt = [&](CLI::App* s, const char* what) { s->add_option("--target", f.target, what); };
  auto mode_opt = [&](CLI::App* s) {
    s->add_option("--mode", f.mode, "Adaptation mode")->check(CLI::IsMember(modes));
  };
  auto setup_opt = [&](CLI::App* s) { s->add_option("--setup", f.setup, "Adaptation setup")->check(CLI::IsMember(setups)); };
  auto preset_opt = [&](CLI::App* s) {
    s->add_option("--preset", f.preset, "Evaluation sample counts")->check(CLI::IsMember(presets));
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Render the synthetic source and few-shot target datasets");
  config_opt(gen);
  seed_opt(gen);
  out_opt(gen, "Output directory; receives source/ and target/");

  CLI::App* pre = app.add_subcommand("pretrain", "Train a source generator on a source dataset");
  config_opt(pre);
  seed_opt(pre);
  out_opt(pre, "Run directory for source.ckpt.* and losses.tsv");
  target_opt(pre, "Source dataset directory (overrides pretrain.source_data)");

  CLI::App* ad = app.add_subcommand("adapt", "Adapt a source checkpoint to a few-shot target dataset");
  config_opt(ad);
  seed_opt(ad);
  mode_opt(ad);
  setup_opt(ad);
  out_opt(ad, "Run directory for target.ckpt.* and losses.tsv");
  ckpt_opt(ad);
  target_opt(ad, "Target dataset directory (overrides adapt.target_data)");

  CLI::App* ev = app.add_subcommand("eval", "Score a checkpoint against a target family");
  config_opt(ev);
  seed_opt(ev);
  ckpt_opt(ev);
  target_opt(ev, "Few-shot target dataset directory");
  preset_opt(ev);
  out_opt(ev, "Directory for report.json and report.txt; printed when absent");

  CLI::App* rd = app.add_subcommand("render", "Render a grid of samples from a checkpoint");
  config_opt(rd);
  seed_opt(rd);
  ckpt_opt(rd);
  out_opt(rd, "Directory for masks.pgm and rgb.ppm");

  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of every registered loss");
  seed_opt(gc);
  out_opt(gc, "Directory for gradcheck.txt");

  CLI::App* ab = app.add_subcommand("ablate", "Adapt and evaluate with each relative-distance term switched off");
  config_opt(ab);
  seed_opt(ab);
  setup_opt(ab);
  ckpt_opt(ab);
  target_opt(ab, "Target dataset directory");
  preset_opt(ab);
  out_opt(ab, "Directory for per-row runs and ablation.txt");

  std::vector<std::string> argv_storage{"fs3d"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (f.print_defaults) {
      out << to_json(RunConfig{}).dump(2) << "\n";
      return kExitOk;
    }
    if (gen->parsed()) return gen_data(f, out);
    if (pre->parsed()) return pretrain(f, out, err);
    if (ad->parsed()) return adapt(f, out, err);
    if (ev->parsed()) return eval(f, out);
    if (rd->parsed()) return render(f, out);
    if (gc->parsed()) return gradcheck(f, out);
    if (ab->parsed()) return ablate(f, out, err);
    err << "error: no command given\n" << app.help();
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace fs3d::cli
