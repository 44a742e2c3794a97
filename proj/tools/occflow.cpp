// occflow: command-line front end of the occupancy-flow lab.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "occflow/experiment.hpp"
#include "occflow/gradcheck.hpp"
#include "occflow/log.hpp"

namespace fs = std::filesystem;
using namespace occflow;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kDiverged = 3 };

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out;
  std::vector<std::string> ablate;
};

void add_common(CLI::App* app, Common& c, bool with_ablate = true) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--seed", c.seed, "random seed")->each([&](const std::string&) { c.seed_set = true; });
  app->add_option("--threads", c.threads, "worker threads (default: available cores)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--out", c.out, "output directory");
  if (with_ablate)
    app->add_option("--ablate", c.ablate, "no-ta | no-dyn-ta | no-sim | single-sdf (repeatable)")
        ->check(CLI::IsMember({"no-ta", "no-dyn-ta", "no-sim", "single-sdf"}));
}

/// Built-in defaults when no config is given; command-line flags override.
ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config);
  if (c.seed_set) {
    cfg.seed = c.seed;
    cfg.train.schedule.seed = c.seed;
  }
  if (!c.out.empty()) cfg.out_dir = c.out;
  for (const auto& a : c.ablate) cfg.ablation.enable(a);
  cfg.validate();
  return cfg;
}

std::string in_out(const ExperimentConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("", "no such file '" + path + "'");
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Workers workers(c.threads);
  const ExperimentResult res = run_experiment(cfg, workers);
  std::cout << res.report.pretty();
  std::cout << res.report.csv_header() << '\n' << res.report.csv_row() << '\n';
  return kOk;
}

int cmd_gen_scene(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const SceneDescription scene = cfg.scene();
  fs::create_directories(cfg.out_dir);
  std::ofstream(in_out(cfg, ArtifactNames::scene)) << scene_to_json(scene) << '\n';
  BatchOptions opt;
  opt.frame_count = scene.frames;
  opt.seed = cfg.seed;
  opt.label_noise = scene.label_noise;
  const auto batches = make_batches(scene.oracle(), scene.rig, opt);
  write_rays(in_out(cfg, "rays.bin"), batches);
  std::size_t n = 0;
  for (const auto& b : batches) n += b.rays.size();
  std::cout << "wrote " << batches.size() << " batches (" << n << " rays) to " << cfg.out_dir << '\n';
  return kOk;
}

int cmd_label_rays(const Common& c, std::string rays) {
  const ExperimentConfig cfg = resolve(c);
  if (rays.empty()) rays = in_out(cfg, "rays.bin");
  require_file(rays);
  const SceneDescription scene = cfg.scene();
  std::vector<RayBatch> batches = read_rays(rays);
  const MaskSet masks = masks_from_oracle(batches, scene.mask_confidence);
  const LabelStats st = classify_rays(batches, masks, scene.rig.cameras, scene.volume, cfg.labels);
  fs::create_directories(cfg.out_dir);
  write_rays(in_out(cfg, "labeled_rays.bin"), batches);
  std::cout << "static " << st.static_rays << "  dynamic " << st.dynamic_rays << "  discarded "
            << st.discarded << "  demoted " << st.demoted << '\n';
  return kOk;
}

int cmd_train(const Common& c, const std::string& rays) {
  const ExperimentConfig cfg = resolve(c);
  const Workers workers(c.threads);
  PreparedData data;
  if (rays.empty()) {
    data = prepare_data(cfg);
  } else {
    require_file(rays);
    data.scene = cfg.scene();
    data.batches = read_rays(rays);
  }
  fs::create_directories(cfg.out_dir);
  TrainState state;
  try {
    train_fields(cfg, data, workers, state);
  } catch (const std::runtime_error&) {
    write_loss_trace(in_out(cfg, ArtifactNames::loss_trace), state.trace);
    throw;
  }
  write_loss_trace(in_out(cfg, ArtifactNames::loss_trace), state.trace);
  write_checkpoint(in_out(cfg, ArtifactNames::checkpoint), state);
  std::cout << "trained " << state.iteration << " iterations, a = " << state.a() << '\n';
  return kOk;
}

int cmd_eval(const Common& c, std::string checkpoint) {
  const ExperimentConfig cfg = resolve(c);
  if (checkpoint.empty()) checkpoint = in_out(cfg, ArtifactNames::checkpoint);
  require_file(checkpoint);
  const Workers workers(c.threads);
  const TrainState state = read_checkpoint(checkpoint);
  const SceneDescription scene = cfg.scene();
  const MetricsReport report = evaluate_state(cfg, scene, state, workers);
  fs::create_directories(cfg.out_dir);
  write_metrics_csv(in_out(cfg, ArtifactNames::metrics_csv), {report});
  std::ofstream(in_out(cfg, ArtifactNames::metrics_json)) << report.to_json() << '\n';
  const int t = std::min(scene.frames - 1, scene.frames / 2);
  write_renders(in_out(cfg, "renders"), state, scene, t, cfg.ablation.single_sdf, workers);
  std::cout << report.pretty();
  return kOk;
}

int cmd_compare(const std::vector<std::string>& files, const std::string& csv_path) {
  std::vector<MetricsReport> reports;
  for (const auto& f : files) {
    require_file(f);
    for (auto& r : MetricsReport::read_csv(f)) reports.push_back(std::move(r));
  }
  std::string csv;
  std::cout << compare_reports(reports, &csv);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open " + csv_path);
    out << csv;
  }
  return kOk;
}

int cmd_validate(const Common& c) {
  if (c.config.empty()) throw ConfigError("", "validate needs --config");
  resolve(c);
  std::cout << c.config << ": ok\n";
  return kOk;
}

int cmd_gradcheck(const Common& c, int params) {
  GradCheckOptions opt;
  if (c.seed_set) opt.seed = c.seed;
  opt.params = params;
  const Workers workers(c.threads);
  const GradCheckResult r = gradient_check(opt, workers);
  for (const auto& e : r.entries)
    std::printf("%-9s id=%-7u analytic=% .9e numeric=% .9e rel=%.2e %s\n", e.block.c_str(), e.id,
                e.analytic, e.numeric, e.rel_error, e.pass ? "ok" : "FAIL");
  std::printf("max rel error %.3e (flow %.3e) over %zu parameters: %s\n", r.max_rel_error,
              r.max_rel_error_flow, r.entries.size(), r.pass ? "PASS" : "FAIL");
  return r.pass ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Self-supervised occupancy and flow lab on synthetic scenes"};
  app.require_subcommand(1);

  Common common;
  std::string rays, checkpoint, csv_path;
  std::vector<std::string> files;
  int params = 100;

  auto* run = app.add_subcommand("run", "generate, label, train, evaluate and write artifacts");
  add_common(run, common);
  auto* gen = app.add_subcommand("gen-scene", "write scene.json and rays.bin");
  add_common(gen, common, false);
  auto* label = app.add_subcommand("label-rays", "label LiDAR rays from instance masks");
  add_common(label, common, false);
  label->add_option("--rays", rays, "input rays (default: <out>/rays.bin)");
  auto* train = app.add_subcommand("train", "optimize the fields and write a checkpoint");
  add_common(train, common);
  train->add_option("--rays", rays, "labeled rays (default: generated from the config)");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint (default: <out>/checkpoint.grid)");
  auto* compare = app.add_subcommand("compare", "ablation table from metrics.csv files");
  compare->add_option("reports", files, "metrics.csv files")->required();
  compare->add_option("--csv", csv_path, "also write the table as CSV");
  auto* validate = app.add_subcommand("validate", "check a config file");
  add_common(validate, common);
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the loss gradient");
  add_common(grad, common, false);
  grad->add_option("--params", params, "parameters to check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(common);
    if (*gen) return cmd_gen_scene(common);
    if (*label) return cmd_label_rays(common, rays);
    if (*train) return cmd_train(common, rays);
    if (*eval) return cmd_eval(common, checkpoint);
    if (*compare) return cmd_compare(files, csv_path);
    if (*validate) return cmd_validate(common);
    if (*grad) return cmd_gradcheck(common, params);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
