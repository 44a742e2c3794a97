#include "occflow/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "occflow/render.hpp"

namespace occflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

/// Strict reader of one JSON object: typed getters and a final check for
/// unknown keys, all reporting the dotted key path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const json* get(const std::string& k) {
    used_.insert(k);
    const auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  void num(const std::string& k, double& out) {
    if (const json* v = get(k)) {
      if (!v->is_number()) throw ConfigError(key(k), "expected a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& k, int& out) {
    if (const json* v = get(k)) {
      if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
      out = v->get<int>();
    }
  }
  void u64(const std::string& k, std::uint64_t& out) {
    if (const json* v = get(k)) {
      if (!v->is_number_unsigned()) throw ConfigError(key(k), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void flag(const std::string& k, bool& out) {
    if (const json* v = get(k)) {
      if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
      out = v->get<bool>();
    }
  }
  void str(const std::string& k, std::string& out) {
    if (const json* v = get(k)) {
      if (!v->is_string()) throw ConfigError(key(k), "expected a string");
      out = v->get<std::string>();
    }
  }
  void vec3(const std::string& k, Vec3& out) {
    if (const json* v = get(k)) {
      if (!v->is_array() || v->size() != 3 || !(*v)[0].is_number() || !(*v)[1].is_number() ||
          !(*v)[2].is_number())
        throw ConfigError(key(k), "expected an array of three numbers");
      out = Vec3((*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>());
    }
  }
  void numbers(const std::string& k, std::vector<double>& out) {
    if (const json* v = get(k)) {
      if (!v->is_array()) throw ConfigError(key(k), "expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw ConfigError(key(k), "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  void ints(const std::string& k, std::vector<int>& out) {
    if (const json* v = get(k)) {
      if (!v->is_array()) throw ConfigError(key(k), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) throw ConfigError(key(k), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  std::optional<Section> child(const std::string& k) {
    if (const json* v = get(k)) return Section(*v, key(k));
    return std::nullopt;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

/// Re-raises a module validation failure as a ConfigError whose field is
/// the dotted name at the start of the message, or `section` otherwise.
template <class F>
void checked(const std::string& section, F&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    const std::string head = msg.substr(0, space);
    if (head.rfind(section + ".", 0) == 0 && space != std::string::npos)
      throw ConfigError(head, msg.substr(space + 1));
    throw ConfigError(section, msg);
  }
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string scene_id(const SceneDescription& s) {
  const std::string text = scene_to_json(s);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return hex64(h);
}

// --- ablation ----------------------------------------------------------------

std::string Ablation::label() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(no_ta, "no-ta");
  add(no_dyn_ta, "no-dyn-ta");
  add(no_sim, "no-sim");
  add(single_sdf, "single-sdf");
  return out.empty() ? "full" : out;
}

void Ablation::enable(const std::string& name) {
  if (name == "no-ta") no_ta = true;
  else if (name == "no-dyn-ta") no_dyn_ta = true;
  else if (name == "no-sim") no_sim = true;
  else if (name == "single-sdf") single_sdf = true;
  else throw ConfigError("ablate", "unknown switch '" + name + "'");
}

// --- config --------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("JSON syntax error: ") + e.what());
  }
  ExperimentConfig c;
  Section r(root, "");

  if (auto s = r.child("scene")) {
    s->str("file", c.scene_file);
    s->integer("movers", c.movers);
    if (s->has("frames")) {
      int f = 0;
      s->integer("frames", f);
      c.frames = f;
    }
    if (s->has("mask_confidence")) {
      double v = 0.0;
      s->num("mask_confidence", v);
      c.mask_confidence = v;
    }
    if (s->has("label_noise")) {
      double v = 0.0;
      s->num("label_noise", v);
      c.label_noise = v;
    }
    s->finish();
    if (!c.scene_file.empty() && !base_dir.empty() && fs::path(c.scene_file).is_relative())
      c.scene_file = (fs::path(base_dir) / c.scene_file).string();
  }
  if (auto g = r.child("grid")) {
    Vec3 origin(-6.4, -6.4, -2.4), extent(12.8, 12.8, 6.4);
    double res = 0.2;
    g->vec3("origin", origin);
    g->vec3("extent", extent);
    g->num("resolution", res);
    g->finish();
    try {
      c.grid = GridSpec::make(origin, extent, res);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("grid.resolution", e.what());
    }
  }
  r.u64("seed", c.seed);
  r.str("out", c.out_dir);
  r.integer("progress_every", c.progress_every);

  if (auto s = r.child("init")) {
    s->num("a", c.initial_a);
    s->num("phi_s", c.init.phi_s);
    s->num("phi_d", c.init.phi_d);
    s->num("color", c.init.color);
    s->finish();
  }
  if (auto s = r.child("labels")) {
    s->num("dynamic_confidence", c.labels.dynamic_confidence);
    s->num("static_confidence", c.labels.static_confidence);
    s->finish();
  }
  TrainConfig& t = c.train;
  if (auto s = r.child("weights")) {
    LossWeights& w = t.weights;
    s->num("lambda_sim", w.lambda_sim);
    s->num("lambda_dep", w.lambda_dep);
    s->num("lambda_rgb", w.lambda_rgb);
    s->num("lambda_r", w.lambda_r);
    s->num("lambda_den", w.lambda_den);
    s->num("lambda_e_s", w.lambda_e_s);
    s->num("lambda_e_d", w.lambda_e_d);
    s->num("lambda_H_s", w.lambda_H_s);
    s->num("lambda_H_d", w.lambda_H_d);
    s->num("lambda_H_f", w.lambda_H_f);
    s->num("lambda_s_d", w.lambda_s_d);
    s->finish();
  }
  t.sim.lambda_sim = t.weights.lambda_sim;
  if (auto s = r.child("aggregation")) {
    s->num("lambda_ag", t.agg.lambda_ag);
    s->num("tau", t.agg.sharpness.tau);
    s->flag("static", t.agg.static_enabled);
    s->flag("dynamic", t.agg.dynamic_enabled);
    s->flag("stop_neighbor_grad", t.agg.stop_neighbor_grad);
    s->finish();
  }
  if (auto s = r.child("sim_flow")) {
    s->integer("N", t.sim.N);
    s->num("tau_s", t.sim.tau_s);
    s->num("norm_floor", t.sim.norm_floor);
    s->finish();
  }
  if (auto s = r.child("render")) {
    s->integer("samples_per_ray", t.options.samples_per_ray);
    s->flag("normalize_depth", t.options.normalize_depth);
    s->num("eikonal_eps", t.options.eikonal_eps);
    s->integer("chunk", t.options.chunk);
    s->finish();
  }
  if (auto s = r.child("schedule")) {
    Schedule& sc = t.schedule;
    s->integer("iterations", sc.iterations);
    s->num("lr_grid", sc.lr_grid);
    s->num("lr_log_a", sc.lr_log_a);
    s->num("beta1", sc.beta1);
    s->num("beta2", sc.beta2);
    s->num("eps", sc.eps);
    s->integer("lidar_rays", sc.lidar_rays);
    s->integer("patches", sc.patches);
    s->integer("patch_size", sc.patch_size);
    s->integer("reg_points", sc.reg_points);
    s->integer("surface_points", sc.surface_points);
    s->num("surface_band", sc.surface_band);
    s->integer("K", sc.K);
    s->num("divergence", sc.divergence);
    s->finish();
  }
  if (auto s = r.child("eval")) {
    EvalConfig& e = c.eval;
    s->numbers("thresholds", e.thresholds);
    s->num("mave_threshold", e.mave_threshold);
    s->integer("future_poses", e.future_poses);
    s->integer("azimuths", e.azimuths);
    s->integer("elevations", e.elevations);
    double lo = e.elev_min / kDeg, hi = e.elev_max / kDeg;
    s->num("elev_min_deg", lo);
    s->num("elev_max_deg", hi);
    e.elev_min = lo * kDeg;
    e.elev_max = hi * kDeg;
    s->vec3("sensor_position", e.sensor_position);
    s->integer("samples", e.samples);
    s->ints("frames", e.frames);
    s->finish();
  }
  if (auto s = r.child("ablate")) {
    s->flag("no_ta", c.ablation.no_ta);
    s->flag("no_dyn_ta", c.ablation.no_dyn_ta);
    s->flag("no_sim", c.ablation.no_sim);
    s->flag("single_sdf", c.ablation.single_sdf);
    s->finish();
  }
  r.finish();
  t.schedule.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), fs::path(path).parent_path().string());
}

std::string ExperimentConfig::to_json() const {
  json j;
  const TrainConfig& t = train;
  json scene = {{"file", scene_file}, {"movers", movers}};
  if (frames) scene["frames"] = *frames;
  if (mask_confidence) scene["mask_confidence"] = *mask_confidence;
  if (label_noise) scene["label_noise"] = *label_noise;
  j["scene"] = scene;
  if (grid)
    j["grid"] = {{"origin", vec_json(grid->origin)},
                 {"extent", vec_json(grid->extent)},
                 {"resolution", grid->resolution}};
  j["seed"] = seed;
  j["out"] = out_dir;
  j["progress_every"] = progress_every;
  j["init"] = {{"a", initial_a}, {"phi_s", init.phi_s}, {"phi_d", init.phi_d}, {"color", init.color}};
  j["labels"] = {{"dynamic_confidence", labels.dynamic_confidence},
                 {"static_confidence", labels.static_confidence}};
  const LossWeights& w = t.weights;
  j["weights"] = {{"lambda_sim", w.lambda_sim}, {"lambda_dep", w.lambda_dep},
                  {"lambda_rgb", w.lambda_rgb}, {"lambda_r", w.lambda_r},
                  {"lambda_den", w.lambda_den}, {"lambda_e_s", w.lambda_e_s},
                  {"lambda_e_d", w.lambda_e_d}, {"lambda_H_s", w.lambda_H_s},
                  {"lambda_H_d", w.lambda_H_d}, {"lambda_H_f", w.lambda_H_f},
                  {"lambda_s_d", w.lambda_s_d}};
  j["aggregation"] = {{"lambda_ag", t.agg.lambda_ag},
                      {"tau", t.agg.sharpness.tau},
                      {"static", t.agg.static_enabled},
                      {"dynamic", t.agg.dynamic_enabled},
                      {"stop_neighbor_grad", t.agg.stop_neighbor_grad}};
  j["sim_flow"] = {{"N", t.sim.N}, {"tau_s", t.sim.tau_s}, {"norm_floor", t.sim.norm_floor}};
  j["render"] = {{"samples_per_ray", t.options.samples_per_ray},
                 {"normalize_depth", t.options.normalize_depth},
                 {"eikonal_eps", t.options.eikonal_eps},
                 {"chunk", t.options.chunk}};
  const Schedule& s = t.schedule;
  j["schedule"] = {{"iterations", s.iterations}, {"lr_grid", s.lr_grid},
                   {"lr_log_a", s.lr_log_a},     {"beta1", s.beta1},
                   {"beta2", s.beta2},           {"eps", s.eps},
                   {"lidar_rays", s.lidar_rays}, {"patches", s.patches},
                   {"patch_size", s.patch_size}, {"reg_points", s.reg_points},
                   {"surface_points", s.surface_points}, {"surface_band", s.surface_band},
                   {"K", s.K},                   {"divergence", s.divergence}};
  j["eval"] = {{"thresholds", eval.thresholds},
               {"mave_threshold", eval.mave_threshold},
               {"future_poses", eval.future_poses},
               {"azimuths", eval.azimuths},
               {"elevations", eval.elevations},
               {"elev_min_deg", eval.elev_min / kDeg},
               {"elev_max_deg", eval.elev_max / kDeg},
               {"sensor_position", vec_json(eval.sensor_position)},
               {"samples", eval.samples},
               {"frames", eval.frames}};
  j["ablate"] = {{"no_ta", ablation.no_ta},
                 {"no_dyn_ta", ablation.no_dyn_ta},
                 {"no_sim", ablation.no_sim},
                 {"single_sdf", ablation.single_sdf}};
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  if (!scene_file.empty() && !fs::is_regular_file(scene_file))
    throw ConfigError("scene.file", "no such file '" + scene_file + "'");
  if (movers < 0 || movers > 2) throw ConfigError("scene.movers", "must be 0, 1 or 2");
  if (frames && *frames < 1) throw ConfigError("scene.frames", "must be >= 1");
  if (mask_confidence && !(*mask_confidence >= 0.0 && *mask_confidence <= 1.0))
    throw ConfigError("scene.mask_confidence", "must lie in [0, 1]");
  if (label_noise && !(*label_noise >= 0.0 && *label_noise <= 1.0))
    throw ConfigError("scene.label_noise", "must lie in [0, 1]");
  if (out_dir.empty()) throw ConfigError("out", "must not be empty");
  if (!(initial_a > 0.0) || !std::isfinite(initial_a)) throw ConfigError("init.a", "must be > 0");
  if (!(labels.dynamic_confidence >= 0.0 && labels.dynamic_confidence <= 1.0))
    throw ConfigError("labels.dynamic_confidence", "must lie in [0, 1]");
  if (!(labels.static_confidence >= 0.0 && labels.static_confidence <= labels.dynamic_confidence))
    throw ConfigError("labels.static_confidence", "must lie in [0, labels.dynamic_confidence]");
  if (progress_every < 0) throw ConfigError("progress_every", "must be >= 0");
  checked("weights", [&] { train.weights.validate(); });
  checked("aggregation", [&] {
    if (!(train.agg.lambda_ag >= 0.0 && train.agg.lambda_ag <= 1.0))
      throw ConfigError("aggregation.lambda_ag", "must lie in [0, 1]");
    if (!(train.agg.sharpness.tau > 0.0)) throw ConfigError("aggregation.tau", "must be > 0");
  });
  checked("sim_flow", [&] { train.sim.validate(); });
  checked("schedule", [&] { train.schedule.validate(); });
  checked("eval", [&] { eval.validate(); });
  if (train.options.samples_per_ray < 2) throw ConfigError("render.samples_per_ray", "must be >= 2");
  if (train.options.chunk < 1) throw ConfigError("render.chunk", "must be >= 1");
  if (!(train.options.eikonal_eps >= 0.0)) throw ConfigError("render.eikonal_eps", "must be >= 0");
}

SceneDescription ExperimentConfig::scene() const {
  SceneDescription s = scene_file.empty() ? default_scene(movers) : load_scene(scene_file);
  if (grid) s.volume = *grid;
  if (frames) s.frames = *frames;
  if (mask_confidence) s.mask_confidence = *mask_confidence;
  if (label_noise) s.label_noise = *label_noise;
  s.seed = seed;
  return s;
}

TrainConfig ExperimentConfig::effective_train() const {
  TrainConfig t = train;
  t.schedule.seed = seed;
  t.sim.lambda_sim = t.weights.lambda_sim;
  if (ablation.no_ta) {
    t.agg.static_enabled = false;
    t.agg.dynamic_enabled = false;
  }
  if (ablation.no_dyn_ta) t.agg.dynamic_enabled = false;
  if (ablation.no_sim) t.use_sim = false;
  if (ablation.single_sdf) {
    t.options.single_sdf = true;
    t.use_sim = false;
  }
  t.agg.sharpness.a = initial_a;
  return t;
}

// --- pipeline ------------------------------------------------------------------

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData d;
  d.scene = cfg.scene();
  const SceneOracle oracle = d.scene.oracle();
  BatchOptions opt;
  opt.first_frame = 0;
  opt.frame_count = d.scene.frames;
  opt.seed = cfg.seed;
  opt.label_noise = d.scene.label_noise;
  d.batches = make_batches(oracle, d.scene.rig, opt);
  const MaskSet masks = masks_from_oracle(d.batches, d.scene.mask_confidence);
  d.stats = classify_rays(d.batches, masks, d.scene.rig.cameras, d.scene.volume, cfg.labels);
  spdlog::info("labeled rays: {} static, {} dynamic, {} discarded ({} demoted)",
               d.stats.static_rays, d.stats.dynamic_rays, d.stats.discarded, d.stats.demoted);
  return d;
}

namespace {

std::vector<Pose> poses_of(const SceneDescription& scene) {
  const SceneOracle oracle = scene.oracle();
  std::vector<Pose> poses;
  for (int t = 0; t < scene.frames; ++t) poses.push_back(oracle.pose(t));
  return poses;
}

}  // namespace

void train_fields(const ExperimentConfig& cfg, const PreparedData& data, const Workers& workers,
                  TrainState& state) {
  const TrainConfig tc = cfg.effective_train();
  state = TrainState::init(data.scene.volume, poses_of(data.scene), cfg.init, cfg.initial_a);
  const TrainData td =
      TrainData::from_batches(data.batches, data.scene.rig.cameras, data.scene.frames);
  const int every = cfg.progress_every;
  optimize(state, td, tc, workers, [&](const TraceRow& row) {
    if (every > 0 && (row.iteration % every == 0 || row.iteration + 1 == tc.schedule.iterations))
      spdlog::info("iter {:5d}  t={}  a={:.3f}  L_r={:.5f}  L_sim={:.5f}  total={:.5f}",
                   row.iteration, row.t, row.a, row.terms.raw[kRange], row.terms.raw[kSim],
                   row.terms.total);
  });
}

MetricsReport evaluate_state(const ExperimentConfig& cfg, const SceneDescription& scene,
                             const TrainState& state, const Workers& workers) {
  const TrainConfig tc = cfg.effective_train();
  SharpnessParams sharp = tc.agg.sharpness;
  sharp.a = state.a();
  MetricsReport r =
      evaluate(state.fields, scene.oracle(), cfg.eval, sharp, tc.options.single_sdf, workers);
  r.label = cfg.ablation.label();
  r.scene_id = scene_id(scene);
  r.seed = cfg.seed;
  return r;
}


ExperimentResult run_pipeline(const ExperimentConfig& cfg, const Workers& workers) {
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  ExperimentResult res;
  res.labels = data.stats;
  train_fields(cfg, data, workers, res.state);
  res.report = evaluate_state(cfg, data.scene, res.state, workers);
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Workers& workers) {
  cfg.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const PreparedData data = prepare_data(cfg);
  {
    std::ofstream(out / ArtifactNames::config) << cfg.to_json() << '\n';
    std::ofstream(out / ArtifactNames::scene) << scene_to_json(data.scene) << '\n';
  }
  ExperimentResult res;
  res.labels = data.stats;
  try {
    train_fields(cfg, data, workers, res.state);
  } catch (const std::runtime_error&) {
    write_loss_trace((out / ArtifactNames::loss_trace).string(), res.state.trace);
    throw;
  }
  res.report = evaluate_state(cfg, data.scene, res.state, workers);
  write_loss_trace((out / ArtifactNames::loss_trace).string(), res.state.trace);
  write_metrics_csv((out / ArtifactNames::metrics_csv).string(), {res.report});
  std::ofstream(out / ArtifactNames::metrics_json) << res.report.to_json() << '\n';
  write_checkpoint((out / ArtifactNames::checkpoint).string(), res.state);
  const int t = std::min(data.scene.frames - 1, data.scene.frames / 2);
  write_renders((out / "renders").string(), res.state, data.scene, t, cfg.ablation.single_sdf,
                workers);
  return res;
}

// --- renders -------------------------------------------------------------------

void write_renders(const std::string& dir, const TrainState& state, const SceneDescription& scene,
                   int t, bool single_sdf, const Workers& workers) {
  fs::create_directories(dir);
  const FrameFields& f = state.fields;
  const SceneOracle oracle = scene.oracle();
  AggParams agg;
  agg.sharpness.a = state.a();
  const FieldEval<double> ev(f, agg, nullptr, nullptr, state.a());
  const double far = f.spec.extent.norm();
  const std::string tag = "_t" + std::to_string(t);
  for (std::size_t c = 0; c < scene.rig.cameras.size(); ++c) {
    const PinholeCamera& cam = scene.rig.cameras[c];
    const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
    std::vector<double> depth(n, 0.0), gt_depth(n, 0.0), rgb(3 * n, 0.0);
    workers.run(static_cast<std::size_t>(cam.height), [&](std::size_t v) {
      for (int u = 0; u < cam.width; ++u) {
        const std::size_t i = v * cam.width + u;
        const Vec3 dir = cam.direction(u + 0.5, static_cast<double>(v) + 0.5);
        if (const auto hit = oracle.cast_ray(cam.position, dir, t)) gt_depth[i] = hit->range;
        const RaySamples s = sample_ray(cam.position, dir, f.spec, 128);
        if (s.empty()) continue;
        const auto out = render<double>(
            s,
            [&](const Vec3& p) {
              return single_sdf ? ev.phi_s(t, to_v3(p)) : ev.phi_b(t, to_v3(p));
            },
            [&](const Vec3& p) { return ev.color(t, to_v3(p)); }, state.a());
        depth[i] = out.weight_sum > 0.5 ? out.normalized_depth() : 0.0;
        for (int k = 0; k < 3; ++k) rgb[3 * i + k] = std::clamp(out.color[k], 0.0, 1.0);
      }
    });
    const std::string stem = dir + "/cam" + std::to_string(c) + tag;
    write_pgm(stem + "_depth.pgm", cam.width, cam.height, depth, 0.0, far);
    write_pgm(stem + "_depth_gt.pgm", cam.width, cam.height, gt_depth, 0.0, far);
    write_ppm(stem + "_rgb.ppm", cam.width, cam.height, rgb);
  }

  // Bird's-eye views: flow magnitude and dynamic occupancy, maximized over z.
  const auto& g = f.frames[t];
  const int nx = f.spec.dims[0], ny = f.spec.dims[1], nz = f.spec.dims[2];
  std::vector<double> flow_mag(static_cast<std::size_t>(nx) * ny, 0.0), occ(flow_mag.size(), 0.0);
  double peak = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::size_t px = static_cast<std::size_t>(ny - 1 - j) * nx + i;
      for (int k = 0; k < nz; ++k) {
        const std::size_t idx = f.spec.index(i, j, k);
        const double o = sigmoid_occ<double>(g.phi_d[idx], state.a());
        occ[px] = std::max(occ[px], o);
        if (o > 0.5) flow_mag[px] = std::max(flow_mag[px], g.flow_fwd.at(idx).norm());
      }
      peak = std::max(peak, flow_mag[px]);
    }
  write_pgm(dir + "/bev_flow_fwd" + tag + ".pgm", nx, ny, flow_mag, 0.0, peak > 0.0 ? peak : 1.0);
  write_pgm(dir + "/bev_dynamic_occupancy" + tag + ".pgm", nx, ny, occ, 0.0, 1.0);
}

// --- compare -------------------------------------------------------------------

std::string compare_reports(const std::vector<MetricsReport>& reports, std::string* csv) {
  if (reports.size() < 2) throw std::invalid_argument("compare needs at least two reports");
  const MetricsReport& ref = reports.front();
  for (const auto& r : reports) {
    if (r.scene_id != ref.scene_id)
      throw std::invalid_argument("scene mismatch: " + r.label + " has scene " + r.scene_id +
                                  ", " + ref.label + " has " + ref.scene_id);
    if (r.seed != ref.seed)
      throw std::invalid_argument("seed mismatch: " + r.label + " has seed " +
                                  std::to_string(r.seed) + ", " + ref.label + " has " +
                                  std::to_string(ref.seed));
    if (r.iou.size() != ref.iou.size())
      throw std::invalid_argument("threshold mismatch between " + r.label + " and " + ref.label);
    for (std::size_t i = 0; i < r.iou.size(); ++i)
      if (r.iou[i].threshold != ref.iou[i].threshold)
        throw std::invalid_argument("threshold mismatch between " + r.label + " and " + ref.label);
  }
  auto fmt = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  auto delta = [&](double v, double base) {
    if (std::isnan(v) || std::isnan(base)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.4f", v - base);
    return std::string(buf);
  };
  std::vector<std::string> head = {"variant"};
  for (const auto& c : ref.iou) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "RayIoU@%g", c.threshold);
    head.push_back(buf);
  }
  for (const char* h : {"RayIoU", "mAVE", "EPE3D", "dRayIoU", "dmAVE", "dEPE3D"}) head.push_back(h);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    std::vector<std::string> row = {r.label};
    for (const auto& c : r.iou) row.push_back(fmt(c.iou));
    row.push_back(fmt(r.iou_mean));
    row.push_back(fmt(r.mave));
    row.push_back(fmt(r.epe3d));
    row.push_back(delta(r.iou_mean, ref.iou_mean));
    row.push_back(delta(r.mave, ref.mave));
    row.push_back(delta(r.epe3d, ref.epe3d));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t k = 0; k < head.size(); ++k) {
    width[k] = head[k].size();
    for (const auto& row : rows) width[k] = std::max(width[k], row[k].size());
  }
  std::ostringstream table;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k)
      table << (k ? "  " : "") << std::setw(static_cast<int>(width[k]))
            << (k ? std::right : std::left) << cells[k];
    table << '\n';
  };
  line(head);
  for (const auto& row : rows) line(row);
  if (csv) {
    std::ostringstream c;
    for (std::size_t k = 0; k < head.size(); ++k) c << (k ? "," : "") << head[k];
    c << '\n';
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < row.size(); ++k) c << (k ? "," : "") << row[k];
      c << '\n';
    }
    *csv = c.str();
  }
  return table.str();
}

}  // namespace occflow
