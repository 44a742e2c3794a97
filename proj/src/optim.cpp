#include "occflow/optim.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace occflow {

void Schedule::validate() const {
  if (iterations < 0) throw std::invalid_argument("schedule.iterations must be >= 0");
  if (!(lr_grid >= 0.0)) throw std::invalid_argument("schedule.lr_grid must be >= 0");
  if (!(lr_log_a >= 0.0)) throw std::invalid_argument("schedule.lr_log_a must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("schedule.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("schedule.beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("schedule.eps must be > 0");
  if (lidar_rays < 0) throw std::invalid_argument("schedule.lidar_rays must be >= 0");
  if (patches < 0) throw std::invalid_argument("schedule.patches must be >= 0");
  if (patch_size < 3) throw std::invalid_argument("schedule.patch_size must be >= 3");
  if (reg_points < 0) throw std::invalid_argument("schedule.reg_points must be >= 0");
  if (surface_points < 0) throw std::invalid_argument("schedule.surface_points must be >= 0");
  if (!(surface_band >= 0.0)) throw std::invalid_argument("schedule.surface_band must be >= 0");
  if (K < 1) throw std::invalid_argument("schedule.K must be >= 1");
  if (!(divergence > 0.0)) throw std::invalid_argument("schedule.divergence must be > 0");
}

TrainData TrainData::from_batches(const std::vector<RayBatch>& labeled,
                                  const std::vector<PinholeCamera>& cameras, int frames) {
  TrainData d;
  d.cameras = cameras;
  d.static_pool.resize(frames);
  d.dynamic_pool.resize(frames);
  for (const auto& b : labeled) {
    if (b.frame < 0 || b.frame >= frames) continue;
    if (b.kind == RayKind::Camera) {
      d.camera_batches[{b.frame, b.camera}] = b;
      continue;
    }
    for (const auto& r : b.rays) {
      if (!r.hit()) continue;
      if (r.label == RayLabel::Static) d.static_pool[b.frame].push_back(r);
      else if (r.label == RayLabel::Dynamic) d.dynamic_pool[b.frame].push_back(r);
    }
  }
  d.images = ImageSet::from_batches(labeled);
  return d;
}

TrainState TrainState::init(const GridSpec& spec, const std::vector<Pose>& poses,
                            const FieldInit& field_init, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("initial sharpness must be > 0");
  TrainState s;
  s.fields = FrameFields::make(spec, poses, field_init);
  s.layout.cells = spec.cell_count();
  s.layout.frames = static_cast<int>(poses.size());
  s.log_a = std::log(a);
  s.m.assign(s.layout.total(), 0.0);
  s.v.assign(s.layout.total(), 0.0);
  s.frame_steps.assign(poses.size(), 0);
  return s;
}

std::optional<SimTargets> make_sim_targets(const FrameFields& fields, int t, double a,
                                           const SimFlowParams& p) {
  if (!fields.has(t - 1) || !fields.has(t + 1)) return std::nullopt;
  const GridSpec& spec = fields.spec;
  const auto& cur = fields.frames[t].phi_d;
  const FeatureMap f_cur = build_features(cur, a);
  const FeatureMap f_prev = build_aligned_features(
      fields.frames[t - 1].phi_d, a, RigidMap::between(fields.poses[t], fields.poses[t - 1]));
  const FeatureMap f_next = build_aligned_features(
      fields.frames[t + 1].phi_d, a, RigidMap::between(fields.poses[t], fields.poses[t + 1]));
  SimTargets s;
  s.label_bwd = pseudo_labels(similarity_argmax(f_cur, f_prev, p), spec, p.cell);
  s.label_fwd = pseudo_labels(similarity_argmax(f_cur, f_next, p), spec, p.cell);
  s.gate = sim_gate(cur, a);
  return s;
}

IterationBatch sample_iteration(const TrainState& state, const TrainData& data,
                                const TrainConfig& cfg, std::mt19937_64& rng) {
  const FrameFields& f = state.fields;
  const int F = f.frame_count();
  const Schedule& s = cfg.schedule;
  IterationBatch b;
  // Interior frames, plus edge frames holding dynamic rays: those rays are
  // only ever used when their frame is t.
  std::vector<int> centers;
  for (int u = 0; u < F; ++u)
    if ((u > 0 && u < F - 1) || F < 3 || !data.dynamic_pool.at(u).empty()) centers.push_back(u);
  b.t = centers[std::uniform_int_distribution<std::size_t>(0, centers.size() - 1)(rng)];
  const int t = b.t;

  const auto& dyn_pool = data.dynamic_pool.at(t);
  const int n_dyn = dyn_pool.empty() ? 0 : s.lidar_rays / 2;
  const int n_static = s.lidar_rays - n_dyn;
  std::vector<int> static_frames;
  for (int u = std::max(0, t - s.K + 1); u <= std::min(F - 1, t + s.K - 1); ++u)
    if (!data.static_pool.at(u).empty()) static_frames.push_back(u);
  if (!static_frames.empty()) {
    std::uniform_int_distribution<std::size_t> pick_frame(0, static_frames.size() - 1);
    for (int i = 0; i < n_static; ++i) {
      const int u = static_frames[pick_frame(rng)];
      const auto& pool = data.static_pool[u];
      Ray r = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      const RigidMap m = RigidMap::between(f.poses[u], f.poses[t]);
      r.origin = to_vec3(m(to_v3(r.origin)));
      r.dir = m.R * r.dir;
      b.static_rays.push_back(r);
    }
  }
  for (int i = 0; i < n_dyn; ++i)
    b.dynamic_rays.push_back(
        dyn_pool[std::uniform_int_distribution<std::size_t>(0, dyn_pool.size() - 1)(rng)]);

  if (!data.cameras.empty()) {
    for (int p = 0; p < s.patches; ++p) {
      const int c = std::uniform_int_distribution<int>(0, static_cast<int>(data.cameras.size()) - 1)(rng);
      const auto it = data.camera_batches.find({t, c});
      if (it == data.camera_batches.end()) continue;
      const RayBatch& cb = it->second;
      const int P = std::min({s.patch_size, cb.width, cb.height});
      Patch patch;
      patch.camera = c;
      patch.size = P;
      patch.u0 = std::uniform_int_distribution<int>(0, cb.width - P)(rng);
      patch.v0 = std::uniform_int_distribution<int>(0, cb.height - P)(rng);
      for (int v = 0; v < P; ++v)
        for (int u = 0; u < P; ++u)
          patch.rays.push_back(cb.rays[static_cast<std::size_t>(patch.v0 + v) * cb.width + patch.u0 + u]);
      b.patches.push_back(std::move(patch));
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < s.reg_points; ++i) {
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = f.spec.origin[k] + unit(rng) * f.spec.extent[k];
    b.reg_points.push_back(x);
  }
  std::vector<const Ray*> hits;
  for (const Ray& r : b.dynamic_rays)
    if (r.hit()) hits.push_back(&r);
  if (!hits.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, hits.size() - 1);
    std::uniform_real_distribution<double> offset(-0.5 * s.surface_band, s.surface_band);
    for (int i = 0; i < s.surface_points; ++i) {
      const Ray& r = *hits[pick(rng)];
      const Vec3 x = r.endpoint() + offset(rng) * r.dir;
      if (f.spec.contains(x)) b.surface_points.push_back(x);
    }
  }

  if (cfg.use_sim && !cfg.options.single_sdf && cfg.weights.lambda_sim > 0.0)
    b.sim = make_sim_targets(f, t, state.a(), cfg.sim);
  return b;
}

LossContext make_context(const TrainState& state, const TrainData& data, const TrainConfig& cfg,
                         const Workers& workers) {
  LossContext ctx;
  ctx.fields = &state.fields;
  ctx.layout = &state.layout;
  ctx.agg = cfg.agg;
  ctx.weights = cfg.weights;
  ctx.sim = cfg.sim;
  ctx.options = cfg.options;
  ctx.cameras = &data.cameras;
  ctx.images = &data.images;
  ctx.workers = &workers;
  return ctx;
}

namespace {

void adam_update(double& theta, double& m, double& v, double g, double lr, double b1, double b2,
                 double c1, double c2, double eps) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g * g;
  theta -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
}

}  // namespace

void adam_step(TrainState& state, int t, std::vector<double>& grad, const Schedule& s) {
  const ParamLayout& L = state.layout;
  {
    const int k = ++state.log_a_steps;
    const double c1 = 1.0 - std::pow(s.beta1, k), c2 = 1.0 - std::pow(s.beta2, k);
    adam_update(state.log_a, state.m[0], state.v[0], grad[0], s.lr_log_a, s.beta1, s.beta2, c1,
                c2, s.eps);
    grad[0] = 0.0;
  }
  for (int f = std::max(0, t - 1); f <= std::min(L.frames - 1, t + 1); ++f) {
    const int k = ++state.frame_steps[f];
    const double c1 = 1.0 - std::pow(s.beta1, k), c2 = 1.0 - std::pow(s.beta2, k);
    const std::size_t lo = static_cast<std::size_t>(L.offset(f, Block::PhiS));
    FrameGrids& g = state.fields.frames[f];
    const std::span<double> blocks[5] = {g.phi_s.values(), g.phi_d.values(), g.color.values(),
                                         g.flow_bwd.values(), g.flow_fwd.values()};
    std::size_t idx = lo;
    for (const auto& block : blocks) {
      for (double& theta : block) {
        adam_update(theta, state.m[idx], state.v[idx], grad[idx], s.lr_grid, s.beta1, s.beta2,
                    c1, c2, s.eps);
        grad[idx] = 0.0;
        ++idx;
      }
    }
  }
}

void optimize(TrainState& state, const TrainData& data, const TrainConfig& cfg,
              const Workers& workers, const std::function<void(const TraceRow&)>& progress) {
  cfg.schedule.validate();
  cfg.weights.validate();
  cfg.agg.validate();
  cfg.sim.validate();
  std::mt19937_64 rng(cfg.schedule.seed);
  std::vector<double> grad(state.layout.total(), 0.0);
  const LossContext ctx = make_context(state, data, cfg, workers);
  for (int it = 0; it < cfg.schedule.iterations; ++it) {
    const IterationBatch batch = sample_iteration(state, data, cfg, rng);
    TraceRow row;
    row.iteration = state.iteration;
    row.t = batch.t;
    row.a = state.a();
    row.terms = total_loss(ctx, state.log_a, batch, grad);
    state.trace.push_back(row);
    if (progress) progress(row);
    if (row.terms.total > cfg.schedule.divergence)
      throw DivergenceError("loss diverged at iteration " + std::to_string(row.iteration) +
                            ": total = " + std::to_string(row.terms.total));
    adam_step(state, batch.t, grad, cfg.schedule);
    ++state.iteration;
  }
}

void write_loss_trace(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iteration,t,a";
  for (int k = 0; k < kTermCount; ++k) out << ',' << term_name(k);
  out << ",total\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.t << ',' << num(r.a);
    for (double v : r.terms.raw) out << ',' << num(v);
    out << ',' << num(r.terms.total) << '\n';
  }
}

void write_checkpoint(const std::string& path, const TrainState& state) {
  GridFile file;
  file.spec = state.fields.spec;
  nlohmann::json meta;
  meta["log_a"] = state.log_a;
  meta["a"] = state.a();
  meta["iteration"] = state.iteration;
  meta["log_a_steps"] = state.log_a_steps;
  meta["log_a_moments"] = {state.m[0], state.v[0]};
  meta["frame_steps"] = state.frame_steps;
  auto& poses = meta["poses"] = nlohmann::json::array();
  for (const auto& p : state.fields.poses) {
    std::vector<double> mtx(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) mtx[r * 4 + c] = p.matrix()(r, c);
    poses.push_back(mtx);
  }
  file.meta_json = meta.dump();
  const std::size_t n = state.layout.cells;
  for (int f = 0; f < state.fields.frame_count(); ++f) {
    const auto& g = state.fields.frames[f];
    const std::string pre = "frame" + std::to_string(f) + "/";
    file.entries.push_back({pre + "phi_s", 1, {g.phi_s.values().begin(), g.phi_s.values().end()}});
    file.entries.push_back({pre + "phi_d", 1, {g.phi_d.values().begin(), g.phi_d.values().end()}});
    file.entries.push_back({pre + "color", 3, {g.color.values().begin(), g.color.values().end()}});
    file.entries.push_back(
        {pre + "flow_bwd", 3, {g.flow_bwd.values().begin(), g.flow_bwd.values().end()}});
    file.entries.push_back(
        {pre + "flow_fwd", 3, {g.flow_fwd.values().begin(), g.flow_fwd.values().end()}});
    const auto lo = state.m.begin() + state.layout.offset(f, Block::PhiS);
    file.entries.push_back({pre + "adam_m", 11, {lo, lo + 11 * n}});
    const auto lv = state.v.begin() + state.layout.offset(f, Block::PhiS);
    file.entries.push_back({pre + "adam_v", 11, {lv, lv + 11 * n}});
  }
  write_grid_file(path, file);
}

TrainState read_checkpoint(const std::string& path) {
  const GridFile file = read_grid_file(path);
  const auto meta = nlohmann::json::parse(file.meta_json);
  std::vector<Pose> poses;
  for (const auto& jp : meta.at("poses")) {
    Pose p = Pose::Identity();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) p.matrix()(r, c) = jp.at(r * 4 + c).get<double>();
    poses.push_back(p);
  }
  TrainState s = TrainState::init(file.spec, poses, {}, 1.0);
  s.log_a = meta.at("log_a").get<double>();
  s.iteration = meta.value("iteration", 0);
  s.log_a_steps = meta.value("log_a_steps", 0);
  s.frame_steps = meta.at("frame_steps").get<std::vector<int>>();
  s.m[0] = meta.at("log_a_moments").at(0).get<double>();
  s.v[0] = meta.at("log_a_moments").at(1).get<double>();
  std::map<std::string, const GridEntry*> by_name;
  for (const auto& e : file.entries) by_name[e.name] = &e;
  auto fetch = [&](const std::string& name, std::span<double> dst) {
    const auto it = by_name.find(name);
    if (it == by_name.end() || it->second->values.size() != dst.size())
      throw std::runtime_error(path + ": missing or malformed entry " + name);
    std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
  };
  const std::size_t n = s.layout.cells;
  for (int f = 0; f < s.fields.frame_count(); ++f) {
    auto& g = s.fields.frames[f];
    const std::string pre = "frame" + std::to_string(f) + "/";
    fetch(pre + "phi_s", g.phi_s.values());
    fetch(pre + "phi_d", g.phi_d.values());
    fetch(pre + "color", g.color.values());
    fetch(pre + "flow_bwd", g.flow_bwd.values());
    fetch(pre + "flow_fwd", g.flow_fwd.values());
    const auto off = static_cast<std::size_t>(s.layout.offset(f, Block::PhiS));
    fetch(pre + "adam_m", std::span<double>(s.m).subspan(off, 11 * n));
    fetch(pre + "adam_v", std::span<double>(s.v).subspan(off, 11 * n));
  }
  return s;
}

}  // namespace occflow
