#include "occflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace occflow {

const char* block_name(const ParamLayout& layout, std::uint32_t id) {
  if (id == ParamLayout::kLogA) return "log_a";
  const std::size_t k = (id - 1) % layout.frame_stride();
  const std::size_t n = layout.cells;
  if (k < n) return "phi_s";
  if (k < 2 * n) return "phi_d";
  if (k < 5 * n) return "color";
  if (k < 8 * n) return "flow_bwd";
  return "flow_fwd";
}

GradCheckProblem GradCheckProblem::make(const GradCheckOptions& opt) {
  const double res = 0.2;
  const double L = res * opt.cells;
  const GridSpec spec = GridSpec::make(Vec3::Zero(), Vec3::Constant(L), res);
  std::vector<Pose> poses;
  for (int t = 0; t < 3; ++t) poses.push_back(make_pose(Vec3(0.03 * t, 0.01 * t, 0.0), 0.02 * t));

  GradCheckProblem p;
  p.state = TrainState::init(spec, poses, {}, 8.0);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 mid = Vec3::Constant(0.5 * L);
  for (int t = 0; t < 3; ++t) {
    FrameGrids& g = p.state.fields.frames[t];
    const Vec3 center = mid + Vec3(0.05 * (t - 1), 0.0, 0.0);
    for (int i = 0; i < spec.dims[0]; ++i)
      for (int j = 0; j < spec.dims[1]; ++j)
        for (int k = 0; k < spec.dims[2]; ++k) {
          const std::size_t idx = spec.index(i, j, k);
          const Vec3 x = spec.cell_center(i, j, k);
          g.phi_s[idx] = (x.z() - 0.3 * L) + 0.05 * noise(rng);
          g.phi_d[idx] = (x - center).norm() - 0.22 * L + 0.05 * noise(rng);
          g.color.set(idx, Vec3(0.2 + 0.6 * unit(rng), 0.2 + 0.6 * unit(rng), 0.2 + 0.6 * unit(rng)));
          g.flow_bwd.set(idx, Vec3(-0.05, 0.0, 0.0) + 0.02 * Vec3(noise(rng), noise(rng), noise(rng)));
          g.flow_fwd.set(idx, Vec3(0.05, 0.0, 0.0) + 0.02 * Vec3(noise(rng), noise(rng), noise(rng)));
        }
  }

  p.options.samples_per_ray = 32;
  p.options.chunk = 4;
  p.sim.cell = res;
  p.agg.sharpness.a = p.state.a();

  IterationBatch& b = p.batch;
  b.t = 1;
  auto random_ray = [&](const Vec3& target) {
    Ray r;
    r.origin = Vec3(L * unit(rng), L * unit(rng), 0.95 * L);
    r.dir = (target - r.origin).normalized();
    r.gt_range = (target - r.origin).norm() * (0.8 + 0.4 * unit(rng));
    return r;
  };
  for (int i = 0; i < 12; ++i)
    b.static_rays.push_back(random_ray(Vec3(L * unit(rng), L * unit(rng), 0.3 * L)));
  for (int i = 0; i < 6; ++i) {
    Ray r = random_ray(mid + 0.1 * L * Vec3(noise(rng), noise(rng), noise(rng)));
    r.label = RayLabel::Dynamic;
    b.dynamic_rays.push_back(r);
  }

  const int W = 8;
  p.cameras.push_back(PinholeCamera::from_fov(W, W, 1.5707963267948966, 0.0, -0.5,
                                              Vec3(0.05 * L, 0.5 * L, 0.8 * L)));
  for (int t = 0; t < 3; ++t) {
    Image img;
    img.width = img.height = W;
    img.rgb.resize(3 * W * W);
    for (double& c : img.rgb) c = unit(rng);
    p.images.images[{t, 0}] = std::move(img);
  }
  const PinholeCamera& cam = p.cameras[0];
  Patch patch;
  patch.camera = 0;
  patch.size = 4;
  patch.u0 = patch.v0 = 2;
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) {
      Ray r;
      r.pixel_u = patch.u0 + u;
      r.pixel_v = patch.v0 + v;
      r.origin = cam.position;
      r.dir = cam.direction(r.pixel_u + 0.5, r.pixel_v + 0.5);
      r.gt_color = p.images.find(1, 0)->at(r.pixel_u, r.pixel_v);
      patch.rays.push_back(r);
    }
  b.patches.push_back(std::move(patch));

  for (int i = 0; i < 16; ++i)
    b.reg_points.push_back(Vec3(L * unit(rng), L * unit(rng), L * unit(rng)));
  // A few inside the dynamic blob so the sparsity term is active.
  for (int i = 0; i < 4; ++i)
    b.reg_points.push_back(mid + 0.08 * L * Vec3(noise(rng), noise(rng), noise(rng)));
  for (int i = 0; i < 4; ++i) b.surface_points.push_back(b.static_rays[i].endpoint());
  b.sim = make_sim_targets(p.state.fields, 1, p.state.a(), p.sim);
  return p;
}

LossContext GradCheckProblem::context(const Workers& workers) const {
  LossContext ctx;
  ctx.fields = &state.fields;
  ctx.layout = &state.layout;
  ctx.agg = agg;
  ctx.weights = weights;
  ctx.sim = sim;
  ctx.options = options;
  ctx.cameras = &cameras;
  ctx.images = &images;
  ctx.workers = &workers;
  return ctx;
}

GradCheckResult gradient_check(const GradCheckOptions& opt, const Workers& workers) {
  GradCheckProblem p = GradCheckProblem::make(opt);
  const LossContext ctx = p.context(workers);
  std::vector<double> grad(p.state.layout.total(), 0.0);
  GradCheckResult res;
  res.terms = total_loss(ctx, p.state.log_a, p.batch, grad);

  std::vector<std::uint32_t> touched;
  for (std::uint32_t id = 1; id < grad.size(); ++id)
    if (grad[id] != 0.0) touched.push_back(id);
  std::mt19937_64 rng(opt.seed + 1);
  std::shuffle(touched.begin(), touched.end(), rng);
  std::vector<std::uint32_t> ids = {ParamLayout::kLogA};
  for (std::size_t i = 0; i < touched.size() && static_cast<int>(ids.size()) < opt.params; ++i)
    ids.push_back(touched[i]);

  for (const std::uint32_t id : ids) {
    double& theta = param_ref(p.state.fields, p.state.log_a, p.state.layout, id);
    const double orig = theta;
    theta = orig + opt.step;
    const double up = total_loss(ctx, p.state.log_a, p.batch).total;
    theta = orig - opt.step;
    const double down = total_loss(ctx, p.state.log_a, p.batch).total;
    theta = orig;
    GradCheckEntry e;
    e.id = id;
    e.block = block_name(p.state.layout, id);
    e.analytic = grad[id];
    e.numeric = (up - down) / (2.0 * opt.step);
    const double scale = std::max({std::abs(e.analytic), std::abs(e.numeric), opt.floor});
    e.rel_error = std::abs(e.analytic - e.numeric) / scale;
    const bool flow = e.block.rfind("flow", 0) == 0;
    e.pass = e.rel_error < (flow ? opt.flow_tolerance : opt.tolerance);
    if (flow) res.max_rel_error_flow = std::max(res.max_rel_error_flow, e.rel_error);
    else res.max_rel_error = std::max(res.max_rel_error, e.rel_error);
    res.entries.push_back(e);
  }
  res.pass = std::all_of(res.entries.begin(), res.entries.end(), [](const auto& e) { return e.pass; }) &&
             static_cast<int>(res.entries.size()) == opt.params;
  return res;
}

}  // namespace occflow
