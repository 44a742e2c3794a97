#include "occflow/losses.hpp"

#include <algorithm>
#include <cmath>

#include "occflow/render.hpp"

namespace occflow {

using ad::Var;

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {
      {"lambda_sim", lambda_sim}, {"lambda_dep", lambda_dep}, {"lambda_rgb", lambda_rgb},
      {"lambda_r", lambda_r},     {"lambda_den", lambda_den}, {"lambda_e_s", lambda_e_s},
      {"lambda_e_d", lambda_e_d}, {"lambda_H_s", lambda_H_s}, {"lambda_H_d", lambda_H_d},
      {"lambda_H_f", lambda_H_f}, {"lambda_s_d", lambda_s_d}};
  for (const auto& [name, v] : all)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("weights.") + name + " must be finite and >= 0");
}

const char* term_name(int term) {
  static const char* names[kTermCount] = {"L_sim", "L_dep", "L_rgb", "L_r", "L_den", "L_e_s",
                                          "L_e_d", "L_H_s", "L_H_d", "L_H_f", "L_s_d"};
  return term >= 0 && term < kTermCount ? names[term] : "?";
}

double term_weight(const LossWeights& w, int term) {
  switch (term) {
    case kSim: return w.lambda_sim;
    case kDep: return w.lambda_dep;
    case kRgb: return w.lambda_rgb;
    case kRange: return w.lambda_r;
    case kDen: return w.lambda_den;
    case kEikS: return w.lambda_e_s;
    case kEikD: return w.lambda_e_d;
    case kHessS: return w.lambda_H_s;
    case kHessD: return w.lambda_H_d;
    case kHessF: return w.lambda_H_f;
    case kSparseD: return w.lambda_s_d;
  }
  return 0.0;
}

ImageSet ImageSet::from_batches(const std::vector<RayBatch>& batches) {
  ImageSet set;
  for (const auto& b : batches) {
    if (b.kind != RayKind::Camera) continue;
    Image img;
    img.width = b.width;
    img.height = b.height;
    img.rgb.assign(3u * b.width * b.height, 0.0);
    for (const auto& r : b.rays) {
      const std::size_t i = 3 * (static_cast<std::size_t>(r.pixel_v) * b.width + r.pixel_u);
      for (int c = 0; c < 3; ++c) img.rgb[i + c] = r.gt_color[c];
    }
    set.images[{b.frame, b.camera}] = std::move(img);
  }
  return set;
}

double& param_ref(FrameFields& fields, double& log_a, const ParamLayout& layout, std::uint32_t id) {
  if (id == ParamLayout::kLogA) return log_a;
  const std::size_t rel = id - 1;
  const int frame = static_cast<int>(rel / layout.frame_stride());
  std::size_t k = rel % layout.frame_stride();
  auto& g = fields.frames.at(frame);
  const std::size_t n = layout.cells;
  if (k < n) return g.phi_s[k];
  k -= n;
  if (k < n) return g.phi_d[k];
  k -= n;
  if (k < 3 * n) return g.color.values()[k];
  k -= 3 * n;
  if (k < 3 * n) return g.flow_bwd.values()[k];
  k -= 3 * n;
  return g.flow_fwd.values()[k];
}

namespace {

template <class S>
S dssim_window(const std::array<S, 9>& x, const std::array<double, 9>& y) {
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  S mx = S(0.0);
  double my = 0.0;
  for (int i = 0; i < 9; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx = mx * S(1.0 / 9.0);
  my /= 9.0;
  S sxx = S(0.0), sxy = S(0.0);
  double syy = 0.0;
  for (int i = 0; i < 9; ++i) {
    const S dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * S(dy);
    syy += dy * dy;
  }
  sxx = sxx * S(1.0 / 9.0);
  sxy = sxy * S(1.0 / 9.0);
  syy /= 9.0;
  const S num = (S(2.0) * mx * S(my) + S(C1)) * (S(2.0) * sxy + S(C2));
  const S den = (mx * mx + S(my * my + C1)) * (sxx + S(syy + C2));
  return (S(1.0) - num / den) * S(0.5);
}

/// Bilinear lookup at continuous pixel coordinates (pixel centers at +0.5);
/// nullopt outside the region covered by pixel centers.
template <class S>
std::optional<V3<S>> bilinear(const Image& img, const S& px, const S& py) {
  const double gx = ad::value(px) - 0.5, gy = ad::value(py) - 0.5;
  if (!(gx >= 0.0 && gy >= 0.0 && gx <= img.width - 1 && gy <= img.height - 1)) return std::nullopt;
  const int i0 = std::min(static_cast<int>(gx), img.width - 2);
  const int j0 = std::min(static_cast<int>(gy), img.height - 2);
  const double fx = gx - i0, fy = gy - j0;
  const Vec3 c00 = img.at(i0, j0), c10 = img.at(i0 + 1, j0);
  const Vec3 c01 = img.at(i0, j0 + 1), c11 = img.at(i0 + 1, j0 + 1);
  V3<S> out;
  for (int c = 0; c < 3; ++c) {
    const double v = (1 - fx) * (1 - fy) * c00[c] + fx * (1 - fy) * c10[c] +
                     (1 - fx) * fy * c01[c] + fx * fy * c11[c];
    if constexpr (std::is_same_v<S, double>) {
      out[c] = v;
    } else {
      const double dgx = (1 - fy) * (c10[c] - c00[c]) + fy * (c11[c] - c01[c]);
      const double dgy = (1 - fx) * (c01[c] - c00[c]) + fx * (c11[c] - c10[c]);
      ad::Tape* tape = px.tape ? px.tape : py.tape;
      if (!tape) {
        out[c] = Var(v);
        continue;
      }
      tape->edge(px, dgx);
      tape->edge(py, dgy);
      out[c] = tape->finish(v);
    }
  }
  return out;
}

template <class S>
S make_a(ad::Tape* tape, double log_a) {
  const double a = std::exp(log_a);
  if constexpr (std::is_same_v<S, double>) {
    return a;
  } else {
    tape->param_edge(ParamLayout::kLogA, a);
    return tape->finish(a);
  }
}

/// Runs `fn(eval, item) -> std::array<S, K>` over n items in fixed-size
/// chunks. Per-item outputs land in values[item * K + k]; the gradient of
/// sum_k scales[k] * out_k over all items is added to grad.
template <std::size_t K, class Fn>
void run_items(const LossContext& ctx, double log_a, int t, std::size_t n,
               std::span<double> grad, const std::array<double, K>& scales,
               std::vector<double>& values, Fn&& fn) {
  values.assign(n * K, 0.0);
  if (n == 0) return;
  const std::size_t chunk = std::max(1, ctx.options.chunk);
  const std::size_t tasks = (n + chunk - 1) / chunk;
  const bool want_grad = !grad.empty();
  std::vector<ad::GradEntries> sinks(want_grad ? tasks : 0);
  const Workers serial(1);
  const Workers& workers = ctx.workers ? *ctx.workers : serial;
  workers.run(tasks, [&](std::size_t task) {
    const std::size_t lo = task * chunk, hi = std::min(n, lo + chunk);
    if (!want_grad) {
      FieldEval<double> ev(*ctx.fields, ctx.agg, nullptr, nullptr, std::exp(log_a));
      for (std::size_t i = lo; i < hi; ++i) {
        const auto out = fn(ev, i);
        for (std::size_t k = 0; k < K; ++k) values[i * K + k] = out[k];
      }
      return;
    }
    ad::Tape tape;
    FieldEval<Var> ev(*ctx.fields, ctx.agg, &tape, ctx.layout, Var(0.0));
    ev.set_active(t - 1, t + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      tape.clear();
      ev.set_a(make_a<Var>(&tape, log_a));
      const auto out = fn(ev, i);
      Var seeded(0.0);
      for (std::size_t k = 0; k < K; ++k) {
        values[i * K + k] = out[k].v;
        if (scales[k] != 0.0) seeded += Var(scales[k]) * out[k];
      }
      tape.backward(seeded, 1.0, sinks[task]);
    }
  });
  for (const auto& sink : sinks)
    for (const auto& [id, g] : sink) grad[id] += g;
}

double column_mean(const std::vector<double>& values, std::size_t K, std::size_t k,
                   std::size_t count) {
  if (count == 0) return 0.0;
  std::vector<double> col(values.size() / K);
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = values[i * K + k];
  return pairwise_sum(col) / static_cast<double>(count);
}

template <class S>
S rendered_depth(const RenderOut<S>& r, bool normalize) {
  if (!normalize) return r.depth;
  if (ad::value(r.weight_sum) <= 0.0) return S(0.0);
  return r.depth / r.weight_sum;
}

}  // namespace

double dssim3x3(const std::array<double, 9>& x, const std::array<double, 9>& y) {
  return dssim_window<double>(x, y);
}

LidarTerms lidar_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                      std::span<double> grad, double scale_range, double scale_density) {
  const int t = batch.t;
  const int M = ctx.options.samples_per_ray;
  const bool single = ctx.options.single_sdf;
  const std::size_t ns = batch.static_rays.size(), nd = batch.dynamic_rays.size();
  const std::size_t n = ns + nd;
  LidarTerms out;
  if (n == 0) return out;
  const std::size_t n_den = single ? 0 : nd;
  const std::array<double, 2> scales{scale_range / static_cast<double>(n),
                                     n_den ? scale_density / static_cast<double>(n_den) : 0.0};
  std::vector<double> values;
  run_items<2>(ctx, log_a, t, n, grad, scales, values, [&](auto& ev, std::size_t i) {
    using S = std::decay_t<decltype(ev.a())>;
    const bool dynamic = i >= ns;
    const Ray& r = dynamic ? batch.dynamic_rays[i - ns] : batch.static_rays[i];
    std::array<S, 2> res{S(0.0), S(0.0)};
    const RaySamples samples = sample_ray(r.origin, r.dir, ctx.fields->spec, M);
    if (samples.empty()) return res;
    RenderOut<S> rend;
    if (dynamic && !single)
      rend = render<S>(samples, [&](const Vec3& p) { return ev.phi_d_agg(t, to_v3(p)); }, ev.a());
    else
      rend = render<S>(samples, [&](const Vec3& p) { return ev.phi_s_agg(t, to_v3(p)); }, ev.a());
    const S err = rendered_depth(rend, ctx.options.normalize_depth) - S(r.gt_range);
    res[0] = err * err;
    if (dynamic && !single) res[1] = relu(ev.phi_d(t, to_v3(r.endpoint())));
    return res;
  });
  out.range = column_mean(values, 2, 0, n);
  out.density = column_mean(values, 2, 1, n_den);
  return out;
}

PhotoTerms photo_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                      std::span<double> grad, double scale_rgb, double scale_dep) {
  PhotoTerms out;
  const std::size_t np = batch.patches.size();
  if (np == 0 || ctx.cameras == nullptr || ctx.images == nullptr) return out;
  const int t = batch.t;
  const int M = ctx.options.samples_per_ray;
  const bool single = ctx.options.single_sdf;
  const std::array<double, 2> scales{scale_rgb / static_cast<double>(np),
                                     scale_dep / static_cast<double>(np)};
  std::vector<double> values;
  run_items<2>(ctx, log_a, t, np, grad, scales, values, [&](auto& ev, std::size_t pi) {
    using S = std::decay_t<decltype(ev.a())>;
    using std::abs;
    const Patch& patch = batch.patches[pi];
    const int P = patch.size;
    const std::size_t npx = patch.rays.size();
    std::vector<V3<S>> color(npx);
    std::vector<S> depth(npx, S(0.0));
    for (std::size_t q = 0; q < npx; ++q) {
      const Ray& r = patch.rays[q];
      const RaySamples samples = sample_ray(r.origin, r.dir, ctx.fields->spec, M);
      if (samples.empty()) {
        color[q] = {S(0.0), S(0.0), S(0.0)};
        continue;
      }
      const auto phi = [&](const Vec3& p) {
        return single ? ev.phi_s_agg(t, to_v3(p)) : ev.phi_b_agg(t, to_v3(p));
      };
      const auto col = [&](const Vec3& p) { return ev.color(t, to_v3(p)); };
      const RenderOut<S> rend = render<S>(samples, phi, col, ev.a());
      color[q] = rend.color;
      depth[q] = rendered_depth(rend, ctx.options.normalize_depth);
    }

    // L_rgb: 0.85 D-SSIM over interior 3x3 windows + 0.15 L1 over all pixels.
    S l1 = S(0.0);
    for (std::size_t q = 0; q < npx; ++q)
      for (int c = 0; c < 3; ++c) l1 += abs(color[q][c] - S(patch.rays[q].gt_color[c]));
    l1 = l1 * S(1.0 / (3.0 * npx));
    S ds = S(0.0);
    int windows = 0;
    for (int v = 1; v + 1 < P; ++v)
      for (int u = 1; u + 1 < P; ++u)
        for (int c = 0; c < 3; ++c) {
          std::array<S, 9> x;
          std::array<double, 9> y;
          int k = 0;
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du, ++k) {
              const std::size_t q = static_cast<std::size_t>(v + dv) * P + (u + du);
              x[k] = color[q][c];
              y[k] = patch.rays[q].gt_color[c];
            }
          ds += dssim_window<S>(x, y);
          ++windows;
        }
    if (windows > 0) ds = ds * S(1.0 / windows);
    const S rgb = S(0.85) * ds + S(0.15) * l1;

    // L_dep: min over source frames of the warped L1 error, auto-masked.
    const PinholeCamera& cam = (*ctx.cameras)[patch.camera];
    const Image* target = ctx.images->find(t, patch.camera);
    S dep_sum = S(0.0);
    int kept = 0;
    for (std::size_t q = 0; q < npx && target; ++q) {
      const Ray& r = patch.rays[q];
      const Vec3 tgt = r.gt_color;
      const V3<S> point{S(r.origin.x()) + depth[q] * S(r.dir.x()),
                        S(r.origin.y()) + depth[q] * S(r.dir.y()),
                        S(r.origin.z()) + depth[q] * S(r.dir.z())};
      std::optional<S> best;
      double identity = std::numeric_limits<double>::infinity();
      for (int s : {t - 1, t + 1}) {
        const Image* src = ctx.images->find(s, patch.camera);
        if (!src) continue;
        const Vec3 same = src->at(r.pixel_u, r.pixel_v);
        identity = std::min(identity, (same - tgt).cwiseAbs().sum() / 3.0);
        const Mat3 Rc = cam.ego_from_cam().transpose();
        const RigidMap to_cam{Rc, -Rc * cam.position};
        const V3<S> pc = to_cam(ev.map(t, s)(point));
        if (!(ad::value(pc[2]) > 1e-6)) continue;
        const S px = S(cam.fx) * pc[0] / pc[2] + S(cam.cx);
        const S py = S(cam.fy) * pc[1] / pc[2] + S(cam.cy);
        const auto warped = bilinear<S>(*src, px, py);
        if (!warped) continue;
        S err = S(0.0);
        for (int c = 0; c < 3; ++c) err += abs((*warped)[c] - S(tgt[c]));
        err = err * S(1.0 / 3.0);
        if (!best || ad::value(err) < ad::value(*best)) best = err;
      }
      if (!best || identity < ad::value(*best)) continue;
      dep_sum += *best;
      ++kept;
    }
    const S dep = kept > 0 ? dep_sum * S(1.0 / kept) : S(0.0);
    return std::array<S, 2>{rgb, dep};
  });
  out.rgb = column_mean(values, 2, 0, np);
  out.dep = column_mean(values, 2, 1, np);
  return out;
}

RegTerms reg_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                  std::span<double> grad, const LossWeights* w) {
  RegTerms out;
  // Uniform points carry every term; surface points only the smoothness ones.
  const std::size_t nu = batch.reg_points.size();
  const std::size_t n = nu + batch.surface_points.size();
  if (n == 0) return out;
  const int t = batch.t;
  const bool single = ctx.options.single_sdf;
  const double h = ctx.fields->spec.resolution;
  const double inv = 1.0 / static_cast<double>(n);
  const double inv_u = nu ? 1.0 / static_cast<double>(nu) : 0.0;
  const std::array<double, 6> scales =
      w ? std::array<double, 6>{w->lambda_e_s * inv, w->lambda_e_d * inv, w->lambda_H_s * inv,
                                w->lambda_H_d * inv, w->lambda_H_f * inv, w->lambda_s_d * inv_u}
        : std::array<double, 6>{inv, inv, inv, inv, inv, inv_u};
  std::vector<double> values;
  run_items<6>(ctx, log_a, t, n, grad, scales, values, [&](auto& ev, std::size_t i) {
    using S = std::decay_t<decltype(ev.a())>;
    const V3<double> x = to_v3(i < nu ? batch.reg_points[i] : batch.surface_points[i - nu]);
    auto shifted = [&](int axis, double d) {
      V3<double> y = x;
      y[axis] += d;
      return y;
    };
    // Eikonal and hessian of a scalar sampler.
    auto scalar_terms = [&](auto&& field) {
      const S c = field(x);
      S g2 = S(0.0), hess = S(0.0);
      for (int ax = 0; ax < 3; ++ax) {
        const S p = field(shifted(ax, h)), m = field(shifted(ax, -h));
        const S g = (p - m) * S(0.5 / h);
        const S d2 = (p - S(2.0) * c + m) * S(1.0 / (h * h));
        g2 += g * g;
        hess += d2 * d2;
      }
      using std::sqrt;
      const S eik = sqrt(g2 + S(ctx.options.eikonal_eps)) - S(1.0);
      return std::pair<S, S>{eik * eik, hess};
    };
    std::array<S, 6> res{S(0.0), S(0.0), S(0.0), S(0.0), S(0.0), S(0.0)};
    const auto [es, hs] = scalar_terms([&](const V3<double>& y) { return ev.phi_s(t, y); });
    res[0] = es;
    res[2] = hs;
    if (!single) {
      const auto [ed, hd] = scalar_terms([&](const V3<double>& y) { return ev.phi_d(t, y); });
      res[1] = ed;
      res[3] = hd;
      S hf = S(0.0);
      for (bool fwd : {false, true}) {
        const V3<S> c = ev.flow(t, x, fwd);
        for (int ax = 0; ax < 3; ++ax) {
          const V3<S> p = ev.flow(t, shifted(ax, h), fwd), m = ev.flow(t, shifted(ax, -h), fwd);
          for (int k = 0; k < 3; ++k) {
            const S d2 = (p[k] - S(2.0) * c[k] + m[k]) * S(1.0 / (h * h));
            hf += d2 * d2;
          }
        }
      }
      res[4] = hf;
      if (i < nu) res[5] = relu(-ev.phi_d(t, x));
    }
    return res;
  });
  out.eik_s = column_mean(values, 6, 0, n);
  out.eik_d = column_mean(values, 6, 1, n);
  out.hess_s = column_mean(values, 6, 2, n);
  out.hess_d = column_mean(values, 6, 3, n);
  out.hess_f = column_mean(values, 6, 4, n);
  out.sparse_d = column_mean(values, 6, 5, nu);
  return out;
}

LossTerms total_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                     std::span<double> grad) {
  const LossWeights& w = ctx.weights;
  LossTerms terms;
  const LidarTerms lidar = lidar_loss(ctx, log_a, batch, grad, w.lambda_r, w.lambda_den);
  terms.raw[kRange] = lidar.range;
  terms.raw[kDen] = lidar.density;
  const PhotoTerms photo = photo_loss(ctx, log_a, batch, grad, w.lambda_rgb, w.lambda_dep);
  terms.raw[kRgb] = photo.rgb;
  terms.raw[kDep] = photo.dep;
  const RegTerms reg = reg_loss(ctx, log_a, batch, grad, &w);
  terms.raw[kEikS] = reg.eik_s;
  terms.raw[kEikD] = reg.eik_d;
  terms.raw[kHessS] = reg.hess_s;
  terms.raw[kHessD] = reg.hess_d;
  terms.raw[kHessF] = reg.hess_f;
  terms.raw[kSparseD] = reg.sparse_d;
  if (batch.sim && !ctx.options.single_sdf) {
    const auto& g = ctx.fields->frames[batch.t];
    std::span<double> gb, gf;
    if (!grad.empty()) {
      const std::size_t n3 = 3 * ctx.layout->cells;
      gb = grad.subspan(ctx.layout->offset(batch.t, Block::FlowBwd), n3);
      gf = grad.subspan(ctx.layout->offset(batch.t, Block::FlowFwd), n3);
    }
    terms.raw[kSim] = sim_flow_loss(g.flow_bwd, g.flow_fwd, batch.sim->label_bwd,
                                    batch.sim->label_fwd, batch.sim->gate, ctx.sim.tau_s, gb, gf,
                                    w.lambda_sim);
  }
  terms.total = 0.0;
  for (int k = 0; k < kTermCount; ++k) {
    if (!std::isfinite(terms.raw[k])) throw NonFiniteLoss(k, terms.raw[k]);
    terms.total += term_weight(w, k) * terms.raw[k];
  }
  return terms;
}

}  // namespace occflow
