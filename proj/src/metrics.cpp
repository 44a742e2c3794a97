#include "occflow/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "occflow/render.hpp"

namespace occflow {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_num(const std::string& s) {
  if (s == "nan") return kNaN;
  return std::stod(s);
}

std::string thr_name(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}
}  // namespace

void EvalConfig::validate() const {
  if (thresholds.empty()) throw std::invalid_argument("eval.thresholds must not be empty");
  for (double t : thresholds)
    if (!(t > 0.0)) throw std::invalid_argument("eval.thresholds must be > 0");
  if (!(mave_threshold > 0.0)) throw std::invalid_argument("eval.mave_threshold must be > 0");
  if (future_poses < 0) throw std::invalid_argument("eval.future_poses must be >= 0");
  if (azimuths < 1 || elevations < 1)
    throw std::invalid_argument("eval.azimuths and eval.elevations must be >= 1");
  if (samples < 2) throw std::invalid_argument("eval.samples must be >= 2");
}

bool is_true_positive(const RayOutcome& r, double threshold) {
  return r.gt_hit && r.pred_hit && std::abs(r.pred_depth - r.gt_depth) < threshold;
}

std::vector<ThresholdCounts> ray_iou(const std::vector<RayOutcome>& rays,
                                     const std::vector<double>& thresholds) {
  std::vector<ThresholdCounts> out;
  for (double thr : thresholds) {
    ThresholdCounts c;
    c.threshold = thr;
    for (const auto& r : rays) {
      if (is_true_positive(r, thr)) {
        ++c.tp;
        continue;
      }
      if (r.pred_hit) ++c.fp;
      if (r.gt_hit) ++c.fn;
    }
    const std::size_t denom = c.tp + c.fp + c.fn;
    c.iou = denom ? static_cast<double>(c.tp) / static_cast<double>(denom) : kNaN;
    out.push_back(c);
  }
  return out;
}

double mave(const std::vector<const VectorGrid3*>& flows, const SceneOracle& oracle,
            const std::vector<RayOutcome>& rays, double threshold) {
  std::vector<double> errs;
  for (const auto& r : rays) {
    if (!r.gt_dynamic || !is_true_positive(r, threshold)) continue;
    const VectorGrid3* flow = flows.at(r.frame);
    if (!flow) continue;
    const Vec3 f = flow->sample(r.origin + r.pred_depth * r.dir);
    const Vec3 v = oracle.velocity_mps(r.gt_primitive, r.frame);
    errs.push_back((f / oracle.frame_dt() - v).norm());
  }
  if (errs.empty()) {
    spdlog::warn("mAVE: no dynamic true positives");
    return kNaN;
  }
  return pairwise_sum(errs) / static_cast<double>(errs.size());
}

double epe3d(const VectorGrid3& pred_flow, const SceneOracle& oracle,
             const std::vector<Vec3>& points, int frame) {
  if (points.empty()) return kNaN;
  std::vector<double> errs;
  errs.reserve(points.size());
  for (const auto& x : points)
    errs.push_back((pred_flow.sample(x) - oracle.flow(x, frame, true)).norm());
  return pairwise_sum(errs) / static_cast<double>(errs.size());
}

std::vector<Vec3> dynamic_points(const SceneOracle& oracle, const GridSpec& spec, int frame) {
  std::vector<Vec3> pts;
  for (int i = 0; i < spec.dims[0]; ++i)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int k = 0; k < spec.dims[2]; ++k) {
        const Vec3 x = spec.cell_center(i, j, k);
        if (oracle.inside_dynamic(x, frame)) pts.push_back(x);
      }
  return pts;
}

std::vector<RayOutcome> trace_eval_rays(const FrameFields& fields, const SceneOracle& oracle,
                                        const EvalConfig& cfg, int frame,
                                        const SharpnessParams& sharp, bool single_sdf,
                                        const Workers& workers) {
  LidarSpec lattice;
  lattice.azimuths = cfg.azimuths;
  lattice.elevations = cfg.elevations;
  lattice.elev_min = cfg.elev_min;
  lattice.elev_max = cfg.elev_max;
  const std::vector<Vec3> dirs = lattice.directions();
  const std::size_t per_pose = dirs.size();
  const int poses = cfg.future_poses + 1;
  std::vector<RayOutcome> out(per_pose * poses);
  const Pose cur_inv = oracle.pose(frame).inverse();
  AggParams agg;
  agg.sharpness = sharp;
  const FieldEval<double> ev(fields, agg, nullptr, nullptr, sharp.a);
  workers.run(static_cast<std::size_t>(poses), [&](std::size_t j) {
    const Pose rel = cur_inv * oracle.pose(frame + static_cast<double>(j));
    const Vec3 origin = rel * cfg.sensor_position;
    for (std::size_t d = 0; d < per_pose; ++d) {
      RayOutcome& r = out[j * per_pose + d];
      r.frame = frame;
      r.origin = origin;
      r.dir = rel.linear() * dirs[d];
      if (const auto hit = oracle.cast_ray(r.origin, r.dir, frame)) {
        r.gt_hit = true;
        r.gt_depth = hit->range;
        r.gt_dynamic = hit->dynamic;
        r.gt_primitive = hit->primitive;
      }
      const RaySamples samples = sample_ray(r.origin, r.dir, fields.spec, cfg.samples);
      if (samples.empty()) continue;
      const auto rend = render<double>(
          samples,
          [&](const Vec3& p) {
            return single_sdf ? ev.phi_s(frame, to_v3(p)) : ev.phi_b(frame, to_v3(p));
          },
          sharp.a);
      r.pred_hit = rend.weight_sum > 0.5;
      r.pred_depth = rend.normalized_depth();
    }
  });
  return out;
}

MetricsReport evaluate(const FrameFields& fields, const SceneOracle& oracle, const EvalConfig& cfg,
                       const SharpnessParams& sharp, bool single_sdf, const Workers& workers) {
  cfg.validate();
  std::vector<int> frames = cfg.frames;
  if (frames.empty())
    for (int t = 1; t + 1 < fields.frame_count(); ++t) frames.push_back(t);
  if (frames.empty()) frames.push_back(0);

  std::vector<RayOutcome> rays;
  std::vector<double> epe, epe_zero;
  std::vector<const VectorGrid3*> flows(fields.frame_count(), nullptr);
  VectorGrid3 zero(fields.spec);
  std::vector<const VectorGrid3*> zeros(fields.frame_count(), &zero);
  for (int t : frames) {
    if (!fields.has(t)) throw std::invalid_argument("eval.frames: frame out of range");
    const auto r = trace_eval_rays(fields, oracle, cfg, t, sharp, single_sdf, workers);
    rays.insert(rays.end(), r.begin(), r.end());
    flows[t] = &fields.frames[t].flow_fwd;
    const auto pts = dynamic_points(oracle, fields.spec, t);
    for (const auto& x : pts) {
      epe.push_back((fields.frames[t].flow_fwd.sample(x) - oracle.flow(x, t, true)).norm());
      epe_zero.push_back(oracle.flow(x, t, true).norm());
    }
  }
  MetricsReport rep;
  rep.rays = rays.size();
  rep.iou = ray_iou(rays, cfg.thresholds);
  double s = 0.0;
  for (const auto& c : rep.iou) s += c.iou;
  rep.iou_mean = s / static_cast<double>(rep.iou.size());
  rep.mave = mave(flows, oracle, rays, cfg.mave_threshold);
  rep.zero_flow_mave = mave(zeros, oracle, rays, cfg.mave_threshold);
  rep.epe3d = epe.empty() ? kNaN : pairwise_sum(epe) / static_cast<double>(epe.size());
  rep.zero_flow_epe3d =
      epe_zero.empty() ? kNaN : pairwise_sum(epe_zero) / static_cast<double>(epe_zero.size());
  return rep;
}

// --- serialization ------------------------------------------------------------

std::string MetricsReport::csv_header() const {
  std::string h = "label,scene_id,seed,rays";
  for (const auto& c : iou) h += ",iou@" + thr_name(c.threshold);
  h += ",iou_mean,mave,epe3d,zero_flow_mave,zero_flow_epe3d";
  for (const auto& c : iou) {
    const std::string t = thr_name(c.threshold);
    h += ",tp@" + t + ",fp@" + t + ",fn@" + t;
  }
  return h;
}

std::string MetricsReport::csv_row() const {
  std::string r = label + "," + scene_id + "," + std::to_string(seed) + "," + std::to_string(rays);
  for (const auto& c : iou) r += "," + num(c.iou);
  r += "," + num(iou_mean) + "," + num(mave) + "," + num(epe3d) + "," + num(zero_flow_mave) + "," +
       num(zero_flow_epe3d);
  for (const auto& c : iou)
    r += "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.fn);
  return r;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("write_metrics_csv: no reports");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << reports.front().csv_header() << '\n';
  for (const auto& r : reports) out << r.csv_row() << '\n';
}

namespace {
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}
}  // namespace

std::vector<MetricsReport> MetricsReport::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty metrics file");
  const auto header = split(line);
  std::vector<double> thresholds;
  for (const auto& h : header)
    if (h.rfind("iou@", 0) == 0) thresholds.push_back(std::stod(h.substr(4)));
  std::vector<MetricsReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ": row has " + std::to_string(cells.size()) +
                               " fields, header has " + std::to_string(header.size()));
    MetricsReport r;
    r.iou.resize(thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i) r.iou[i].threshold = thresholds[i];
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string& h = header[c];
      const std::string& v = cells[c];
      auto thr_index = [&](std::size_t prefix) {
        const double t = std::stod(h.substr(prefix));
        for (std::size_t i = 0; i < thresholds.size(); ++i)
          if (thresholds[i] == t) return i;
        throw std::runtime_error(path + ": unknown threshold column " + h);
      };
      if (h == "label") r.label = v;
      else if (h == "scene_id") r.scene_id = v;
      else if (h == "seed") r.seed = std::stoull(v);
      else if (h == "rays") r.rays = std::stoull(v);
      else if (h == "iou_mean") r.iou_mean = parse_num(v);
      else if (h == "mave") r.mave = parse_num(v);
      else if (h == "epe3d") r.epe3d = parse_num(v);
      else if (h == "zero_flow_mave") r.zero_flow_mave = parse_num(v);
      else if (h == "zero_flow_epe3d") r.zero_flow_epe3d = parse_num(v);
      else if (h.rfind("iou@", 0) == 0) r.iou[thr_index(4)].iou = parse_num(v);
      else if (h.rfind("tp@", 0) == 0) r.iou[thr_index(3)].tp = std::stoull(v);
      else if (h.rfind("fp@", 0) == 0) r.iou[thr_index(3)].fp = std::stoull(v);
      else if (h.rfind("fn@", 0) == 0) r.iou[thr_index(3)].fn = std::stoull(v);
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {
nlohmann::json jnum(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
double from_jnum(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }
}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["label"] = label;
  j["scene_id"] = scene_id;
  j["seed"] = seed;
  j["rays"] = rays;
  auto& arr = j["ray_iou"] = nlohmann::json::array();
  for (const auto& c : iou)
    arr.push_back({{"threshold", c.threshold}, {"iou", jnum(c.iou)}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}});
  j["iou_mean"] = jnum(iou_mean);
  j["mave"] = jnum(mave);
  j["epe3d"] = jnum(epe3d);
  j["zero_flow_mave"] = jnum(zero_flow_mave);
  j["zero_flow_epe3d"] = jnum(zero_flow_epe3d);
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.label = j.at("label").get<std::string>();
  r.scene_id = j.at("scene_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.rays = j.at("rays").get<std::size_t>();
  for (const auto& c : j.at("ray_iou")) {
    ThresholdCounts t;
    t.threshold = c.at("threshold").get<double>();
    t.iou = from_jnum(c.at("iou"));
    t.tp = c.at("tp").get<std::size_t>();
    t.fp = c.at("fp").get<std::size_t>();
    t.fn = c.at("fn").get<std::size_t>();
    r.iou.push_back(t);
  }
  r.iou_mean = from_jnum(j.at("iou_mean"));
  r.mave = from_jnum(j.at("mave"));
  r.epe3d = from_jnum(j.at("epe3d"));
  r.zero_flow_mave = from_jnum(j.at("zero_flow_mave"));
  r.zero_flow_epe3d = from_jnum(j.at("zero_flow_epe3d"));
  return r;
}

std::string MetricsReport::pretty() const {
  std::ostringstream os;
  os << "variant " << label << " (" << rays << " rays)\n";
  for (const auto& c : iou)
    os << "  RayIoU@" << thr_name(c.threshold) << "m  " << num(c.iou) << "  (TP " << c.tp << ", FP "
       << c.fp << ", FN " << c.fn << ")\n";
  os << "  RayIoU mean   " << num(iou_mean) << "\n";
  os << "  mAVE          " << num(mave) << " m/s (zero flow " << num(zero_flow_mave) << ")\n";
  os << "  EPE3D         " << num(epe3d) << " m (zero flow " << num(zero_flow_epe3d) << ")\n";
  return os.str();
}

}  // namespace occflow
