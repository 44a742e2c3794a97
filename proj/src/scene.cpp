#include "occflow/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace occflow {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kHitTolerance = 1e-6;
constexpr int kMaxTraceSteps = 20000;
}  // namespace

double ScenePrimitive::sdf(const Vec3& x, double t) const {
  switch (shape) {
    case Shape::GroundPlane:
      return x.z() - center_at(t).z();
    case Shape::Sphere:
      return (x - center_at(t)).norm() - radius;
    case Shape::Box: {
      const Vec3 q = (x - center_at(t)).cwiseAbs() - half_extents;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
  }
  return std::numeric_limits<double>::infinity();
}

// --- cameras and lidar ------------------------------------------------------

PinholeCamera PinholeCamera::from_fov(int width, int height, double hfov_rad, double yaw,
                                      double pitch, const Vec3& position) {
  PinholeCamera c;
  c.width = width;
  c.height = height;
  c.fx = c.fy = 0.5 * width / std::tan(0.5 * hfov_rad);
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.yaw = yaw;
  c.pitch = pitch;
  c.position = position;
  return c;
}

Mat3 PinholeCamera::ego_from_cam() const {
  Mat3 base;
  // columns: camera x (right), y (down), z (forward) expressed in ego axes
  base << 0, 0, 1,  //
      -1, 0, 0,     //
      0, -1, 0;
  const Mat3 rz = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 ry = Eigen::AngleAxisd(-pitch, Vec3::UnitY()).toRotationMatrix();
  return rz * ry * base;
}

Vec3 PinholeCamera::direction(double px, double py) const {
  const Vec3 d((px - cx) / fx, (py - cy) / fy, 1.0);
  return (ego_from_cam() * d).normalized();
}

std::optional<Vec3> PinholeCamera::project(const Vec3& x_ego) const {
  const Vec3 p = ego_from_cam().transpose() * (x_ego - position);
  if (p.z() <= 1e-9) return std::nullopt;
  return Vec3(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy, p.z());
}

std::vector<Vec3> LidarSpec::directions() const {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(azimuths) * elevations);
  for (int e = 0; e < elevations; ++e) {
    const double el =
        elevations == 1 ? elev_min : elev_min + (elev_max - elev_min) * e / (elevations - 1);
    for (int a = 0; a < azimuths; ++a) {
      const double az = 2.0 * std::numbers::pi * a / azimuths;
      out.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    }
  }
  return out;
}

// --- oracle -----------------------------------------------------------------

SceneOracle::SceneOracle(std::vector<ScenePrimitive> primitives, double frame_dt,
                         const GridSpec& spec, EgoTrajectory ego)
    : primitives_(std::move(primitives)), frame_dt_(frame_dt), spec_(spec), ego_(ego) {
  if (!(frame_dt_ > 0.0)) throw std::invalid_argument("frame_dt must be > 0");
  bool any_static = false;
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    auto& p = primitives_[i];
    if (p.object < 0) p.object = static_cast<int>(i);
    if (!p.dynamic && p.velocity.squaredNorm() > 0.0)
      throw std::invalid_argument("static primitive " + std::to_string(i) + " has a velocity");
    if (p.shape == Shape::Box && !(p.half_extents.minCoeff() > 0.0))
      throw std::invalid_argument("box primitive " + std::to_string(i) + " needs half_extents > 0");
    if (p.shape == Shape::Sphere && !(p.radius > 0.0))
      throw std::invalid_argument("sphere primitive " + std::to_string(i) + " needs radius > 0");
    any_static = any_static || !p.dynamic;
  }
  if (!any_static) throw std::invalid_argument("scene needs at least one static primitive");
}

double SceneOracle::sdf(const Vec3& x_ego, double t) const {
  const Vec3 x = ego_.at(t) * x_ego;
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : primitives_) d = std::min(d, p.sdf(x, t));
  return d;
}

int SceneOracle::nearest_primitive(const Vec3& x_ego, double t) const {
  const Vec3 x = ego_.at(t) * x_ego;
  int best = -1;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    const double di = primitives_[i].sdf(x, t);
    if (di < d) {
      d = di;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::optional<SceneOracle::Hit> SceneOracle::cast_ray(const Vec3& origin, const Vec3& dir,
                                                      double t) const {
  const auto span = intersect_volume(spec_, origin, dir);
  if (!span) return std::nullopt;
  double s = span->first;
  for (int step = 0; step < kMaxTraceSteps && s <= span->second; ++step) {
    const Vec3 p = origin + s * dir;
    const double d = sdf(p, t);
    if (d < kHitTolerance) {
      Hit h;
      h.range = s;
      h.primitive = nearest_primitive(p, t);
      const auto& prim = primitives_[h.primitive];
      h.color = prim.albedo;
      h.dynamic = prim.dynamic;
      h.object = prim.object;
      return h;
    }
    s += d;
  }
  return std::nullopt;
}

bool SceneOracle::inside_dynamic(const Vec3& x_ego, double t) const {
  const Vec3 x = ego_.at(t) * x_ego;
  for (const auto& p : primitives_)
    if (p.dynamic && p.sdf(x, t) < 0.0) return true;
  return false;
}

Vec3 SceneOracle::flow(const Vec3& x_ego, double t, bool forward) const {
  const Pose pose = ego_.at(t);
  const Vec3 x = pose * x_ego;
  for (const auto& p : primitives_) {
    if (p.dynamic && p.sdf(x, t) < 0.0) {
      const Vec3 v = pose.linear().transpose() * p.velocity;
      return forward ? v : Vec3(-v);
    }
  }
  return Vec3::Zero();
}

Vec3 SceneOracle::velocity_mps(int primitive, double t) const {
  return ego_.at(t).linear().transpose() * primitives_.at(primitive).velocity / frame_dt_;
}

double scene_sdf(const SceneOracle& oracle, const Vec3& x, double t) { return oracle.sdf(x, t); }

Vec3 gt_flow(const SceneOracle& oracle, const Vec3& x, double t, FlowDirection dir) {
  return oracle.flow(x, t, dir == FlowDirection::Forward);
}

// --- batches ----------------------------------------------------------------

const char* to_string(RayLabel label) {
  switch (label) {
    case RayLabel::Static: return "static";
    case RayLabel::Dynamic: return "dynamic";
    case RayLabel::Discard: return "discard";
  }
  return "?";
}

namespace {

Ray trace(const SceneOracle& oracle, const Vec3& origin, const Vec3& dir, int frame) {
  Ray r;
  r.origin = origin;
  r.dir = dir;
  if (const auto hit = oracle.cast_ray(origin, dir, frame)) {
    r.gt_range = hit->range;
    r.gt_color = hit->color;
    r.gt_dynamic = hit->dynamic;
    r.gt_object = hit->object;
  } else {
    r.gt_range = kNaN;
  }
  r.label = r.gt_dynamic ? RayLabel::Dynamic : RayLabel::Static;
  return r;
}

}  // namespace

std::vector<RayBatch> make_batches(const SceneOracle& oracle, const SensorRig& rig,
                                   const BatchOptions& opt) {
  if (opt.frame_count <= 0) throw std::invalid_argument("make_batches: empty frame range");
  if (rig.cameras.empty() && !rig.lidar)
    throw std::invalid_argument("make_batches: no sensors configured");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto maybe_flip = [&](Ray& r) {
    if (opt.label_noise > 0.0 && r.hit() && unit(rng) < opt.label_noise)
      r.label = r.label == RayLabel::Dynamic ? RayLabel::Static : RayLabel::Dynamic;
  };

  std::vector<RayBatch> out;
  for (int f = opt.first_frame; f < opt.first_frame + opt.frame_count; ++f) {
    for (std::size_t c = 0; c < rig.cameras.size(); ++c) {
      const auto& cam = rig.cameras[c];
      RayBatch b;
      b.frame = f;
      b.kind = RayKind::Camera;
      b.camera = static_cast<int>(c);
      b.width = cam.width;
      b.height = cam.height;
      b.rays.reserve(static_cast<std::size_t>(cam.width) * cam.height);
      for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u) {
          Ray r = trace(oracle, cam.position, cam.direction(u + 0.5, v + 0.5), f);
          r.pixel_u = u;
          r.pixel_v = v;
          maybe_flip(r);
          b.rays.push_back(r);
        }
      out.push_back(std::move(b));
    }
    if (rig.lidar) {
      RayBatch b;
      b.frame = f;
      b.kind = RayKind::Lidar;
      for (const Vec3& d : rig.lidar->directions()) {
        Ray r = trace(oracle, rig.lidar->position, d, f);
        maybe_flip(r);
        b.rays.push_back(r);
      }
      out.push_back(std::move(b));
    }
  }
  return out;
}

// --- .rays files --------------------------------------------------------------

namespace {
constexpr char kRaysMagic[8] = {'O', 'C', 'C', 'F', 'R', 'A', 'Y', 'S'};
constexpr int kRayFields = 15;
}  // namespace

void write_rays(const std::string& path, const std::vector<RayBatch>& batches) {
  static_assert(std::endian::native == std::endian::little);
  nlohmann::json header;
  header["format"] = "occflow-rays";
  header["version"] = 1;
  header["dtype"] = "float64";
  header["fields"] = {"ox", "oy", "oz", "dx", "dy", "dz", "gt_range", "r", "g", "b",
                      "label", "gt_dynamic", "gt_object", "pixel_u", "pixel_v"};
  auto& jb = header["batches"] = nlohmann::json::array();
  for (const auto& b : batches)
    jb.push_back({{"frame", b.frame},
                  {"kind", b.kind == RayKind::Camera ? "camera" : "lidar"},
                  {"camera", b.camera},
                  {"width", b.width},
                  {"height", b.height},
                  {"count", b.rays.size()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kRaysMagic, 8);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(len));
  for (const auto& b : batches)
    for (const auto& r : b.rays) {
      const double row[kRayFields] = {r.origin.x(),   r.origin.y(),   r.origin.z(),
                                      r.dir.x(),      r.dir.y(),      r.dir.z(),
                                      r.gt_range,     r.gt_color.x(), r.gt_color.y(),
                                      r.gt_color.z(), double(static_cast<int>(r.label)),
                                      r.gt_dynamic ? 1.0 : 0.0,       double(r.gt_object),
                                      double(r.pixel_u),              double(r.pixel_v)};
      out.write(reinterpret_cast<const char*>(row), sizeof row);
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<RayBatch> read_rays(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kRaysMagic, 8) != 0)
    throw std::runtime_error(path + ": not a .rays file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw std::runtime_error(path + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);
  if (header.value("dtype", "") != "float64" || header.at("fields").size() != kRayFields)
    throw std::runtime_error(path + ": unsupported ray layout");

  std::vector<RayBatch> out;
  for (const auto& jb : header.at("batches")) {
    RayBatch b;
    b.frame = jb.at("frame").get<int>();
    b.kind = jb.at("kind").get<std::string>() == "camera" ? RayKind::Camera : RayKind::Lidar;
    b.camera = jb.at("camera").get<int>();
    b.width = jb.at("width").get<int>();
    b.height = jb.at("height").get<int>();
    const auto count = jb.at("count").get<std::size_t>();
    b.rays.resize(count);
    for (auto& r : b.rays) {
      double row[kRayFields];
      in.read(reinterpret_cast<char*>(row), sizeof row);
      if (!in) throw std::runtime_error(path + ": truncated payload");
      r.origin = {row[0], row[1], row[2]};
      r.dir = {row[3], row[4], row[5]};
      r.gt_range = row[6];
      r.gt_color = {row[7], row[8], row[9]};
      r.label = static_cast<RayLabel>(static_cast<int>(row[10]));
      r.gt_dynamic = row[11] != 0.0;
      r.gt_object = static_cast<int>(row[12]);
      r.pixel_u = static_cast<int>(row[13]);
      r.pixel_v = static_cast<int>(row[14]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

// --- scene files --------------------------------------------------------------

namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 vec3_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + "." + key + ": missing");
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number())
    throw std::invalid_argument(where + "." + key + ": expected an array of 3 numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

Vec3 vec3_or(const json& j, const char* key, const Vec3& fallback, const std::string& where) {
  return j.contains(key) ? vec3_field(j, key, where) : fallback;
}

double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw std::invalid_argument(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

SceneDescription scene_from_json(const std::string& text) {
  const json root = json::parse(text);
  if (!root.is_object()) throw std::invalid_argument("scene: expected a JSON object");
  SceneDescription s;

  const json& vol = root.at("volume");
  s.volume = GridSpec::make(vec3_field(vol, "origin", "volume"), vec3_field(vol, "extent", "volume"),
                            number(vol, "resolution", 0.2, "volume"));
  s.frame_dt = number(root, "frame_dt", 0.1, "scene");
  if (!(s.frame_dt > 0.0)) throw std::invalid_argument("scene.frame_dt: must be > 0");
  s.frames = static_cast<int>(number(root, "frames", 6, "scene"));
  if (s.frames < 1) throw std::invalid_argument("scene.frames: must be >= 1");
  s.seed = root.value("seed", std::uint64_t{1});
  s.label_noise = number(root, "label_noise", 0.0, "scene");
  if (s.label_noise < 0.0 || s.label_noise > 1.0)
    throw std::invalid_argument("scene.label_noise: must lie in [0, 1]");
  s.mask_confidence = number(root, "mask_confidence", 0.9, "scene");
  if (s.mask_confidence < 0.0 || s.mask_confidence > 1.0)
    throw std::invalid_argument("scene.mask_confidence: must lie in [0, 1]");

  if (root.contains("ego")) {
    const json& e = root.at("ego");
    s.ego.start = vec3_or(e, "start", Vec3::Zero(), "ego");
    s.ego.velocity = vec3_or(e, "velocity", Vec3::Zero(), "ego");
    s.ego.yaw0 = number(e, "yaw_deg", 0.0, "ego") * kDeg;
    s.ego.yaw_rate = number(e, "yaw_rate_deg", 0.0, "ego") * kDeg;
  }

  if (!root.contains("primitives") || !root.at("primitives").is_array())
    throw std::invalid_argument("scene.primitives: missing or not an array");
  int idx = 0;
  for (const json& jp : root.at("primitives")) {
    const std::string where = "primitives[" + std::to_string(idx++) + "]";
    ScenePrimitive p;
    const std::string shape = jp.value("shape", "");
    if (shape == "box") {
      p.shape = Shape::Box;
      p.center = vec3_field(jp, "center", where);
      p.half_extents = vec3_field(jp, "half_extents", where);
    } else if (shape == "sphere") {
      p.shape = Shape::Sphere;
      p.center = vec3_field(jp, "center", where);
      p.radius = number(jp, "radius", 0.0, where);
    } else if (shape == "plane") {
      p.shape = Shape::GroundPlane;
      p.center = Vec3(0.0, 0.0, number(jp, "height", 0.0, where));
    } else {
      throw std::invalid_argument(where + ".shape: expected box, sphere or plane");
    }
    p.velocity = vec3_or(jp, "velocity", Vec3::Zero(), where);
    p.albedo = vec3_or(jp, "albedo", Vec3::Constant(0.5), where);
    p.dynamic = jp.value("dynamic", false);
    p.object = jp.value("object", -1);
    s.primitives.push_back(p);
  }

  if (root.contains("cameras")) {
    int ci = 0;
    for (const json& jc : root.at("cameras")) {
      const std::string where = "cameras[" + std::to_string(ci++) + "]";
      const int w = static_cast<int>(number(jc, "width", 48, where));
      const int h = static_cast<int>(number(jc, "height", 32, where));
      if (w < 1 || h < 1) throw std::invalid_argument(where + ": width/height must be >= 1");
      const Vec3 pos = vec3_or(jc, "position", Vec3::Zero(), where);
      const double yaw = number(jc, "yaw_deg", 0.0, where) * kDeg;
      const double pitch = number(jc, "pitch_deg", 0.0, where) * kDeg;
      PinholeCamera cam;
      if (jc.contains("fx")) {
        cam.width = w;
        cam.height = h;
        cam.fx = number(jc, "fx", 0, where);
        cam.fy = number(jc, "fy", cam.fx, where);
        cam.cx = number(jc, "cx", 0.5 * w, where);
        cam.cy = number(jc, "cy", 0.5 * h, where);
        cam.yaw = yaw;
        cam.pitch = pitch;
        cam.position = pos;
      } else {
        const double hfov = number(jc, "hfov_deg", 90.0, where);
        if (!(hfov > 0.0 && hfov < 180.0))
          throw std::invalid_argument(where + ".hfov_deg: must lie in (0, 180)");
        cam = PinholeCamera::from_fov(w, h, hfov * kDeg, yaw, pitch, pos);
      }
      if (!(cam.fx > 0.0 && cam.fy > 0.0)) throw std::invalid_argument(where + ".fx: must be > 0");
      s.rig.cameras.push_back(cam);
    }
  }
  if (root.contains("lidar")) {
    const json& jl = root.at("lidar");
    LidarSpec l;
    l.position = vec3_or(jl, "position", Vec3::Zero(), "lidar");
    l.azimuths = static_cast<int>(number(jl, "azimuths", 360, "lidar"));
    l.elevations = static_cast<int>(number(jl, "elevations", 32, "lidar"));
    l.elev_min = number(jl, "elev_min_deg", -40.0, "lidar") * kDeg;
    l.elev_max = number(jl, "elev_max_deg", 5.0, "lidar") * kDeg;
    if (l.azimuths < 1 || l.elevations < 1)
      throw std::invalid_argument("lidar: azimuths and elevations must be >= 1");
    s.rig.lidar = l;
  }
  if (s.rig.cameras.empty() && !s.rig.lidar)
    throw std::invalid_argument("scene: at least one sensor (cameras or lidar) required");
  // Construct once to run the oracle's own checks (static primitive present, ...).
  (void)s.oracle();
  return s;
}

std::string scene_to_json(const SceneDescription& s) {
  json root;
  root["volume"] = {{"origin", to_json(s.volume.origin)},
                    {"extent", to_json(s.volume.extent)},
                    {"resolution", s.volume.resolution}};
  root["frame_dt"] = s.frame_dt;
  root["frames"] = s.frames;
  root["seed"] = s.seed;
  root["label_noise"] = s.label_noise;
  root["mask_confidence"] = s.mask_confidence;
  root["ego"] = {{"start", to_json(s.ego.start)},
                 {"velocity", to_json(s.ego.velocity)},
                 {"yaw_deg", s.ego.yaw0 / kDeg},
                 {"yaw_rate_deg", s.ego.yaw_rate / kDeg}};
  auto& prims = root["primitives"] = json::array();
  for (const auto& p : s.primitives) {
    json jp;
    switch (p.shape) {
      case Shape::Box:
        jp["shape"] = "box";
        jp["center"] = to_json(p.center);
        jp["half_extents"] = to_json(p.half_extents);
        break;
      case Shape::Sphere:
        jp["shape"] = "sphere";
        jp["center"] = to_json(p.center);
        jp["radius"] = p.radius;
        break;
      case Shape::GroundPlane:
        jp["shape"] = "plane";
        jp["height"] = p.center.z();
        break;
    }
    jp["velocity"] = to_json(p.velocity);
    jp["albedo"] = to_json(p.albedo);
    jp["dynamic"] = p.dynamic;
    jp["object"] = p.object;
    prims.push_back(jp);
  }
  auto& cams = root["cameras"] = json::array();
  for (const auto& c : s.rig.cameras)
    cams.push_back({{"width", c.width},
                    {"height", c.height},
                    {"fx", c.fx},
                    {"fy", c.fy},
                    {"cx", c.cx},
                    {"cy", c.cy},
                    {"yaw_deg", c.yaw / kDeg},
                    {"pitch_deg", c.pitch / kDeg},
                    {"position", to_json(c.position)}});
  if (s.rig.lidar) {
    const auto& l = *s.rig.lidar;
    root["lidar"] = {{"position", to_json(l.position)},
                     {"azimuths", l.azimuths},
                     {"elevations", l.elevations},
                     {"elev_min_deg", l.elev_min / kDeg},
                     {"elev_max_deg", l.elev_max / kDeg}};
  }
  return root.dump(2);
}

SceneDescription load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scene file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

SceneDescription default_scene(int movers) {
  SceneDescription s;
  s.volume = GridSpec::make({-6.4, -6.4, -2.4}, {12.8, 12.8, 6.4}, 0.2);
  s.frame_dt = 0.1;
  s.frames = 6;
  s.seed = 1;
  s.ego.velocity = Vec3(0.2, 0.0, 0.0);

  ScenePrimitive ground;
  ground.shape = Shape::GroundPlane;
  ground.center = Vec3(0.0, 0.0, -1.6);
  ground.albedo = Vec3(0.45, 0.45, 0.40);
  s.primitives.push_back(ground);

  ScenePrimitive box_a;
  box_a.center = Vec3(3.2, 2.6, -0.8);
  box_a.half_extents = Vec3(1.0, 0.8, 0.8);
  box_a.albedo = Vec3(0.80, 0.30, 0.20);
  s.primitives.push_back(box_a);

  ScenePrimitive box_b;
  box_b.center = Vec3(-2.2, 3.4, -0.6);
  box_b.half_extents = Vec3(0.7, 1.0, 1.0);
  box_b.albedo = Vec3(0.20, 0.50, 0.80);
  s.primitives.push_back(box_b);

  // Car-shaped movers: a body plus an off-center cabin moving together.
  auto add_car = [&](const Vec3& body_center, const Vec3& velocity, int object, const Vec3& color) {
    const Vec3 heading = velocity.normalized();
    ScenePrimitive body;
    body.center = body_center;
    body.half_extents = heading.x() != 0.0 ? Vec3(0.9, 0.5, 0.35) : Vec3(0.5, 0.9, 0.35);
    body.velocity = velocity;
    body.albedo = color;
    body.dynamic = true;
    body.object = object;
    ScenePrimitive cabin = body;
    cabin.center = body_center - 0.4 * heading + Vec3(0.0, 0.0, 0.6);
    cabin.half_extents = heading.x() != 0.0 ? Vec3(0.4, 0.45, 0.25) : Vec3(0.45, 0.4, 0.25);
    cabin.albedo = Vec3(0.70, 0.70, 0.75);
    s.primitives.push_back(body);
    s.primitives.push_back(cabin);
  };
  if (movers >= 1) add_car({-2.6, -1.8, -1.25}, {0.4, 0.0, 0.0}, 10, {0.90, 0.80, 0.10});
  if (movers >= 2) add_car({1.6, 2.2, -1.25}, {0.0, -0.3, 0.0}, 11, {0.10, 0.80, 0.30});

  for (int c = 0; c < 4; ++c)
    s.rig.cameras.push_back(PinholeCamera::from_fov(48, 32, 90.0 * kDeg, c * 90.0 * kDeg,
                                                    -25.0 * kDeg));
  LidarSpec lidar;
  lidar.azimuths = 360;
  lidar.elevations = 32;
  lidar.elev_min = -40.0 * kDeg;
  lidar.elev_max = 5.0 * kDeg;
  s.rig.lidar = lidar;
  return s;
}

}  // namespace occflow
