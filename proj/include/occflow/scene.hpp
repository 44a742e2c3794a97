#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "occflow/geometry.hpp"

namespace occflow {

enum class Shape { Box, Sphere, GroundPlane };

/// Analytic scene element. Poses are given at frame 0 in world coordinates
/// and move rigidly with `velocity` (m per frame). A ground plane uses
/// center.z as its height. Primitives sharing `object` form one rigid object
/// (one dynamic mask).
struct ScenePrimitive {
  Shape shape = Shape::Box;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  double radius = 0.5;
  Vec3 velocity = Vec3::Zero();
  Vec3 albedo = Vec3::Constant(0.5);
  bool dynamic = false;
  int object = -1;

  double sdf(const Vec3& x_world, double t) const;
  Vec3 center_at(double t) const { return center + t * velocity; }
};

/// Ego trajectory world_from_ego(t) = translate(start + t * velocity) * yaw(yaw0 + t * yaw_rate).
struct EgoTrajectory {
  Vec3 start = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw0 = 0.0;
  double yaw_rate = 0.0;

  Pose at(double t) const { return make_pose(start + t * velocity, yaw0 + t * yaw_rate); }
};

/// Pinhole camera rigidly mounted on the ego. Camera axes: x right, y down,
/// z forward. Pixel (u, v) has its center at continuous coordinate
/// (u + 0.5, v + 0.5).
struct PinholeCamera {
  int width = 48;
  int height = 32;
  double fx = 24.0, fy = 24.0, cx = 24.0, cy = 16.0;
  Vec3 position = Vec3::Zero();  // in ego coordinates
  double yaw = 0.0;              // radians about ego +z
  double pitch = 0.0;            // radians, negative looks down

  static PinholeCamera from_fov(int width, int height, double hfov_rad, double yaw,
                                double pitch, const Vec3& position = Vec3::Zero());
  Mat3 ego_from_cam() const;
  /// Unit ray direction in ego coordinates through continuous pixel (px, py).
  Vec3 direction(double px, double py) const;
  /// (px, py, depth): continuous pixel coordinates and camera depth of an
  /// ego-frame point; nullopt when the point is behind the camera.
  std::optional<Vec3> project(const Vec3& x_ego) const;
  bool in_image(double px, double py) const {
    return px >= 0.0 && py >= 0.0 && px < width && py < height;
  }
};

struct LidarSpec {
  Vec3 position = Vec3::Zero();  // in ego coordinates
  int azimuths = 360;
  int elevations = 32;
  double elev_min = -0.7;  // radians
  double elev_max = 0.09;

  std::vector<Vec3> directions() const;
};

/// Ground truth answered in the ego coordinates of frame t.
class SceneOracle {
 public:
  struct Hit {
    double range = 0.0;
    Vec3 color = Vec3::Zero();
    bool dynamic = false;
    int primitive = -1;
    int object = -1;
  };

  SceneOracle(std::vector<ScenePrimitive> primitives, double frame_dt, const GridSpec& spec,
              EgoTrajectory ego = {});

  const std::vector<ScenePrimitive>& primitives() const { return primitives_; }
  double frame_dt() const { return frame_dt_; }
  const GridSpec& spec() const { return spec_; }
  const EgoTrajectory& ego() const { return ego_; }
  Pose pose(double t) const { return ego_.at(t); }

  /// Exact signed distance to the union of primitives at frame t.
  double sdf(const Vec3& x_ego, double t) const;
  /// Index of the primitive realizing the minimum distance.
  int nearest_primitive(const Vec3& x_ego, double t) const;
  /// Sphere-traced first hit inside the frame-t volume; nullopt on a miss.
  std::optional<Hit> cast_ray(const Vec3& origin_ego, const Vec3& dir_ego, double t) const;
  /// Per-frame displacement of the dynamic primitive containing x (ego axes
  /// of frame t); zero outside dynamic primitives. Forward = +velocity.
  Vec3 flow(const Vec3& x_ego, double t, bool forward) const;
  /// Velocity (m/s, ego axes of frame t) of a primitive.
  Vec3 velocity_mps(int primitive, double t) const;
  bool inside_dynamic(const Vec3& x_ego, double t) const;

 private:
  std::vector<ScenePrimitive> primitives_;
  double frame_dt_;
  GridSpec spec_;
  EgoTrajectory ego_;
};

double scene_sdf(const SceneOracle& oracle, const Vec3& x, double t);
enum class FlowDirection { Backward, Forward };
Vec3 gt_flow(const SceneOracle& oracle, const Vec3& x, double t, FlowDirection dir);

// --- ray batches ------------------------------------------------------------

enum class RayKind : std::uint8_t { Camera = 0, Lidar = 1 };
enum class RayLabel : std::uint8_t { Static = 0, Dynamic = 1, Discard = 2 };

const char* to_string(RayLabel label);

struct Ray {
  Vec3 origin = Vec3::Zero();  // ego coordinates of the batch frame
  Vec3 dir = Vec3::UnitX();
  double gt_range = 0.0;  // NaN when the ray leaves the volume unhit
  Vec3 gt_color = Vec3::Zero();
  RayLabel label = RayLabel::Static;
  bool gt_dynamic = false;  // exact oracle flag, kept for evaluation
  int gt_object = -1;
  int pixel_u = -1, pixel_v = -1;  // camera rays only

  bool hit() const { return gt_range == gt_range; }
  Vec3 endpoint() const { return origin + gt_range * dir; }
};

struct RayBatch {
  int frame = 0;
  RayKind kind = RayKind::Lidar;
  int camera = -1;  // camera index for camera batches
  int width = 0, height = 0;
  std::vector<Ray> rays;
};

struct SensorRig {
  std::vector<PinholeCamera> cameras;
  std::optional<LidarSpec> lidar;
};

struct BatchOptions {
  int first_frame = 0;
  int frame_count = 1;
  std::uint64_t seed = 0;
  double label_noise = 0.0;  // probability of flipping static <-> dynamic
};

/// Camera batches hold one ray per pixel in row-major order; LiDAR batches
/// follow the lattice order of LidarSpec::directions. Throws on an empty
/// frame range or a rig without sensors.
std::vector<RayBatch> make_batches(const SceneOracle& oracle, const SensorRig& rig,
                                   const BatchOptions& options);

void write_rays(const std::string& path, const std::vector<RayBatch>& batches);
std::vector<RayBatch> read_rays(const std::string& path);

// --- scene description files -------------------------------------------------

struct SceneDescription {
  std::vector<ScenePrimitive> primitives;
  GridSpec volume;
  double frame_dt = 0.1;
  int frames = 6;
  std::uint64_t seed = 1;
  EgoTrajectory ego;
  SensorRig rig;
  double label_noise = 0.0;
  double mask_confidence = 0.9;

  SceneOracle oracle() const { return SceneOracle(primitives, frame_dt, volume, ego); }
};

/// Desk-scale scene: 12.8 x 12.8 x 6.4 m at 0.2 m, a ground plane, two
/// static boxes and `movers` car-shaped movers (0, 1 or 2).
SceneDescription default_scene(int movers = 1);

SceneDescription scene_from_json(const std::string& text);
std::string scene_to_json(const SceneDescription& scene);
SceneDescription load_scene(const std::string& path);

}  // namespace occflow
