#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace occflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// world_from_ego rigid transform.
using Pose = Eigen::Isometry3d;

/// Axis-aligned voxel volume. Values live at cell centers
/// origin + (i + 0.5) * resolution; storage is x-major, then y, then z.
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 extent = Vec3::Ones();
  double resolution = 0.5;
  std::array<int, 3> dims{2, 2, 2};

  /// Derives dims = round(extent / resolution); throws std::invalid_argument
  /// when resolution <= 0 or any axis ends up with fewer than two cells.
  static GridSpec make(const Vec3& origin, const Vec3& extent, double resolution);

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  std::array<int, 3> unravel(std::size_t idx) const {
    const int k = static_cast<int>(idx % dims[2]);
    const std::size_t ij = idx / dims[2];
    return {static_cast<int>(ij / dims[1]), static_cast<int>(ij % dims[1]), k};
  }
  Vec3 cell_center(int i, int j, int k) const {
    return origin + resolution * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  Vec3 upper() const { return origin + extent; }
  bool contains(const Vec3& x) const;
  /// Voxel containing x, or nullopt outside the volume.
  std::optional<std::array<int, 3>> voxel_of(const Vec3& x) const;

  bool operator==(const GridSpec& o) const;
};

/// Slab test against the volume box. Returns [t_enter, t_exit] along the ray
/// with t_enter clamped to 0 when the origin is inside; nullopt on a miss.
std::optional<std::pair<double, double>> intersect_volume(const GridSpec& spec,
                                                          const Vec3& origin,
                                                          const Vec3& dir);

/// Pose from a translation and a yaw about +z (radians).
Pose make_pose(const Vec3& translation, double yaw = 0.0);

}  // namespace occflow
