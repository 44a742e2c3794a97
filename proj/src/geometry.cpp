#include "occflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace occflow {

GridSpec GridSpec::make(const Vec3& origin, const Vec3& extent, double resolution) {
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw std::invalid_argument("grid resolution must be > 0");
  GridSpec s;
  s.origin = origin;
  s.extent = extent;
  s.resolution = resolution;
  for (int d = 0; d < 3; ++d) {
    const double n = std::round(extent[d] / resolution);
    if (!(n >= 2.0))
      throw std::invalid_argument("grid axis " + std::to_string(d) +
                                  " needs at least 2 cells (extent/resolution)");
    s.dims[d] = static_cast<int>(n);
  }
  return s;
}

bool GridSpec::contains(const Vec3& x) const {
  const Vec3 hi = upper();
  for (int d = 0; d < 3; ++d)
    if (x[d] < origin[d] || x[d] > hi[d]) return false;
  return true;
}

std::optional<std::array<int, 3>> GridSpec::voxel_of(const Vec3& x) const {
  if (!contains(x)) return std::nullopt;
  std::array<int, 3> v{};
  for (int d = 0; d < 3; ++d)
    v[d] = std::clamp(static_cast<int>(std::floor((x[d] - origin[d]) / resolution)), 0,
                      dims[d] - 1);
  return v;
}

bool GridSpec::operator==(const GridSpec& o) const {
  return origin == o.origin && extent == o.extent && resolution == o.resolution &&
         dims == o.dims;
}

std::optional<std::pair<double, double>> intersect_volume(const GridSpec& spec,
                                                          const Vec3& origin,
                                                          const Vec3& dir) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  const Vec3 hi = spec.upper();
  for (int d = 0; d < 3; ++d) {
    if (dir[d] == 0.0) {
      if (origin[d] < spec.origin[d] || origin[d] > hi[d]) return std::nullopt;
      continue;
    }
    double a = (spec.origin[d] - origin[d]) / dir[d];
    double b = (hi[d] - origin[d]) / dir[d];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

Pose make_pose(const Vec3& translation, double yaw) {
  Pose p = Pose::Identity();
  p.linear() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  p.translation() = translation;
  return p;
}

}  // namespace occflow
