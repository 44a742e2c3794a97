#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occflow/geometry.hpp"
#include "occflow/scene.hpp"

namespace occflow {

/// One instance mask of one camera image at one frame.
struct Mask {
  int frame = 0;
  int camera = 0;
  int instance = 0;
  double confidence = 1.0;
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, nonzero = covered

  bool covers(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height &&
           pixels[static_cast<std::size_t>(v) * width + u] != 0;
  }
};

struct MaskSet {
  std::vector<Mask> masks;
};

/// Exact instance masks from camera batches: one mask per (frame, camera,
/// dynamic object) built from the pixels whose oracle hit is that object.
MaskSet masks_from_oracle(const std::vector<RayBatch>& batches, double confidence);

/// Mask from a PGM image; pixels brighter than mid-gray are covered.
Mask read_mask_pgm(const std::string& path, int frame, int camera, int instance,
                   double confidence);

struct VoxelClusterLabels {
  GridSpec spec;
  std::vector<int> labels;         // per voxel, 0 = empty, components numbered from 1
  std::vector<std::size_t> sizes;  // sizes[label - 1] = voxel count

  int count() const { return static_cast<int>(sizes.size()); }
};

/// 26-connected components of the occupied voxels. Labels follow the scan
/// order (storage order) of each component's first voxel.
VoxelClusterLabels connected_components_3d(const GridSpec& spec,
                                           const std::vector<std::uint8_t>& occupied);

struct LabelThresholds {
  double dynamic_confidence = 0.5;  // mask confidence that marks a dynamic candidate
  double static_confidence = 0.3;   // no mask at or above this -> static
};

struct LabelStats {
  std::size_t static_rays = 0, dynamic_rays = 0, discarded = 0, demoted = 0;
};

/// Relabels LiDAR rays in place from camera masks of the same frame.
/// Endpoints that project into no camera, or rays without a return, are
/// discarded. Candidate dynamic endpoints are voxelized per mask and only the
/// largest 26-connected cluster keeps the dynamic label; the rest become static.
LabelStats classify_rays(std::vector<RayBatch>& batches, const MaskSet& masks,
                         const std::vector<PinholeCamera>& cameras, const GridSpec& spec,
                         const LabelThresholds& thresholds = {});

}  // namespace occflow
