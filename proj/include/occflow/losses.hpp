#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occflow/parallel.hpp"
#include "occflow/scene.hpp"
#include "occflow/simflow.hpp"
#include "occflow/temporal.hpp"

namespace occflow {

struct LossWeights {
  double lambda_sim = 100.0;  // L_sim averages over every cell, the mover fills few
  double lambda_dep = 1.0;
  double lambda_rgb = 0.1;
  double lambda_r = 10.0;
  double lambda_den = 1.0;
  double lambda_e_s = 0.1;
  double lambda_e_d = 0.1;
  double lambda_H_s = 0.01;  // 0.1 bends ground surfaces too deep at desk scale
  double lambda_H_d = 0.01;
  double lambda_H_f = 0.002;
  double lambda_s_d = 0.01;

  void validate() const;
};

enum Term : int { kSim, kDep, kRgb, kRange, kDen, kEikS, kEikD, kHessS, kHessD, kHessF, kSparseD, kTermCount };
const char* term_name(int term);

/// Unweighted term values and their weighted sum.
struct LossTerms {
  std::array<double, kTermCount> raw{};
  double total = 0.0;
};

double term_weight(const LossWeights& w, int term);

/// Thrown when a term evaluates to a non-finite value.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int term, double value)
      : std::runtime_error(std::string("non-finite loss term ") + term_name(term) + " = " +
                           std::to_string(value)),
        term_(term) {}
  int term() const { return term_; }

 private:
  int term_;
};

/// Row-major RGB image of one camera at one frame, from its camera batch.
struct Image {
  int width = 0, height = 0;
  std::vector<double> rgb;

  Vec3 at(int u, int v) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(v) * width + u);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

struct ImageSet {
  std::map<std::pair<int, int>, Image> images;  // (frame, camera)

  static ImageSet from_batches(const std::vector<RayBatch>& batches);
  const Image* find(int frame, int camera) const {
    const auto it = images.find({frame, camera});
    return it == images.end() ? nullptr : &it->second;
  }
};

/// Contiguous block of camera rays (row-major) used for D-SSIM windows.
struct Patch {
  int camera = 0;
  int u0 = 0, v0 = 0, size = 0;
  std::vector<Ray> rays;
};

/// Gradient-stopped similarity-flow targets of the current frame.
struct SimTargets {
  VectorGrid3 label_bwd, label_fwd;
  std::vector<double> gate;
};

/// Everything sampled for one iteration at frame t. Ray coordinates are in
/// the ego frame of t.
struct IterationBatch {
  int t = 0;
  std::vector<Ray> static_rays;
  std::vector<Ray> dynamic_rays;
  std::vector<Patch> patches;
  std::vector<Vec3> reg_points;      // uniform over the volume
  std::vector<Vec3> surface_points;  // near dynamic LiDAR endpoints; eikonal and hessians only
  std::optional<SimTargets> sim;
};

struct LossOptions {
  int samples_per_ray = 96;
  bool normalize_depth = false;  // render depth as d_r / sum(w) in the losses
  bool single_sdf = false;       // static field only; no dynamic field, flow or L_sim
  double eikonal_eps = 1e-12;    // inside the gradient-norm square root
  int chunk = 16;                // rays / points per tape
};

struct LossContext {
  const FrameFields* fields = nullptr;
  const ParamLayout* layout = nullptr;
  AggParams agg;
  LossWeights weights;
  SimFlowParams sim;
  LossOptions options;
  const std::vector<PinholeCamera>* cameras = nullptr;
  const ImageSet* images = nullptr;
  const Workers* workers = nullptr;
};

/// Evaluates every term of the objective for one iteration. When `grad` is
/// non-empty (size layout->total()) the gradient of the weighted total with
/// respect to log(a) and to the grids of frames t-1..t+1 is accumulated into it.
/// Throws NonFiniteLoss naming the first non-finite term.
LossTerms total_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                     std::span<double> grad = {});

// Individual terms (unweighted), each optionally accumulating gradient scaled by `scale`.
struct LidarTerms {
  double range = 0.0, density = 0.0;
};
LidarTerms lidar_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                      std::span<double> grad = {}, double scale_range = 1.0,
                      double scale_density = 1.0);
struct PhotoTerms {
  double rgb = 0.0, dep = 0.0;
};
PhotoTerms photo_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                      std::span<double> grad = {}, double scale_rgb = 1.0, double scale_dep = 1.0);
struct RegTerms {
  double eik_s = 0.0, eik_d = 0.0, hess_s = 0.0, hess_d = 0.0, hess_f = 0.0, sparse_d = 0.0;
};
RegTerms reg_loss(const LossContext& ctx, double log_a, const IterationBatch& batch,
                  std::span<double> grad = {}, const LossWeights* scales = nullptr);

/// Reference to the value of flat parameter `id`.
double& param_ref(FrameFields& fields, double& log_a, const ParamLayout& layout, std::uint32_t id);

/// D-SSIM between two 3x3 windows (population statistics, C1 = 0.01^2, C2 = 0.03^2).
double dssim3x3(const std::array<double, 9>& x, const std::array<double, 9>& y);

}  // namespace occflow
