#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "occflow/field.hpp"
#include "occflow/parallel.hpp"
#include "occflow/scene.hpp"
#include "occflow/temporal.hpp"

namespace occflow {

struct EvalConfig {
  std::vector<double> thresholds{0.25, 0.5, 1.0};  // m
  double mave_threshold = 2.0;                      // m
  int future_poses = 8;                             // besides the current pose
  int azimuths = 120;
  int elevations = 12;
  double elev_min = -0.6981317007977318;  // -40 deg
  double elev_max = 0.08726646259971647;  // 5 deg
  Vec3 sensor_position = Vec3::Zero();    // in ego coordinates
  int samples = 256;
  std::vector<int> frames;  // empty: every frame with both neighbors

  void validate() const;
};

/// Evaluation ray with its ground truth and prediction.
struct RayOutcome {
  Vec3 origin = Vec3::Zero(), dir = Vec3::UnitX();
  bool gt_hit = false, pred_hit = false;
  double gt_depth = 0.0, pred_depth = 0.0;
  bool gt_dynamic = false;
  int gt_primitive = -1;
  int frame = 0;
};

struct ThresholdCounts {
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double iou = 0.0;  // NaN when tp + fp + fn = 0
};

/// TP: both hit and |d_pred - d_gt| < threshold; FP: prediction hits and not
/// TP; FN: ground truth hits and not TP. Rays where both miss are ignored.
bool is_true_positive(const RayOutcome& r, double threshold);
std::vector<ThresholdCounts> ray_iou(const std::vector<RayOutcome>& rays,
                                     const std::vector<double>& thresholds);

/// Mean |f_pred / frame_dt - v_gt| over true positives (at `threshold`) whose
/// ground-truth hit is dynamic. Forward flow of the ray's frame is sampled at
/// the predicted endpoint. NaN when no ray qualifies.
double mave(const std::vector<const VectorGrid3*>& pred_flow_per_frame, const SceneOracle& oracle,
            const std::vector<RayOutcome>& rays, double threshold);

/// Mean |f_pred(x) - f_gt(x)| (m per frame, forward flow); NaN for no points.
double epe3d(const VectorGrid3& pred_flow, const SceneOracle& oracle, const std::vector<Vec3>& points,
             int frame);

/// Cell centers inside dynamic geometry at frame t.
std::vector<Vec3> dynamic_points(const SceneOracle& oracle, const GridSpec& spec, int frame);

/// Renders the LiDAR-like evaluation rays of frame t from the current and
/// future ego poses against the blended field phi^b_t (not aggregated). A
/// prediction hits when the weight sum exceeds 0.5; its depth is d_r / sum(w).
std::vector<RayOutcome> trace_eval_rays(const FrameFields& fields, const SceneOracle& oracle,
                                        const EvalConfig& cfg, int frame,
                                        const SharpnessParams& sharp, bool single_sdf,
                                        const Workers& workers);

struct MetricsReport {
  std::string label = "full";
  std::string scene_id;
  std::uint64_t seed = 0;
  std::size_t rays = 0;
  std::vector<ThresholdCounts> iou;
  double iou_mean = 0.0;
  double mave = 0.0;
  double epe3d = 0.0;
  double zero_flow_epe3d = 0.0;  // same points with a zero prediction
  double zero_flow_mave = 0.0;

  std::string csv_header() const;
  std::string csv_row() const;
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  /// Parses a metrics.csv written by write_metrics_csv (one report per row).
  static std::vector<MetricsReport> read_csv(const std::string& path);
  std::string pretty() const;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsReport>& reports);

MetricsReport evaluate(const FrameFields& fields, const SceneOracle& oracle, const EvalConfig& cfg,
                       const SharpnessParams& sharp, bool single_sdf, const Workers& workers);

}  // namespace occflow
