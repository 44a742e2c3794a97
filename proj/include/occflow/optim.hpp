#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "occflow/losses.hpp"

namespace occflow {

struct Schedule {
  int iterations = 2000;
  double lr_grid = 1e-2;
  double lr_log_a = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t seed = 1;
  int lidar_rays = 256;  // per iteration, half static and half dynamic
  int patches = 2;
  int patch_size = 6;
  int reg_points = 512;
  // Extra eikonal/hessian points on the iteration's dynamic LiDAR rays, at
  // offsets drawn from [-band/2, band] around the measured endpoint. Uniform
  // points almost never land on a mover.
  int surface_points = 256;
  double surface_band = 0.8;  // m
  int K = 20;  // static rays come from frames t +- k, k < K
  double divergence = 1e6;

  void validate() const;
};

/// Labeled rays grouped for sampling.
struct TrainData {
  std::vector<std::vector<Ray>> static_pool, dynamic_pool;  // per frame, LiDAR only
  std::map<std::pair<int, int>, RayBatch> camera_batches;   // (frame, camera)
  ImageSet images;
  std::vector<PinholeCamera> cameras;

  static TrainData from_batches(const std::vector<RayBatch>& labeled,
                                const std::vector<PinholeCamera>& cameras, int frames);
};

struct TraceRow {
  int iteration = 0;
  int t = 0;
  double a = 0.0;
  LossTerms terms;
};

struct TrainState {
  FrameFields fields;
  ParamLayout layout;
  double log_a = 0.0;
  std::vector<double> m, v;  // Adam moments, flat parameter order
  std::vector<int> frame_steps;
  int log_a_steps = 0;
  int iteration = 0;
  std::vector<TraceRow> trace;

  static TrainState init(const GridSpec& spec, const std::vector<Pose>& poses,
                         const FieldInit& field_init = {}, double a = 10.0);
  double a() const { return std::exp(log_a); }
};

struct TrainConfig {
  LossWeights weights;
  AggParams agg;
  SimFlowParams sim;
  LossOptions options;
  Schedule schedule;
  bool use_sim = true;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Similarity-flow labels and gate for frame t; nullopt without both neighbors.
std::optional<SimTargets> make_sim_targets(const FrameFields& fields, int t, double a,
                                           const SimFlowParams& p);

/// Draws the rays, patches and regularization points of one iteration.
IterationBatch sample_iteration(const TrainState& state, const TrainData& data,
                                const TrainConfig& cfg, std::mt19937_64& rng);

LossContext make_context(const TrainState& state, const TrainData& data, const TrainConfig& cfg,
                         const Workers& workers);

/// Adam on log(a) and on every parameter of frames t-1..t+1; clears the
/// consumed gradient entries.
void adam_step(TrainState& state, int t, std::vector<double>& grad, const Schedule& s);

/// Runs schedule.iterations steps. Throws DivergenceError when the total
/// exceeds schedule.divergence and NonFiniteLoss on non-finite terms; the
/// trace up to the failure stays in `state`.
void optimize(TrainState& state, const TrainData& data, const TrainConfig& cfg,
              const Workers& workers, const std::function<void(const TraceRow&)>& progress = {});

void write_loss_trace(const std::string& path, const std::vector<TraceRow>& trace);

/// All grids, log(a) and the Adam moments in one `.grid` container.
void write_checkpoint(const std::string& path, const TrainState& state);
/// Ego poses are stored in the header metadata.
TrainState read_checkpoint(const std::string& path);

}  // namespace occflow
