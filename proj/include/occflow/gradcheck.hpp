#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occflow/losses.hpp"
#include "occflow/optim.hpp"

namespace occflow {

struct GradCheckOptions {
  int cells = 8;  // per axis
  int params = 100;
  std::uint64_t seed = 7;
  double step = 3e-5;
  double tolerance = 1e-4;
  double flow_tolerance = 1e-3;  // flow-warp parameters near trilinear kinks
  double floor = 1e-6;           // denominator floor of the relative error
};

struct GradCheckEntry {
  std::uint32_t id = 0;
  std::string block;  // log_a, phi_s, phi_d, color, flow_bwd, flow_fwd
  double analytic = 0.0, numeric = 0.0, rel_error = 0.0;
  bool pass = false;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;       // over non-flow parameters
  double max_rel_error_flow = 0.0;  // over flow parameters
  LossTerms terms;
  bool pass = false;
};

/// Small randomized state and iteration batch over three frames with every
/// loss term active; sim targets are frozen in the batch.
struct GradCheckProblem {
  TrainState state;
  std::vector<PinholeCamera> cameras;
  ImageSet images;
  IterationBatch batch;
  LossWeights weights;
  AggParams agg;
  SimFlowParams sim;
  LossOptions options;

  static GradCheckProblem make(const GradCheckOptions& opt);
  LossContext context(const Workers& workers) const;
};

/// Compares adjoint gradients of total_loss against central differences
/// on randomly chosen parameters that the batch touches (log a always included).
GradCheckResult gradient_check(const GradCheckOptions& opt, const Workers& workers);

const char* block_name(const ParamLayout& layout, std::uint32_t id);

}  // namespace occflow
