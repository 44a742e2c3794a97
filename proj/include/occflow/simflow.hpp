#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occflow/geometry.hpp"
#include "occflow/grid.hpp"
#include "occflow/temporal.hpp"

namespace occflow {

/// BEV feature map: one length-C vector per (i, j) cell, stored contiguously.
/// Cells marked invalid have no defined content (outside an aligned map).
struct FeatureMap {
  int nx = 0, ny = 0, C = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> valid;

  const double* at(int i, int j) const { return &data[(static_cast<std::size_t>(i) * ny + j) * C]; }
  bool is_valid(int i, int j) const { return valid[static_cast<std::size_t>(i) * ny + j] != 0; }
};

/// Column of dynamic occupancies Phi^d_a over all z levels of each BEV cell.
FeatureMap build_features(const ScalarGrid3& phi_d, double a);

/// Features of another frame's phi_d resampled at this frame's cell centers
/// mapped through `to_other`. Columns whose cell centers leave the volume are invalid.
FeatureMap build_aligned_features(const ScalarGrid3& phi_d_other, double a,
                                  const RigidMap& to_other);

struct SimFlowParams {
  int N = 35;
  double tau_s = 0.75;
  double cell = 0.2;
  double lambda_sim = 5.0;
  // Columns with a smaller norm count as zero vectors (no displacement for
  // the query, similarity 0 as a candidate).
  double norm_floor = 1e-2;

  void validate() const {
    if (N < 3 || N % 2 == 0) throw std::invalid_argument("sim_flow.N must be odd and >= 3");
    if (!(tau_s > 0.0)) throw std::invalid_argument("sim_flow.tau_s must be > 0");
    if (!(cell > 0.0)) throw std::invalid_argument("sim_flow.cell must be > 0");
    if (!(lambda_sim >= 0.0)) throw std::invalid_argument("sim_flow.lambda_sim must be >= 0");
    if (!(norm_floor >= 0.0)) throw std::invalid_argument("sim_flow.norm_floor must be >= 0");
  }
};

struct Displacements {
  int nx = 0, ny = 0;
  std::vector<std::array<int, 2>> d;  // (di, dj) per cell, row-major over (i, j)

  const std::array<int, 2>& at(int i, int j) const {
    return d[static_cast<std::size_t>(i) * ny + j];
  }
};

/// Cosine-similarity argmax of each curr cell over the N x N window of prev.
/// Ties (within 1e-12) go to the smallest |di| + |dj|, then to scan order.
Displacements similarity_argmax(const FeatureMap& curr, const FeatureMap& prev,
                                const SimFlowParams& p);

/// (di * cell, dj * cell, 0) broadcast along z.
VectorGrid3 pseudo_labels(const Displacements& disp, const GridSpec& spec, double cell);

double consistency_weight(const Vec3& f_back, const Vec3& f_fwd, double tau_s);

/// Mean over cells of Phi^d_a * gamma_s * (|f- - l-|_1 + |f+ - l+|_1). Gate and
/// labels are constants; when grad_bwd / grad_fwd are given they receive
/// d loss / d flow per flow value (same layout as the flow grids), scaled by `scale`.
double sim_flow_loss(const VectorGrid3& flow_bwd, const VectorGrid3& flow_fwd,
                     const VectorGrid3& label_bwd, const VectorGrid3& label_fwd,
                     const ScalarGrid3& phi_d, double a, double tau_s,
                     std::span<double> grad_bwd = {},
                     std::span<double> grad_fwd = {}, double scale = 1.0);

/// Per-cell Phi^d_a gate, for callers that freeze it across evaluations.
std::vector<double> sim_gate(const ScalarGrid3& phi_d, double a);
double sim_flow_loss(const VectorGrid3& flow_bwd, const VectorGrid3& flow_fwd,
                     const VectorGrid3& label_bwd, const VectorGrid3& label_fwd,
                     const std::vector<double>& gate, double tau_s,
                     std::span<double> grad_bwd = {},
                     std::span<double> grad_fwd = {}, double scale = 1.0);

/// Similarity map of one query cell against its window, row-major over
/// (di, dj), written as PGM for inspection; invalid candidates are black.
void write_similarity_pgm(const std::string& path, const FeatureMap& curr,
                          const FeatureMap& prev, int i, int j, const SimFlowParams& p);

}  // namespace occflow
