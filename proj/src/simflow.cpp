#include "occflow/simflow.hpp"

#include <cmath>
#include <cstdlib>

#include "occflow/parallel.hpp"
#include "occflow/render.hpp"

namespace occflow {

namespace {

double column_norm(const double* v, int C) {
  double s = 0.0;
  for (int c = 0; c < C; ++c) s += v[c] * v[c];
  return std::sqrt(s);
}

double dot(const double* a, const double* b, int C) {
  double s = 0.0;
  for (int c = 0; c < C; ++c) s += a[c] * b[c];
  return s;
}

}  // namespace

FeatureMap build_features(const ScalarGrid3& phi_d, double a) {
  const auto& d = phi_d.spec().dims;
  FeatureMap f;
  f.nx = d[0];
  f.ny = d[1];
  f.C = d[2];
  f.data.resize(phi_d.size());
  for (std::size_t i = 0; i < phi_d.size(); ++i) f.data[i] = sigmoid_occ(phi_d[i], a);
  f.valid.assign(static_cast<std::size_t>(f.nx) * f.ny, 1);
  return f;
}

FeatureMap build_aligned_features(const ScalarGrid3& phi_d_other, double a,
                                  const RigidMap& to_other) {
  const GridSpec& spec = phi_d_other.spec();
  FeatureMap f;
  f.nx = spec.dims[0];
  f.ny = spec.dims[1];
  f.C = spec.dims[2];
  f.data.assign(spec.cell_count(), 0.0);
  f.valid.assign(static_cast<std::size_t>(f.nx) * f.ny, 1);
  for (int i = 0; i < f.nx; ++i)
    for (int j = 0; j < f.ny; ++j)
      for (int k = 0; k < f.C; ++k) {
        const V3<double> x = to_other(to_v3(spec.cell_center(i, j, k)));
        const Vec3 xv = to_vec3(x);
        if (!spec.contains(xv)) {
          f.valid[static_cast<std::size_t>(i) * f.ny + j] = 0;
          continue;
        }
        f.data[spec.index(i, j, k)] = sigmoid_occ(phi_d_other.sample(xv), a);
      }
  return f;
}

Displacements similarity_argmax(const FeatureMap& curr, const FeatureMap& prev,
                                const SimFlowParams& p) {
  if (curr.nx != prev.nx || curr.ny != prev.ny || curr.C != prev.C)
    throw std::invalid_argument("similarity_argmax: feature maps differ in shape");
  p.validate();
  const int h = p.N / 2;
  const int nx = curr.nx, ny = curr.ny, C = curr.C;
  std::vector<double> prev_norm(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) prev_norm[static_cast<std::size_t>(i) * ny + j] = column_norm(prev.at(i, j), C);

  Displacements out;
  out.nx = nx;
  out.ny = ny;
  out.d.assign(static_cast<std::size_t>(nx) * ny, {0, 0});
  constexpr double kTie = 1e-12;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double* q = curr.at(i, j);
      const double qn = column_norm(q, C);
      if (qn <= p.norm_floor || qn == 0.0) continue;
      double best = -2.0;
      int best_key = 0;
      std::array<int, 2> arg{0, 0};
      for (int di = -h; di <= h; ++di) {
        const int ii = i + di;
        if (ii < 0 || ii >= nx) continue;
        for (int dj = -h; dj <= h; ++dj) {
          const int jj = j + dj;
          if (jj < 0 || jj >= ny || !prev.is_valid(ii, jj)) continue;
          const double pn = prev_norm[static_cast<std::size_t>(ii) * ny + jj];
          const double s = (pn <= p.norm_floor || pn == 0.0) ? 0.0 : dot(q, prev.at(ii, jj), C) / (qn * pn);
          const int key = std::abs(di) + std::abs(dj);
          if (s > best + kTie || (s >= best - kTie && key < best_key)) {
            best = s;
            best_key = key;
            arg = {di, dj};
          }
        }
      }
      out.d[static_cast<std::size_t>(i) * ny + j] = arg;
    }
  return out;
}

VectorGrid3 pseudo_labels(const Displacements& disp, const GridSpec& spec, double cell) {
  if (disp.nx != spec.dims[0] || disp.ny != spec.dims[1])
    throw std::invalid_argument("pseudo_labels: displacement map does not match the grid");
  VectorGrid3 out(spec);
  for (int i = 0; i < spec.dims[0]; ++i)
    for (int j = 0; j < spec.dims[1]; ++j) {
      const auto& d = disp.at(i, j);
      const Vec3 f(d[0] * cell, d[1] * cell, 0.0);
      for (int k = 0; k < spec.dims[2]; ++k) out.set(spec.index(i, j, k), f);
    }
  return out;
}

double consistency_weight(const Vec3& f_back, const Vec3& f_fwd, double tau_s) {
  return std::exp(-tau_s * (f_back + f_fwd).norm());
}

std::vector<double> sim_gate(const ScalarGrid3& phi_d, double a) {
  std::vector<double> gate(phi_d.size());
  for (std::size_t c = 0; c < gate.size(); ++c) gate[c] = sigmoid_occ(phi_d[c], a);
  return gate;
}

double sim_flow_loss(const VectorGrid3& flow_bwd, const VectorGrid3& flow_fwd,
                     const VectorGrid3& label_bwd, const VectorGrid3& label_fwd,
                     const ScalarGrid3& phi_d, double a, double tau_s,
                     std::span<double> grad_bwd, std::span<double> grad_fwd,
                     double scale) {
  return sim_flow_loss(flow_bwd, flow_fwd, label_bwd, label_fwd, sim_gate(phi_d, a), tau_s,
                       grad_bwd, grad_fwd, scale);
}

double sim_flow_loss(const VectorGrid3& flow_bwd, const VectorGrid3& flow_fwd,
                     const VectorGrid3& label_bwd, const VectorGrid3& label_fwd,
                     const std::vector<double>& gates, double tau_s,
                     std::span<double> grad_bwd, std::span<double> grad_fwd,
                     double scale) {
  const std::size_t n = gates.size();
  if (flow_bwd.cells() != n || flow_fwd.cells() != n || label_bwd.cells() != n ||
      label_fwd.cells() != n)
    throw std::invalid_argument("sim_flow_loss: grids differ in size");
  const auto fb = flow_bwd.values(), ff = flow_fwd.values();
  const auto lb = label_bwd.values(), lf = label_fwd.values();
  std::vector<double> per_cell(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double gate = gates[c];
    if (gate == 0.0) continue;
    const double w = gate * consistency_weight(label_bwd.at(c), label_fwd.at(c), tau_s);
    double l1 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const std::size_t idx = 3 * c + k;
      const double eb = fb[idx] - lb[idx];
      const double ef = ff[idx] - lf[idx];
      l1 += std::abs(eb) + std::abs(ef);
      if (!grad_bwd.empty()) grad_bwd[idx] += scale * w * inv_n * ((eb > 0.0) - (eb < 0.0));
      if (!grad_fwd.empty()) grad_fwd[idx] += scale * w * inv_n * ((ef > 0.0) - (ef < 0.0));
    }
    per_cell[c] = w * l1;
  }
  return pairwise_sum(per_cell) * inv_n;
}

void write_similarity_pgm(const std::string& path, const FeatureMap& curr,
                          const FeatureMap& prev, int i, int j, const SimFlowParams& p) {
  const int h = p.N / 2;
  std::vector<double> img(static_cast<std::size_t>(p.N) * p.N, 0.0);
  const double* q = curr.at(i, j);
  const double qn = column_norm(q, curr.C);
  for (int di = -h; di <= h; ++di)
    for (int dj = -h; dj <= h; ++dj) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= prev.nx || jj >= prev.ny || !prev.is_valid(ii, jj)) continue;
      const double pn = column_norm(prev.at(ii, jj), curr.C);
      if (qn == 0.0 || pn == 0.0) continue;
      img[static_cast<std::size_t>(di + h) * p.N + (dj + h)] = dot(q, prev.at(ii, jj), curr.C) / (qn * pn);
    }
  write_pgm(path, p.N, p.N, img, 0.0, 1.0);
}

}  // namespace occflow
