#pragma once

#include <string>
#include <vector>

#include "occflow/field.hpp"
#include "occflow/geometry.hpp"
#include "occflow/grid.hpp"

namespace occflow {

/// Uniform samples along a ray from volume entry to exit, both inclusive.
struct RaySamples {
  std::vector<double> depths;  // distance from the ray origin (m)
  std::vector<Vec3> points;
  double spacing = 0.0;

  bool empty() const { return depths.empty(); }
  std::size_t size() const { return depths.size(); }
};

/// Empty when the ray misses the volume. Throws std::invalid_argument for M < 2.
RaySamples sample_ray(const Vec3& origin, const Vec3& dir, const GridSpec& spec, int M);

/// log Phi_a(phi) = -softplus(-a phi).
template <class S>
S log_sigmoid_render(const S& phi, const S& a) {
  return -softplus(-(a * phi));
}

/// alpha = max(1 - Phi_a(phi_next) / Phi_a(phi_m), 0), evaluated in the log
/// domain so saturated sigmoids neither underflow nor cancel.
template <class S>
S neus_alpha(const S& phi_m, const S& phi_next, const S& a) {
  using std::expm1;
  return relu(-expm1(log_sigmoid_render(phi_next, a) - log_sigmoid_render(phi_m, a)));
}

template <class S>
struct RenderOut {
  std::vector<S> alphas, trans, weights;
  S depth = S(0.0);  // sum_m w_m d_m (not renormalized)
  S weight_sum = S(0.0);
  V3<S> color{S(0.0), S(0.0), S(0.0)};

  double normalized_depth() const {
    const double ws = ad::value(weight_sum);
    return ws > 0.0 ? ad::value(depth) / ws : 0.0;
  }
};

/// Alpha compositing of precomputed SDF values (one per sample, in ray
/// order). The last sample has alpha 0 because it has no successor.
template <class S>
RenderOut<S> composite(const std::vector<S>& phi, const std::vector<double>& depths, const S& a,
                       const std::vector<V3<S>>* colors = nullptr) {
  const std::size_t M = phi.size();
  RenderOut<S> out;
  out.alphas.resize(M);
  out.trans.resize(M);
  out.weights.resize(M);
  S T = S(1.0);
  for (std::size_t m = 0; m < M; ++m) {
    out.alphas[m] = m + 1 < M ? neus_alpha<S>(phi[m], phi[m + 1], a) : S(0.0);
    out.trans[m] = T;
    out.weights[m] = T * out.alphas[m];
    out.depth += out.weights[m] * S(depths[m]);
    out.weight_sum += out.weights[m];
    if (colors)
      for (int c = 0; c < 3; ++c) out.color[c] += out.weights[m] * (*colors)[m][c];
    T = T * (S(1.0) - out.alphas[m]);
  }
  return out;
}

/// Renders a ray given callables phi(point) -> S and color(point) -> V3<S>.
template <class S, class PhiFn>
RenderOut<S> render(const RaySamples& samples, PhiFn&& phi_fn, const S& a) {
  std::vector<S> phi;
  phi.reserve(samples.size());
  for (const auto& p : samples.points) phi.push_back(phi_fn(p));
  return composite<S>(phi, samples.depths, a);
}

template <class S, class PhiFn, class ColorFn>
RenderOut<S> render(const RaySamples& samples, PhiFn&& phi_fn, ColorFn&& color_fn, const S& a) {
  std::vector<S> phi;
  std::vector<V3<S>> colors;
  phi.reserve(samples.size());
  colors.reserve(samples.size());
  for (const auto& p : samples.points) {
    phi.push_back(phi_fn(p));
    colors.push_back(color_fn(p));
  }
  return composite<S>(phi, samples.depths, a, &colors);
}

// --- images -----------------------------------------------------------------

/// 8-bit binary PGM; values are mapped linearly from [lo, hi] to [0, 255].
void write_pgm(const std::string& path, int width, int height, const std::vector<double>& values,
               double lo, double hi);
/// 8-bit binary PPM from interleaved RGB in [0, 1].
void write_ppm(const std::string& path, int width, int height, const std::vector<double>& rgb);

struct GrayImage {
  int width = 0, height = 0;
  std::vector<double> values;  // in [0, 1]
};
GrayImage read_pgm(const std::string& path);

}  // namespace occflow
