#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "occflow/autodiff.hpp"

namespace occflow {

/// Sharpness `a` of the sigmoids and temperature `tau` of the smooth minimum.
/// A single instance is shared by blending, occupancy gating and rendering.
struct SharpnessParams {
  double a = 10.0;
  double tau = 2.0;

  void validate() const {
    if (!(a > 0.0)) throw std::invalid_argument("sharpness a must be > 0");
    if (!(tau > 0.0)) throw std::invalid_argument("temperature tau must be > 0");
  }
};

// Numerically stable primitives, overloaded for double and ad::Var.

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline ad::Var softplus(const ad::Var& x) {
  const double v = softplus(x.v);
  return x.tape ? x.tape->unary(v, x, sigmoid(x.v)) : ad::Var(v);
}
inline ad::Var sigmoid(const ad::Var& x) {
  const double s = sigmoid(x.v);
  return x.tape ? x.tape->unary(s, x, s * (1.0 - s)) : ad::Var(s);
}
/// max(x, 0); the derivative at exactly 0 is taken from the positive side.
inline ad::Var relu(const ad::Var& x) {
  const double v = relu(x.v);
  return x.tape ? x.tape->unary(v, x, x.v >= 0.0 ? 1.0 : 0.0) : ad::Var(v);
}

/// Dynamic occupancy (1 + e^{a phi})^{-1}: decreasing in phi, 1 inside.
template <class S>
S sigmoid_occ(const S& phi, const S& a) {
  using std::exp;
  return sigmoid(-(a * phi));
}

/// Rendering sigmoid Phi_a(x) = (1 + e^{-a x})^{-1}: increasing in x.
template <class S>
S sigmoid_render(const S& x, const S& a) {
  return sigmoid(a * x);
}

/// Temperature-scaled log-sum-exp smooth minimum
///   -(tau/a) ln(e^{-a phi_s / tau} + e^{-a phi_d / tau}),
/// evaluated in the shifted form min - (tau/a) softplus(-a |phi_s - phi_d| / tau).
/// Bounded by min - (tau/a) ln 2 <= result <= min.
template <class S>
S blend_sdf(const S& phi_s, const S& phi_d, const S& a, double tau) {
  using std::abs;
  using std::min;
  const S k = a / S(tau);
  const S lo = min(phi_s, phi_d);
  return lo - softplus(-(k * abs(phi_s - phi_d))) / k;
}

inline double blend_sdf(double phi_s, double phi_d, const SharpnessParams& p) {
  return blend_sdf<double>(phi_s, phi_d, p.a, p.tau);
}

}  // namespace occflow
