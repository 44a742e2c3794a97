#pragma once

// Scalar reverse-mode differentiation.
//
// A Tape records one node per intermediate value together with the local
// partial derivatives towards its inputs. Inputs are either earlier nodes or
// external parameters (flat ids into the optimizer's parameter vector).
// Var values carry a null tape pointer when they are constants; operations on
// constants never touch a tape.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace occflow::ad {

class Tape;

struct Var {
  double v = 0.0;
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT: implicit constants are intended
  Var(double value, Tape* t, std::uint32_t node) : v(value), tape(t), id(node) {}

  bool is_constant() const { return tape == nullptr; }
};

/// (param id, d loss / d param) contributions from one backward sweep.
using GradEntries = std::vector<std::pair<std::uint32_t, double>>;

class Tape {
 public:
  static constexpr std::uint32_t kParamBit = 0x8000'0000u;

  Tape() { edge_begin_.push_back(0); }

  void clear() {
    edge_begin_.assign(1, 0);
    target_.clear();
    partial_.clear();
  }
  std::size_t node_count() const { return edge_begin_.size() - 1; }
  std::size_t edge_count() const { return target_.size(); }

  /// Leaf bound to parameter `pid` with current value v.
  Var param(double v, std::uint32_t pid) {
    assert(pid < kParamBit);
    target_.push_back(pid | kParamBit);
    partial_.push_back(1.0);
    return close(v);
  }

  // Fused node construction: push edges, then finish().
  void edge(const Var& x, double partial) {
    if (x.tape == nullptr) return;
    assert(x.tape == this);
    target_.push_back(x.id);
    partial_.push_back(partial);
  }
  void param_edge(std::uint32_t pid, double partial) {
    target_.push_back(pid | kParamBit);
    partial_.push_back(partial);
  }
  /// Closes the node under construction. A node without edges is a constant.
  Var finish(double v) {
    if (target_.size() == edge_begin_.back()) return Var(v);
    return close(v);
  }

  Var unary(double v, const Var& x, double dx) {
    if (x.tape == nullptr) return Var(v);
    edge(x, dx);
    return close(v);
  }
  Var binary(double v, const Var& x, double dx, const Var& y, double dy) {
    if (x.tape == nullptr && y.tape == nullptr) return Var(v);
    edge(x, dx);
    edge(y, dy);
    return close(v);
  }

  /// Reverse sweep from `out` seeded with d total / d out = seed. Parameter
  /// contributions are appended to `sink` (duplicates are not merged).
  void backward(const Var& out, double seed, GradEntries& sink) const {
    if (out.tape == nullptr) return;
    assert(out.tape == this);
    std::vector<double> adj(out.id + 1, 0.0);
    adj[out.id] = seed;
    for (std::int64_t n = out.id; n >= 0; --n) {
      const double a = adj[n];
      if (a == 0.0) continue;
      for (std::uint32_t e = edge_begin_[n]; e < edge_begin_[n + 1]; ++e) {
        const std::uint32_t tgt = target_[e];
        if (tgt & kParamBit)
          sink.emplace_back(tgt & ~kParamBit, a * partial_[e]);
        else
          adj[tgt] += a * partial_[e];
      }
    }
  }

 private:
  Var close(double v) {
    const auto id = static_cast<std::uint32_t>(edge_begin_.size() - 1);
    edge_begin_.push_back(static_cast<std::uint32_t>(target_.size()));
    return Var(v, this, id);
  }

  std::vector<std::uint32_t> edge_begin_;
  std::vector<std::uint32_t> target_;
  std::vector<double> partial_;
};

inline Tape* tape_of(const Var& a, const Var& b) { return a.tape ? a.tape : b.tape; }

inline double value(double x) { return x; }
inline double value(const Var& x) { return x.v; }

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->binary(a.v + b.v, a, 1.0, b, 1.0) : Var(a.v + b.v);
}
inline Var operator-(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->binary(a.v - b.v, a, 1.0, b, -1.0) : Var(a.v - b.v);
}
inline Var operator*(const Var& a, const Var& b) {
  Tape* t = tape_of(a, b);
  return t ? t->binary(a.v * b.v, a, b.v, b, a.v) : Var(a.v * b.v);
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.v / b.v;
  Tape* t = tape_of(a, b);
  return t ? t->binary(q, a, 1.0 / b.v, b, -q / b.v) : Var(q);
}
inline Var operator-(const Var& a) {
  return a.tape ? a.tape->unary(-a.v, a, -1.0) : Var(-a.v);
}
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline Var exp(const Var& x) {
  const double e = std::exp(x.v);
  return x.tape ? x.tape->unary(e, x, e) : Var(e);
}
inline Var expm1(const Var& x) {
  const double e = std::expm1(x.v);
  return x.tape ? x.tape->unary(e, x, e + 1.0) : Var(e);
}
inline Var log(const Var& x) {
  return x.tape ? x.tape->unary(std::log(x.v), x, 1.0 / x.v) : Var(std::log(x.v));
}
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.v);
  return x.tape ? x.tape->unary(s, x, 0.5 / s) : Var(s);
}
inline Var abs(const Var& x) {
  const double d = x.v > 0.0 ? 1.0 : (x.v < 0.0 ? -1.0 : 0.0);
  return x.tape ? x.tape->unary(std::abs(x.v), x, d) : Var(std::abs(x.v));
}
inline Var min(const Var& a, const Var& b) { return a.v <= b.v ? a : b; }
inline Var max(const Var& a, const Var& b) { return a.v >= b.v ? a : b; }

}  // namespace occflow::ad
