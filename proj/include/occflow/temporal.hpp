#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "occflow/field.hpp"
#include "occflow/geometry.hpp"
#include "occflow/grid.hpp"

namespace occflow {

/// Learnable grids of one frame, all in that frame's ego coordinates.
struct FrameGrids {
  ScalarGrid3 phi_s, phi_d;
  VectorGrid3 color;
  VectorGrid3 flow_bwd, flow_fwd;  // m per frame, towards t-1 and t+1
};

struct FieldInit {
  double phi_s = 0.5;
  double phi_d = 1.0;
  double color = 0.5;
};

struct FrameFields {
  GridSpec spec;
  std::vector<FrameGrids> frames;
  std::vector<Pose> poses;  // world_from_ego per frame

  static FrameFields make(const GridSpec& spec, const std::vector<Pose>& poses,
                          const FieldInit& init = {});
  int frame_count() const { return static_cast<int>(frames.size()); }
  bool has(int t) const { return t >= 0 && t < frame_count(); }
};

enum class Block : int { PhiS = 0, PhiD = 1, Color = 2, FlowBwd = 3, FlowFwd = 4 };

/// Flat parameter numbering: id 0 is log(a); each frame then owns
/// phi_s (n), phi_d (n), color (3n), flow_bwd (3n), flow_fwd (3n).
struct ParamLayout {
  static constexpr std::uint32_t kLogA = 0;
  std::size_t cells = 0;
  int frames = 0;

  std::size_t frame_stride() const { return 11 * cells; }
  std::size_t total() const { return 1 + frames * frame_stride(); }
  std::int64_t offset(int frame, Block b) const {
    static constexpr int kStart[5] = {0, 1, 2, 5, 8};
    return static_cast<std::int64_t>(1 + frame * frame_stride() + kStart[static_cast<int>(b)] * cells);
  }
  std::size_t block_size(Block b) const {
    return b == Block::PhiS || b == Block::PhiD ? cells : 3 * cells;
  }
};

struct AggParams {
  double lambda_ag = 0.5;
  SharpnessParams sharpness;
  bool static_enabled = true;
  bool dynamic_enabled = true;
  bool stop_neighbor_grad = false;  // neighbor frames enter as constants

  void validate() const {
    if (!(lambda_ag >= 0.0 && lambda_ag <= 1.0))
      throw std::invalid_argument("lambda_ag must lie in [0, 1]");
    sharpness.validate();
  }
};

/// x given in ego coordinates of frame t, returned in those of frame u.
Vec3 align_point(const Vec3& x, const Pose& pose_t, const Pose& pose_u);

/// Rigid map between ego frames, applicable to double or ad::Var positions.
struct RigidMap {
  Mat3 R = Mat3::Identity();
  Vec3 b = Vec3::Zero();

  static RigidMap between(const Pose& pose_t, const Pose& pose_u) {
    const Pose rel = pose_u.inverse() * pose_t;
    return {rel.linear(), rel.translation()};
  }
  V3<double> operator()(const V3<double>& x) const {
    return to_v3(R * to_vec3(x) + b);
  }
  V3<ad::Var> operator()(const V3<ad::Var>& x) const {
    ad::Tape* tape = x[0].tape ? x[0].tape : (x[1].tape ? x[1].tape : x[2].tape);
    V3<ad::Var> out;
    for (int i = 0; i < 3; ++i) {
      const double v = R(i, 0) * x[0].v + R(i, 1) * x[1].v + R(i, 2) * x[2].v + b[i];
      if (!tape) {
        out[i] = ad::Var(v);
        continue;
      }
      for (int j = 0; j < 3; ++j) tape->edge(x[j], R(i, j));
      out[i] = tape->finish(v);
    }
    return out;
  }
};

/// Field queries over a FrameFields snapshot. With S = ad::Var every sample
/// of a frame listed in `active` links to its parameters; other frames (and
/// all frames when tape is null) are constants.
template <class S>
class FieldEval {
 public:
  FieldEval(const FrameFields& fields, const AggParams& params, ad::Tape* tape,
            const ParamLayout* layout, S a)
      : f_(fields), p_(params), tape_(tape), layout_(layout), a_(a) {
    const int n = fields.frame_count();
    maps_.resize(static_cast<std::size_t>(n) * n);
    for (int t = 0; t < n; ++t)
      for (int u = 0; u < n; ++u) maps_[t * n + u] = RigidMap::between(f_.poses[t], f_.poses[u]);
    active_.assign(n, tape != nullptr && layout != nullptr);
  }

  /// Restricts gradients to frames [lo, hi].
  void set_active(int lo, int hi) {
    for (int t = 0; t < f_.frame_count(); ++t)
      active_[t] = tape_ != nullptr && layout_ != nullptr && t >= lo && t <= hi;
  }

  const S& a() const { return a_; }
  void set_a(const S& a) { a_ = a; }
  double tau() const { return p_.sharpness.tau; }
  const RigidMap& map(int t, int u) const { return maps_[t * f_.frame_count() + u]; }

  std::int64_t offset(int frame, Block b, bool neighbor = false) const {
    if (!active_[frame] || (neighbor && p_.stop_neighbor_grad)) return -1;
    return layout_->offset(frame, b);
  }

  template <class P>
  S phi_s(int t, const V3<P>& x, bool neighbor = false) const {
    return sample<S, P>(tape_, f_.frames[t].phi_s, offset(t, Block::PhiS, neighbor), x);
  }
  template <class P>
  S phi_d(int t, const V3<P>& x, bool neighbor = false) const {
    return sample<S, P>(tape_, f_.frames[t].phi_d, offset(t, Block::PhiD, neighbor), x);
  }
  V3<S> color(int t, const V3<double>& x) const {
    return sample<S, double>(tape_, f_.frames[t].color, offset(t, Block::Color), x);
  }
  V3<S> flow(int t, const V3<double>& x, bool forward) const {
    const auto& g = forward ? f_.frames[t].flow_fwd : f_.frames[t].flow_bwd;
    return sample<S, double>(tape_, g, offset(t, forward ? Block::FlowFwd : Block::FlowBwd), x);
  }

  bool has_neighbors(int t) const { return f_.has(t - 1) && f_.has(t + 1); }

  /// lambda_ag (phi_{t-1} + phi_{t+1}) / 2 + (1 - lambda_ag) phi_t at ego-aligned x.
  S phi_s_agg(int t, const V3<double>& x) const {
    const S cur = phi_s(t, x);
    if (!p_.static_enabled || !has_neighbors(t) || p_.lambda_ag == 0.0) return cur;
    const S prev = phi_s(t - 1, map(t, t - 1)(x), true);
    const S next = phi_s(t + 1, map(t, t + 1)(x), true);
    const double l = p_.lambda_ag;
    return S(0.5 * l) * (prev + next) + S(1.0 - l) * cur;
  }

  /// Flow-warped dynamic aggregation gated by lambda_ag * Phi^d_a(phi^d_t(x)).
  S phi_d_agg(int t, const V3<double>& x) const {
    const S cur = phi_d(t, x);
    if (!p_.dynamic_enabled || !has_neighbors(t) || p_.lambda_ag == 0.0) return cur;
    const V3<S> fb = flow(t, x, false);
    const V3<S> ff = flow(t, x, true);
    const V3<S> xb = map(t, t - 1)(x + fb);
    const V3<S> xf = map(t, t + 1)(x + ff);
    const S prev = phi_d(t - 1, xb, true);
    const S next = phi_d(t + 1, xf, true);
    const S gate = S(p_.lambda_ag) * sigmoid_occ<S>(cur, a_);
    return gate * S(0.5) * (prev + next) + (S(1.0) - gate) * cur;
  }

  S blend(const S& s, const S& d) const { return blend_sdf<S>(s, d, a_, p_.sharpness.tau); }
  S phi_b(int t, const V3<double>& x) const { return blend(phi_s(t, x), phi_d(t, x)); }
  S phi_b_agg(int t, const V3<double>& x) const {
    return blend(phi_s_agg(t, x), phi_d_agg(t, x));
  }

 private:
  const FrameFields& f_;
  AggParams p_;
  ad::Tape* tape_;
  const ParamLayout* layout_;
  S a_;
  std::vector<RigidMap> maps_;
  std::vector<bool> active_;
};

// Plain double-valued entry points.
double aggregate_static(const FrameFields& fields, int t, const Vec3& x, const AggParams& p);
double aggregate_dynamic(const FrameFields& fields, int t, const Vec3& x, const AggParams& p);
double blend_aggregated(const FrameFields& fields, int t, const Vec3& x, const AggParams& p);

}  // namespace occflow
