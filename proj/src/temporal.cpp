#include "occflow/temporal.hpp"

namespace occflow {

FrameFields FrameFields::make(const GridSpec& spec, const std::vector<Pose>& poses,
                              const FieldInit& init) {
  if (poses.empty()) throw std::invalid_argument("FrameFields: no frames");
  FrameFields f;
  f.spec = spec;
  f.poses = poses;
  f.frames.reserve(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    FrameGrids g;
    g.phi_s = ScalarGrid3(spec, init.phi_s);
    g.phi_d = ScalarGrid3(spec, init.phi_d);
    g.color = VectorGrid3(spec, Vec3::Constant(init.color));
    g.flow_bwd = VectorGrid3(spec);
    g.flow_fwd = VectorGrid3(spec);
    f.frames.push_back(std::move(g));
  }
  return f;
}

Vec3 align_point(const Vec3& x, const Pose& pose_t, const Pose& pose_u) {
  return pose_u.inverse() * (pose_t * x);
}

double aggregate_static(const FrameFields& fields, int t, const Vec3& x, const AggParams& p) {
  const FieldEval<double> ev(fields, p, nullptr, nullptr, p.sharpness.a);
  return ev.phi_s_agg(t, to_v3(x));
}

double aggregate_dynamic(const FrameFields& fields, int t, const Vec3& x, const AggParams& p) {
  const FieldEval<double> ev(fields, p, nullptr, nullptr, p.sharpness.a);
  return ev.phi_d_agg(t, to_v3(x));
}

double blend_aggregated(const FrameFields& fields, int t, const Vec3& x, const AggParams& p) {
  const FieldEval<double> ev(fields, p, nullptr, nullptr, p.sharpness.a);
  return ev.phi_b_agg(t, to_v3(x));
}

}  // namespace occflow
