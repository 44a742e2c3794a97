#include <cmath>
#include <filesystem>
#include <limits>

#include <doctest.h>

#include "occflow/metrics.hpp"

using namespace occflow;
using doctest::Approx;

namespace {

RayOutcome outcome(bool gt_hit, double gt, bool pred_hit, double pred) {
  RayOutcome r;
  r.gt_hit = gt_hit;
  r.gt_depth = gt;
  r.pred_hit = pred_hit;
  r.pred_depth = pred;
  return r;
}

const GridSpec kVolume = GridSpec::make(Vec3(-6.4, -6.4, -2.4), Vec3(12.8, 12.8, 6.4), 0.2);

// Ground plane plus one box moving at 0.8 m per frame (8 m/s at 0.1 s).
SceneOracle moving_box_oracle() {
  ScenePrimitive ground;
  ground.shape = Shape::GroundPlane;
  ground.center = Vec3(0, 0, -1.6);
  ScenePrimitive box;
  box.center = Vec3(3.1, 0.1, 0.1);
  box.half_extents = Vec3(0.5, 0.5, 0.5);
  box.velocity = Vec3(0.8, 0.0, 0.0);
  box.dynamic = true;
  box.object = 0;
  return SceneOracle({ground, box}, 0.1, kVolume);
}

}  // namespace

TEST_CASE("RayIoU classification") {
  SUBCASE("hand-counted case") {
    // Errors 0.5, 3.0 and a predicted miss on three ground-truth hits.
    const std::vector<RayOutcome> rays = {outcome(true, 4.0, true, 4.5), outcome(true, 4.0, true, 7.0),
                                          outcome(true, 4.0, false, 0.0)};
    const auto c = ray_iou(rays, {1.0});
    REQUIRE(c.size() == 1);
    CHECK(c[0].tp == 1);
    CHECK(c[0].fp == 1);
    CHECK(c[0].fn == 2);
    CHECK(c[0].iou == Approx(0.25));
  }
  SUBCASE("exact prediction") {
    std::vector<RayOutcome> rays;
    for (int i = 0; i < 10; ++i) rays.push_back(outcome(true, 1.0 + i, true, 1.0 + i));
    rays.push_back(outcome(false, 0.0, false, 0.0));
    for (const auto& c : ray_iou(rays, {0.25, 0.5, 1.0})) CHECK(c.iou == 1.0);
  }
  SUBCASE("predicted hit on a ground-truth miss is a false positive") {
    const auto c = ray_iou({outcome(false, 0.0, true, 2.0), outcome(true, 2.0, true, 2.1)}, {0.5});
    CHECK(c[0].fp == 1);
    CHECK(c[0].fn == 0);
    CHECK(c[0].iou == Approx(0.5));
  }
  SUBCASE("threshold is strict") {
    CHECK_FALSE(is_true_positive(outcome(true, 2.0, true, 3.0), 1.0));
    CHECK(is_true_positive(outcome(true, 2.0, true, 2.999), 1.0));
  }
  SUBCASE("no hits anywhere") {
    const auto c = ray_iou({outcome(false, 0.0, false, 0.0)}, {1.0});
    CHECK(std::isnan(c[0].iou));
  }
  SUBCASE("monotone in the threshold") {
    std::vector<RayOutcome> rays;
    for (int i = 0; i < 50; ++i)
      rays.push_back(outcome(i % 7 != 0, 3.0, i % 5 != 0, 3.0 + 0.07 * i));
    const auto c = ray_iou(rays, {0.25, 0.5, 1.0, 2.0, 4.0});
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(c[k].iou >= c[k - 1].iou);
  }
}

TEST_CASE("mAVE") {
  const SceneOracle oracle = moving_box_oracle();
  const auto hit = oracle.cast_ray(Vec3::Zero(), Vec3::UnitX(), 0);
  REQUIRE(hit);
  REQUIRE(hit->dynamic);
  CHECK(oracle.velocity_mps(hit->primitive, 0).x() == Approx(8.0));

  RayOutcome dyn = outcome(true, hit->range, true, hit->range + 0.1);
  dyn.dir = Vec3::UnitX();
  dyn.gt_dynamic = true;
  dyn.gt_primitive = hit->primitive;

  VectorGrid3 flow(kVolume, Vec3(1.0, 0.0, 0.0));
  const std::vector<const VectorGrid3*> flows = {&flow};
  CHECK(mave(flows, oracle, {dyn}, 2.0) == Approx(2.0));

  VectorGrid3 exact(kVolume, Vec3(0.8, 0.0, 0.0));
  CHECK(mave({&exact}, oracle, {dyn}, 2.0) == Approx(0.0).epsilon(1e-12));

  // Static true positives do not enter the mean.
  const auto ground = oracle.cast_ray(Vec3::Zero(), Vec3(0.3, 0.0, -1.0).normalized(), 0);
  REQUIRE(ground);
  RayOutcome st = outcome(true, ground->range, true, ground->range);
  st.dir = Vec3(0.3, 0.0, -1.0).normalized();
  st.gt_primitive = ground->primitive;
  CHECK(mave(flows, oracle, {dyn, st, st}, 2.0) == Approx(2.0));

  // Beyond the 2 m threshold the dynamic ray is not a true positive.
  RayOutcome far = dyn;
  far.pred_depth = dyn.gt_depth + 2.5;
  CHECK(std::isnan(mave(flows, oracle, {far, st}, 2.0)));
}

TEST_CASE("3D end-point error") {
  const SceneOracle oracle = moving_box_oracle();
  const std::vector<Vec3> pts = dynamic_points(oracle, kVolume, 0);
  REQUIRE(!pts.empty());
  for (const Vec3& p : pts) CHECK(oracle.inside_dynamic(p, 0));
  // A 1 m box at 0.2 m resolution holds 5^3 cell centers.
  CHECK(pts.size() == 125);

  VectorGrid3 exact(kVolume, Vec3(0.8, 0.0, 0.0));
  CHECK(epe3d(exact, oracle, pts, 0) == Approx(0.0).epsilon(1e-12));
  const Vec3 bias(0.1, -0.2, 0.3);
  VectorGrid3 biased(kVolume, Vec3(0.8, 0.0, 0.0) + bias);
  CHECK(epe3d(biased, oracle, pts, 0) == Approx(bias.norm()));
  VectorGrid3 zero(kVolume);
  CHECK(epe3d(zero, oracle, pts, 0) == Approx(0.8));
  CHECK(std::isnan(epe3d(zero, oracle, {}, 0)));
}

TEST_CASE("metrics report serialization") {
  MetricsReport r;
  r.label = "no-ta";
  r.scene_id = "00ff";
  r.seed = 42;
  r.rays = 1234;
  r.iou = {{0.25, 10, 2, 3, 10.0 / 15.0}, {0.5, 11, 1, 2, 11.0 / 14.0}, {1.0, 12, 0, 1, 12.0 / 13.0}};
  r.iou_mean = (10.0 / 15.0 + 11.0 / 14.0 + 12.0 / 13.0) / 3.0;
  r.mave = std::numeric_limits<double>::quiet_NaN();
  r.epe3d = 0.123456789012;
  r.zero_flow_epe3d = 0.4;
  r.zero_flow_mave = 4.0;

  auto same = [&](const MetricsReport& b) {
    CHECK(b.label == r.label);
    CHECK(b.scene_id == r.scene_id);
    CHECK(b.seed == r.seed);
    CHECK(b.rays == r.rays);
    REQUIRE(b.iou.size() == r.iou.size());
    for (std::size_t k = 0; k < r.iou.size(); ++k) {
      CHECK(b.iou[k].threshold == r.iou[k].threshold);
      CHECK(b.iou[k].tp == r.iou[k].tp);
      CHECK(b.iou[k].fp == r.iou[k].fp);
      CHECK(b.iou[k].fn == r.iou[k].fn);
      CHECK(b.iou[k].iou == Approx(r.iou[k].iou).epsilon(1e-9));
    }
    CHECK(std::isnan(b.mave));
    CHECK(b.epe3d == Approx(r.epe3d).epsilon(1e-9));
    CHECK(b.zero_flow_epe3d == Approx(0.4));
    CHECK(b.zero_flow_mave == Approx(4.0));
  };

  same(MetricsReport::from_json(r.to_json()));

  const auto path = std::filesystem::temp_directory_path() / "occflow_test_metrics.csv";
  MetricsReport r2 = r;
  r2.label = "full";
  write_metrics_csv(path.string(), {r, r2});
  const auto back = MetricsReport::read_csv(path.string());
  REQUIRE(back.size() == 2);
  same(back[0]);
  CHECK(back[1].label == "full");
  std::filesystem::remove(path);
  CHECK(r.csv_header().rfind("label,scene_id,seed,rays,iou@0.25,iou@0.5,iou@1,iou_mean,mave", 0) == 0);
}

TEST_CASE("evaluation settings are validated") {
  EvalConfig c;
  CHECK_NOTHROW(c.validate());
  c.thresholds.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EvalConfig{};
  c.samples = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
