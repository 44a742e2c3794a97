#include <deque>
#include <map>
#include <random>

#include <doctest.h>

#include "occflow/label.hpp"

using namespace occflow;

namespace {

/// Breadth-first flood fill over the 26-neighborhood, written independently
/// of the library's labeling.
std::vector<int> bfs_labels(const std::array<int, 3>& d, const std::vector<std::uint8_t>& occ) {
  std::vector<int> lab(occ.size(), 0);
  auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(i) * d[1] + j) * d[2] + k; };
  int next = 0;
  for (int i = 0; i < d[0]; ++i)
    for (int j = 0; j < d[1]; ++j)
      for (int k = 0; k < d[2]; ++k) {
        if (!occ[idx(i, j, k)] || lab[idx(i, j, k)]) continue;
        ++next;
        std::deque<std::array<int, 3>> q{{i, j, k}};
        lab[idx(i, j, k)] = next;
        while (!q.empty()) {
          const auto c = q.front();
          q.pop_front();
          for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
              for (int e = -1; e <= 1; ++e) {
                const int x = c[0] + a, y = c[1] + b, z = c[2] + e;
                if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) continue;
                const std::size_t n = idx(x, y, z);
                if (occ[n] && !lab[n]) {
                  lab[n] = next;
                  q.push_back({x, y, z});
                }
              }
        }
      }
  return lab;
}

/// Same partition up to a relabeling.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (a[i] == 0) continue;
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("connected components") {
  const GridSpec spec = GridSpec::make(Vec3::Zero(), Vec3::Constant(1.6), 0.1);
  std::vector<std::uint8_t> occ(spec.cell_count(), 0);
  SUBCASE("empty grid") { CHECK(connected_components_3d(spec, occ).count() == 0); }
  SUBCASE("corner contact joins") {
    occ[spec.index(2, 2, 2)] = 1;
    occ[spec.index(3, 3, 3)] = 1;
    const auto cc = connected_components_3d(spec, occ);
    CHECK(cc.count() == 1);
    CHECK(cc.sizes[0] == 2);
  }
  SUBCASE("labels follow scan order") {
    occ[spec.index(9, 9, 9)] = 1;
    occ[spec.index(0, 0, 5)] = 1;
    const auto cc = connected_components_3d(spec, occ);
    CHECK(cc.labels[spec.index(0, 0, 5)] == 1);
    CHECK(cc.labels[spec.index(9, 9, 9)] == 2);
  }
  SUBCASE("random grids match flood fill") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double fill : {0.05, 0.2, 0.5})
      for (int rep = 0; rep < 5; ++rep) {
        for (auto& v : occ) v = u(rng) < fill;
        const auto cc = connected_components_3d(spec, occ);
        const auto ref = bfs_labels(spec.dims, occ);
        CHECK(same_partition(cc.labels, ref));
        int ref_count = 0;
        for (int l : ref) ref_count = std::max(ref_count, l);
        CHECK(cc.count() == ref_count);
      }
  }
}

namespace {

struct LabelFixture {
  GridSpec spec = GridSpec::make(Vec3(-4, -4, -2), Vec3(8, 8, 4), 0.2);
  PinholeCamera cam = PinholeCamera::from_fov(40, 40, 1.5707963267948966, 0.0, 0.0);
  RayBatch lidar;
  LabelFixture() {
    lidar.kind = RayKind::Lidar;
    lidar.frame = 0;
  }
  void add_endpoint(const Vec3& p) {
    Ray r;
    r.origin = Vec3::Zero();
    r.dir = p.normalized();
    r.gt_range = p.norm();
    lidar.rays.push_back(r);
  }
  Mask full_mask(double conf) const {
    Mask m;
    m.width = cam.width;
    m.height = cam.height;
    m.confidence = conf;
    m.pixels.assign(static_cast<std::size_t>(m.width) * m.height, 1);
    return m;
  }
};

}  // namespace

TEST_CASE("ray classification from masks") {
  LabelFixture f;
  for (int i = 0; i < 10; ++i) f.add_endpoint(Vec3(3.0, -0.5 + 0.1 * i, 0.0));  // 10-voxel line
  f.add_endpoint(Vec3(3.0, 1.5, 1.0));  // detached pair
  f.add_endpoint(Vec3(3.0, 1.6, 1.0));
  std::vector<RayBatch> batches = {f.lidar};

  SUBCASE("no masks: all static") {
    const auto st = classify_rays(batches, MaskSet{}, {f.cam}, f.spec);
    CHECK(st.static_rays == 12);
    for (const auto& r : batches[0].rays) CHECK(r.label == RayLabel::Static);
  }
  SUBCASE("smaller cluster demoted") {
    MaskSet masks;
    masks.masks.push_back(f.full_mask(0.9));
    const auto st = classify_rays(batches, masks, {f.cam}, f.spec);
    CHECK(st.dynamic_rays == 10);
    CHECK(st.demoted == 2);
    for (int i = 0; i < 10; ++i) CHECK(batches[0].rays[i].label == RayLabel::Dynamic);
    CHECK(batches[0].rays[10].label == RayLabel::Static);
    CHECK(batches[0].rays[11].label == RayLabel::Static);
  }
  SUBCASE("single cluster keeps everything") {
    batches[0].rays.resize(10);
    MaskSet masks;
    masks.masks.push_back(f.full_mask(0.9));
    const auto st = classify_rays(batches, masks, {f.cam}, f.spec);
    CHECK(st.dynamic_rays == 10);
    CHECK(st.demoted == 0);
  }
  SUBCASE("intermediate confidence discards") {
    MaskSet masks;
    masks.masks.push_back(f.full_mask(0.4));
    const auto st = classify_rays(batches, masks, {f.cam}, f.spec);
    CHECK(st.discarded == 12);
  }
  SUBCASE("misses and unseen endpoints are discarded") {
    batches[0].rays.resize(1);
    f.add_endpoint(Vec3(-3.0, 0.0, 0.0));  // behind the camera
    batches[0].rays.push_back(f.lidar.rays.back());
    Ray miss;
    miss.gt_range = std::nan("");
    batches[0].rays.push_back(miss);
    const auto st = classify_rays(batches, MaskSet{}, {f.cam}, f.spec);
    CHECK(st.static_rays == 1);
    CHECK(st.discarded == 2);
  }
}

TEST_CASE("oracle masks cover exactly the mover pixels") {
  const SceneDescription s = default_scene(1);
  BatchOptions opt;
  const auto batches = make_batches(s.oracle(), s.rig, opt);
  const MaskSet masks = masks_from_oracle(batches, 0.9);
  REQUIRE_FALSE(masks.masks.empty());
  for (const auto& m : masks.masks) {
    CHECK(m.confidence == 0.9);
    for (const auto& b : batches) {
      if (b.kind != RayKind::Camera || b.camera != m.camera || b.frame != m.frame) continue;
      for (const auto& r : b.rays) CHECK(m.covers(r.pixel_u, r.pixel_v) == (r.gt_object == m.instance));
    }
  }
}
