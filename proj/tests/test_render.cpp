#include <cmath>
#include <cstdio>
#include <random>

#include <doctest.h>

#include "occflow/render.hpp"
#include "occflow/scene.hpp"

using namespace occflow;
using doctest::Approx;

TEST_CASE("uniform ray sampling") {
  const GridSpec spec = GridSpec::make(Vec3::Constant(-6.4), Vec3::Constant(12.8), 0.2);
  const RaySamples s = sample_ray(Vec3::Zero(), Vec3::UnitX(), spec, 5);
  REQUIRE(s.size() == 5);
  const double expect[5] = {0.0, 1.6, 3.2, 4.8, 6.4};
  for (int m = 0; m < 5; ++m) CHECK(s.depths[m] == Approx(expect[m]).epsilon(1e-12));
  CHECK(sample_ray(Vec3(20, 0, 0), Vec3::UnitX(), spec, 5).empty());
  const RaySamples fine = sample_ray(Vec3::Zero(), Vec3::UnitX(), spec, 9);
  CHECK(fine.spacing == Approx(s.spacing / 2));
  CHECK_THROWS_AS(sample_ray(Vec3::Zero(), Vec3::UnitX(), spec, 1), std::invalid_argument);
  // Entry depth for an outside origin.
  const RaySamples out = sample_ray(Vec3(-10, 0, 0), Vec3::UnitX(), spec, 3);
  CHECK(out.depths.front() == Approx(3.6));
  CHECK(out.depths.back() == Approx(16.4));
}

TEST_CASE("NeuS discrete opacity") {
  CHECK(neus_alpha<double>(0.3, 0.3, 10.0) == Approx(0.0));
  const double s = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(neus_alpha<double>(0.2, -0.2, 10.0) == Approx((s - (1 - s)) / s).epsilon(1e-12));
  CHECK(neus_alpha<double>(0.2, -0.2, 10.0) == Approx(0.86467).epsilon(1e-5));
  CHECK(neus_alpha<double>(-0.1, 0.1, 10.0) == 0.0);
  // Saturated sigmoids stay finite and inside [0, 1].
  const double deep = neus_alpha<double>(-50.0, -60.0, 200.0);
  CHECK(std::isfinite(deep));
  CHECK(deep >= 0.0);
  CHECK(deep <= 1.0);
  CHECK(neus_alpha<double>(80.0, -80.0, 200.0) == Approx(1.0));
}

TEST_CASE("compositing") {
  SUBCASE("hand transmittances") {
    // phi values chosen so every alpha equals 0.5: Phi(next) = Phi(cur) / 2.
    const double a = 1.0;
    std::vector<double> phi = {4.0};
    for (int m = 0; m < 3; ++m) {
      const double target = 0.5 / (1.0 + std::exp(-a * phi.back()));
      phi.push_back(-std::log(1.0 / target - 1.0) / a);
    }
    const auto out = composite<double>(phi, {0, 1, 2, 3}, a);
    CHECK(out.alphas[0] == Approx(0.5));
    CHECK(out.alphas[1] == Approx(0.5));
    CHECK(out.trans[0] == Approx(1.0));
    CHECK(out.trans[1] == Approx(0.5));
    CHECK(out.weights[0] == Approx(0.5));
    CHECK(out.weights[1] == Approx(0.25));
    CHECK(out.alphas[3] == 0.0);
  }
  SUBCASE("empty ray") {
    const auto out = composite<double>({5, 5, 5, 5}, {0, 1, 2, 3}, 10.0);
    CHECK(out.weight_sum == Approx(0.0));
    CHECK(out.depth == Approx(0.0));
  }
  SUBCASE("telescoping identity on random alphas") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int n = 0; n < 200; ++n) {
      std::vector<double> phi(32), d(32);
      for (int m = 0; m < 32; ++m) {
        phi[m] = u(rng);
        d[m] = m;
      }
      const auto out = composite<double>(phi, d, 4.0);
      double keep = 1.0;
      for (double al : out.alphas) keep *= 1.0 - al;
      CHECK(std::abs(out.weight_sum - (1.0 - keep)) < 1e-12);
      for (std::size_t m = 1; m < out.trans.size(); ++m) CHECK(out.trans[m] <= out.trans[m - 1]);
    }
  }
}

TEST_CASE("sharp zero crossing renders at the traced surface") {
  const GridSpec spec = GridSpec::make(Vec3::Constant(-3.2), Vec3::Constant(6.4), 0.1);
  ScenePrimitive ball;
  ball.shape = Shape::Sphere;
  ball.radius = 1.5;
  const SceneOracle oracle({ball}, 0.1, spec);
  ScalarGrid3 phi(spec);
  for (int i = 0; i < spec.dims[0]; ++i)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int k = 0; k < spec.dims[2]; ++k)
        phi.at(i, j, k) = oracle.sdf(spec.cell_center(i, j, k), 0.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  int hits = 0, good = 0;
  for (int r = 0; r < 200; ++r) {
    const Vec3 origin(-3.0, 0.4 * n(rng), 0.4 * n(rng));
    const Vec3 dir = (Vec3(0.0, 0.5 * n(rng), 0.5 * n(rng)) - origin).normalized();
    const auto hit = oracle.cast_ray(origin, dir, 0.0);
    if (!hit) continue;
    ++hits;
    const RaySamples s = sample_ray(origin, dir, spec, 256);
    const auto out = render<double>(s, [&](const Vec3& p) { return phi.sample(p); }, 200.0);
    good += std::abs(out.normalized_depth() - hit->range) < s.spacing;
  }
  CHECK(hits > 150);
  CHECK(good >= 0.99 * hits);
}

TEST_CASE("rendered depth gradient matches finite differences") {
  const GridSpec spec = GridSpec::make(Vec3::Zero(), Vec3::Constant(1.6), 0.2);
  ScalarGrid3 phi(spec);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < spec.dims[0]; ++i)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int k = 0; k < spec.dims[2]; ++k)
        phi.at(i, j, k) = spec.cell_center(i, j, k).z() - 0.8 + u(rng);
  const Vec3 origin(0.3, 0.7, 1.55), dir = Vec3(0.3, 0.1, -1.0).normalized();
  const RaySamples s = sample_ray(origin, dir, spec, 48);
  auto depth_of = [&](const ScalarGrid3& g) {
    return render<double>(s, [&](const Vec3& p) { return g.sample(p); }, 12.0).depth;
  };
  ad::Tape tape;
  const auto out = render<ad::Var>(
      s, [&](const Vec3& p) { return sample<ad::Var, double>(&tape, phi, 0, to_v3(p)); },
      ad::Var(12.0));
  ad::GradEntries grad;
  tape.backward(out.depth, 1.0, grad);
  std::vector<double> g(phi.size(), 0.0);
  for (const auto& [id, v] : grad) g[id] += v;
  int checked = 0;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    if (g[idx] == 0.0) continue;
    ScalarGrid3 p = phi, m = phi;
    const double h = 1e-6;
    p[idx] += h;
    m[idx] -= h;
    const double fd = (depth_of(p) - depth_of(m)) / (2 * h);
    CHECK(std::abs(g[idx] - fd) / std::max({std::abs(g[idx]), std::abs(fd), 1e-6}) < 1e-4);
    ++checked;
  }
  CHECK(checked > 8);
}

TEST_CASE("PGM round trip") {
  std::vector<double> v = {0.0, 0.25, 0.5, 1.0, 0.75, 0.125};
  write_pgm("test_img.pgm", 3, 2, v, 0.0, 1.0);
  const GrayImage img = read_pgm("test_img.pgm");
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(img.values[i] == Approx(v[i]).epsilon(0.005));
  std::remove("test_img.pgm");
}
