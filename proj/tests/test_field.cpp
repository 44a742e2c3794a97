#include <cmath>
#include <random>

#include <doctest.h>

#include "occflow/autodiff.hpp"
#include "occflow/field.hpp"
#include "occflow/grid.hpp"

using namespace occflow;
using doctest::Approx;

TEST_CASE("trilinear sampling") {
  const GridSpec spec = GridSpec::make(Vec3::Zero(), Vec3(1.0, 1.0, 1.0), 0.25);
  SUBCASE("constant grid") {
    ScalarGrid3 g(spec, 2.0);
    CHECK(g.sample(Vec3(0.31, 0.77, 0.05)) == Approx(2.0));
    CHECK(g.sample(Vec3(-5.0, 9.0, 0.5)) == Approx(2.0));
  }
  SUBCASE("cell centers reproduce stored values") {
    ScalarGrid3 g(spec);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : g.values()) v = u(rng);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          CHECK(g.sample(spec.cell_center(i, j, k)) == Approx(g.at(i, j, k)).epsilon(1e-12));
  }
  SUBCASE("2x2x2 midpoint between opposite x faces") {
    const GridSpec s2 = GridSpec::make(Vec3::Zero(), Vec3(2.0, 2.0, 2.0), 1.0);
    ScalarGrid3 g(s2);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) g.at(1, j, k) = 1.0;
    CHECK(g.sample(Vec3(1.0, 1.0, 1.0)) == Approx(0.5));
  }
  SUBCASE("affine field is reproduced inside the center hull") {
    ScalarGrid3 g(spec);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) {
          const Vec3 c = spec.cell_center(i, j, k);
          g.at(i, j, k) = 0.3 * c.x() - 1.2 * c.y() + 0.7 * c.z() + 0.1;
        }
    const Vec3 x(0.4, 0.6, 0.3);
    CHECK(g.sample(x) == Approx(0.3 * 0.4 - 1.2 * 0.6 + 0.7 * 0.3 + 0.1).epsilon(1e-12));
  }
}

TEST_CASE("GridSpec rejects degenerate volumes") {
  CHECK_THROWS_AS(GridSpec::make(Vec3::Zero(), Vec3::Ones(), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec::make(Vec3::Zero(), Vec3(0.1, 1.0, 1.0), 0.2), std::invalid_argument);
}

TEST_CASE("occupancy and rendering sigmoids") {
  CHECK(sigmoid_occ<double>(0.0, 10.0) == Approx(0.5));
  CHECK(sigmoid_occ<double>(1e3, 10.0) == Approx(0.0));
  CHECK(sigmoid_occ<double>(-1e3, 10.0) == Approx(1.0));
  CHECK(sigmoid_occ<double>(-0.2, 10.0) == Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(sigmoid_occ<double>(-0.2, 10.0) == Approx(0.88080).epsilon(1e-5));
  CHECK(sigmoid_render<double>(0.2, 10.0) == Approx(0.88080).epsilon(1e-5));
  // No overflow in the tails.
  CHECK(std::isfinite(sigmoid_occ<double>(-1e308, 1e10)));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(800.0) == Approx(800.0));
}

TEST_CASE("smooth minimum") {
  SharpnessParams p;
  SUBCASE("symmetric case") {
    p.a = 10.0;
    p.tau = 2.0;
    CHECK(blend_sdf(0.7, 0.7, p) == Approx(0.7 - std::log(2.0) / 5.0).epsilon(1e-12));
  }
  SUBCASE("dominant term") {
    p.a = 100.0;
    p.tau = 2.0;
    CHECK(std::abs(blend_sdf(0.0, 10.0, p)) < 1e-9);
  }
  SUBCASE("closed form") {
    p.a = 1.0;
    p.tau = 1.0;
    const double expect = -std::log(std::exp(-1.0) + std::exp(-2.0));
    CHECK(blend_sdf(1.0, 2.0, p) == Approx(expect).epsilon(1e-12));
    CHECK(expect == Approx(0.68673).epsilon(1e-5));
  }
  SUBCASE("bounds on random pairs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (double k : {1.0, 10.0, 100.0}) {
      p.tau = 2.0;
      p.a = k * p.tau;
      for (int n = 0; n < 1000; ++n) {
        const double x = u(rng), y = u(rng);
        const double b = blend_sdf(x, y, p);
        CHECK(b <= std::min(x, y));
        CHECK(b >= std::min(x, y) - std::log(2.0) / k);
      }
    }
  }
  CHECK_THROWS_AS((SharpnessParams{0.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((SharpnessParams{1.0, -1.0}.validate()), std::invalid_argument);
}

TEST_CASE("tape gradients of composite expressions") {
  ad::Tape tape;
  const ad::Var x = tape.param(0.3, 0), y = tape.param(-1.1, 1);
  const ad::Var f = ad::exp(x * y) + ad::sqrt(x * x + ad::Var(1.0)) / (y - ad::Var(2.0)) +
                    softplus(ad::Var(3.0) * x) - sigmoid(y);
  ad::GradEntries g;
  tape.backward(f, 1.0, g);
  double gx = 0.0, gy = 0.0;
  for (const auto& [id, d] : g) (id == 0 ? gx : gy) += d;
  auto fn = [](double a, double b) {
    return std::exp(a * b) + std::sqrt(a * a + 1.0) / (b - 2.0) + softplus(3.0 * a) - sigmoid(b);
  };
  const double h = 1e-6;
  CHECK(gx == Approx((fn(0.3 + h, -1.1) - fn(0.3 - h, -1.1)) / (2 * h)).epsilon(1e-7));
  CHECK(gy == Approx((fn(0.3, -1.1 + h) - fn(0.3, -1.1 - h)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("Var sampling links the eight corner cells") {
  const GridSpec spec = GridSpec::make(Vec3::Zero(), Vec3::Ones(), 0.25);
  ScalarGrid3 g(spec);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : g.values()) v = u(rng);
  ad::Tape tape;
  const V3<double> x{0.41, 0.52, 0.63};
  const ad::Var s = sample<ad::Var, double>(&tape, g, 10, x);
  CHECK(s.v == Approx(g.sample(to_vec3(x))).epsilon(1e-14));
  ad::GradEntries grad;
  tape.backward(s, 1.0, grad);
  double wsum = 0.0;
  for (const auto& [id, w] : grad) {
    CHECK(id >= 10);
    wsum += w;
  }
  CHECK(grad.size() == 8);
  CHECK(wsum == Approx(1.0));
}

TEST_CASE("grid file round trip") {
  const GridSpec spec = GridSpec::make(Vec3(-1.0, 0.0, 2.0), Vec3(1.0, 2.0, 1.0), 0.5);
  VectorGrid3 g(spec);
  for (std::size_t i = 0; i < g.cells(); ++i) g.set(i, Vec3(0.5 * i, -0.25 * i, 1.0));
  const std::string path = "test_roundtrip.grid";
  write_grid(path, g);
  const VectorGrid3 r = read_vector_grid(path);
  CHECK(r.spec() == spec);
  for (std::size_t i = 0; i < g.cells(); ++i) CHECK((r.at(i) - g.at(i)).norm() == Approx(0.0));
  std::remove(path.c_str());
}
