#include <doctest.h>

#include <cmath>
#include <random>

#include "hrlab/minkgeom.hpp"

using namespace hrlab;
using namespace hrlab::minkgeom;

TEST_CASE("causal norm") {
  CHECK(causal_norm({0, {0}}) == 0.0);
  CHECK(causal_norm({1, {3, 0, 0}}) == doctest::Approx(4.0));
  CHECK(causal_norm({-2, {1, 2, 2}}) == doctest::Approx(5.0));
}

TEST_CASE("causal norm is a norm on random samples") {
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    CausalPoint a{g(rng), {g(rng), g(rng), g(rng)}}, b{g(rng), {g(rng), g(rng), g(rng)}};
    CausalPoint s{a.t + b.t, {a.x[0] + b.x[0], a.x[1] + b.x[1], a.x[2] + b.x[2]}};
    CHECK(causal_norm(s) <= causal_norm(a) + causal_norm(b) + 1e-12);
    const double lam = g(rng);
    CausalPoint la{lam * a.t, {lam * a.x[0], lam * a.x[1], lam * a.x[2]}};
    CHECK(causal_norm(la) == doctest::Approx(std::abs(lam) * causal_norm(a)));
  }
}

TEST_CASE("interval signature") {
  CausalPoint o{0, {0, 0, 0}};
  CHECK(interval(o, o) == 0.0);
  CHECK(interval(o, {1, {0, 0, 0}}) == doctest::Approx(1.0));
  CHECK(interval(o, {1, {2, 0, 0}}) == doctest::Approx(-3.0));
}

// Brute-force sup of the interval over the boundaries of two double cones (1 spatial dimension).
static double sampled_sup(const DoubleCone& a, const DoubleCone& b) {
  auto boundary = [](const DoubleCone& c) {
    std::vector<CausalPoint> pts;
    constexpr int kPerEdge = 400;
    for (int e = 0; e < 4; ++e)
      for (int i = 0; i <= kPerEdge; ++i) {
        const double s = static_cast<double>(i) / kPerEdge;
        const double t = (e < 2 ? 1 : -1) * c.radius * s;
        const double x = (e % 2 ? 1 : -1) * c.radius * (1 - s);
        pts.push_back({c.center.t + t, {c.center.x[0] + x}});
      }
    return pts;
  };
  double best = -1e300;
  for (const auto& p : boundary(a))
    for (const auto& q : boundary(b)) best = std::max(best, interval(p, q));
  return best;
}

TEST_CASE("spacelike separation of double cones") {
  DoubleCone a{{0, {0}}, 1}, b{{0, {10}}, 1};
  CHECK_FALSE(spacelike_separated(a, a).separated);
  auto s = spacelike_separated(a, b);
  CHECK(s.separated);
  // closed-form sup: differences form a double cone of radius 2 around (0, 10); the sup is at (±2, 10) -> 4 - 100
  // or (0, 8) -> -64; the maximum is -64.
  CHECK(s.margin == doctest::Approx(64.0));
  CHECK_FALSE(spacelike_separated(DoubleCone{{5, {0}}, 1}, DoubleCone{{0, {3}}, 1}).separated);
  CHECK(spacelike_separated(a, b).margin == doctest::Approx(spacelike_separated(b, a).margin));

  for (double dx : {4.5, 6.0, 9.0}) {
    DoubleCone c{{0.7, {dx}}, 1.2};
    const auto sep = spacelike_separated(a, c);
    const double sup = sampled_sup(a, c);
    CHECK(sup <= -sep.margin + 1e-9);
    CHECK(sup >= -sep.margin - 1e-9);
  }
}

TEST_CASE("separation is monotone in the radii") {
  for (double r = 0.1; r < 3; r += 0.1) {
    const bool big = spacelike_separated(0.5, 5.0, r + 0.2).separated;
    const bool small = spacelike_separated(0.5, 5.0, r).separated;
    CHECK((!big || small));
  }
}

TEST_CASE("time windows") {
  CHECK(admissible_window(0.0, 50, 1) == 0.0);
  CHECK(admissible_window(0.4 * std::sqrt(2.0), 50, 0.3) == doctest::Approx(2 * admissible_window(0.4, 50, 0.3)));
  CHECK(admissible_window(0.4, 50, 1.0) == doctest::Approx(8.0));
  CHECK(rho_from_separation(0.4, 1.0) == doctest::Approx(0.08));
  CHECK(rho_from_separation(100, 1.0) == doctest::Approx(0.99));
  CHECK(rho_from_separation(1e-6, 1.0) < 1e-9);
}

TEST_CASE("geometric time grid") {
  CHECK_THROWS(geometric_time_grid(10, 0.0, 3));
  auto g = geometric_time_grid(10, 0.1, 2);
  REQUIRE(g.taus.size() == 3);
  CHECK(g.taus[0] == 10.0);
  CHECK(g.taus[1] == doctest::Approx(11.0));
  CHECK(g.taus[2] == doctest::Approx(12.1));
  auto h = geometric_time_grid(-3, 0.25, 20);
  for (std::size_t k = 1; k < h.taus.size(); ++k) CHECK(h.taus[k] / h.taus[k - 1] == doctest::Approx(1.25));
}

TEST_CASE("dominant support cone") {
  DoubleCone region{{0, {0}}, 1};
  auto c0 = dominant_support_cone(region, VelocityCone::ball({0.3}, 0.1), 0.0);
  CHECK(c0.radius == doctest::Approx(1.0));
  CHECK(c0.center.t == 0.0);
  auto c1 = dominant_support_cone(region, VelocityCone::ball({0.3}, 0.0), 7.0);
  CHECK(c1.radius == doctest::Approx(1.0));
  CHECK(c1.center.x[0] == doctest::Approx(2.1));
  auto c2 = dominant_support_cone(region, VelocityCone::ball({0.3}, 0.1), 50.0);
  CHECK(c2.radius == doctest::Approx(6.0));
  CHECK(c2.center.t == doctest::Approx(50.0));
  CHECK(c2.center.x[0] == doctest::Approx(15.0));
}

TEST_CASE("velocity cones") {
  auto u = VelocityCone::interval(-0.2, 0.3);
  CHECK(u.contains({0.0}));
  CHECK(u.distance({0.5}) == doctest::Approx(0.2));
  auto b = u.bounding_ball();
  CHECK(b.center[0] == doctest::Approx(0.05));
  CHECK(b.radius == doctest::Approx(0.25));
  CHECK(u.separation(VelocityCone::interval(0.6, 0.7)) >= 0.0);
}

TEST_CASE("calibrated constant gives separated cones over the window") {
  auto u1 = VelocityCone::interval(-0.6, -0.4), u2 = VelocityCone::interval(0.4, 0.6);
  const double c = calibrate_c_geo(u1, u2, 1.0, 20, 200);
  REQUIRE(c > 0);
  const double d = u1.separation(u2);
  const double rho = rho_from_separation(d, c);
  DoubleCone region{{0, {0}}, 1};
  for (double t1 = 20; t1 <= 200; t1 *= 1.1)
    for (double f = 0; f <= 1; f += 0.1) {
      auto a = dominant_support_cone(region, u1, t1);
      auto b = dominant_support_cone(region, u2, t1 * (1 + f * rho));
      CHECK(spacelike_separated(a, b).separated);
    }
}
