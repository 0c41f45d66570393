#include <doctest.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <map>
#include <random>

#include "hrlab/spmodel.hpp"

using namespace hrlab;
using namespace hrlab::spmodel;

namespace {

double density(double mu, void* p) {
  const double* par = static_cast<double*>(p);  // m, eps
  return std::pow(std::abs(mu - par[0]), par[1] - 1.0);
}

// Adaptive singular quadrature of the continuous density over [a, b].
double oracle_mass(double m, double eps, double a, double b) {
  double par[2] = {m, eps};
  gsl_function fn{&density, par};
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(1000);
  double res = 0, err = 0;
  if (a < m && b > m) {
    double pts[3] = {a, m, b};
    gsl_integration_qagp(&fn, pts, 3, 0, 1e-10, 1000, w, &res, &err);
  } else {
    gsl_integration_qags(&fn, a, b, 0, 1e-10, 1000, w, &res, &err);
  }
  gsl_integration_workspace_free(w);
  return res;
}

SpacePtr make_space(SpectralMeasure m, int n = 128, double dk = 0.2) {
  return std::make_shared<SPSpace>(wavepacket::Lattice{1, n, dk}, std::move(m), 0.5);
}

TestFunction bump_at(double t0, double x0, double rt = 1.0, double rx = 1.0) {
  return TestFunction::separable({t0, rt, 8, 1.0}, {{x0, rx, 8, 1.0}});
}

}  // namespace

TEST_CASE("mass cells carry the exact singular weight") {
  SpectralMeasure::Options o;
  o.mass = 1.0;
  o.eps = 0.5;
  SpectralMeasure rho(o);
  CHECK(rho.nodes()[rho.atom_index()] == 1.0);
  CHECK(rho.weights()[rho.atom_index()] == 1.0);
  std::map<std::pair<double, double>, double> per_cell;
  for (std::size_t j = 1; j < rho.size(); ++j) {
    auto [a, b] = rho.cells()[j];
    CHECK(rho.weights()[j] > 0);
    CHECK(rho.nodes()[j] > a);
    CHECK(rho.nodes()[j] < b);
    per_cell[rho.cells()[j]] += rho.weights()[j];
  }
  CHECK(per_cell.size() == 6);
  for (auto [cell, w] : per_cell) {
    const double ref = oracle_mass(1.0, 0.5, cell.first, cell.second);
    CHECK(std::abs(w - ref) < 1e-3 * ref);
  }
  double total = 0;
  for (std::size_t j = 1; j < rho.size(); ++j) total += rho.weights()[j];
  CHECK(total == doctest::Approx(oracle_mass(1.0, 0.5, 0.0, 2.0)).epsilon(1e-6));
  CHECK(rho.continuous_mass(0.0, 2.0) == doctest::Approx(total));

  o.alpha = 1;
  SpectralMeasure rho1(o);
  double t1 = 0;
  for (std::size_t j = 1; j < rho1.size(); ++j) t1 += rho1.weights()[j];
  CHECK(t1 == doctest::Approx(total + 5.0));  // Lebesgue on [0, m + 4]
}

TEST_CASE("unshifted lattice refuses near-massless nodes") {
  SpectralMeasure::Options o;
  CHECK_THROWS_AS(SPSpace(wavepacket::Lattice{1, 64, 0.2}, SpectralMeasure(o)), PreconditionError);
  CHECK_NOTHROW(SPSpace(wavepacket::Lattice{1, 64, 0.2}, SpectralMeasure::atom_only(1.0)));
}

TEST_CASE("embedding basics") {
  auto sp = make_space(SpectralMeasure::atom_only(1.0));
  auto zero = embed_test_function(TestFunction::separable({0, 1, 8, 0.0}, {{0, 1, 8, 0.0}}), sp);
  CHECK(zero.norm() == 0.0);

  // real f: f^(-w, -k) = conj f^(w, k)
  auto f = bump_at(0.3, -0.7);
  for (double w : {0.5, 1.3, 2.0})
    for (double k : {-1.0, 0.4}) {
      const double kp[1] = {k}, km[1] = {-k};
      CHECK(std::abs(f.fhat(-w, km) - std::conj(f.fhat(w, kp))) < 1e-14);
    }
}

TEST_CASE("atom-only norm matches an independent one-particle quadrature") {
  auto sp = make_space(SpectralMeasure::atom_only(1.0), 256, 0.1);
  auto f = bump_at(0.2, 0.5, 1.0, 1.5);
  auto psi = embed_test_function(f, sp);
  CHECK(psi.norm() > 0);
  // the bump transform by a fine midpoint sum in position space, integrated over k by a
  // midpoint rule on [-30, 30]
  auto bump_ft = [](double q, double c, double r) {
    const int n = 20000;
    cplx acc = 0;
    for (int i = 0; i < n; ++i) {
      const double u = -r + (i + 0.5) * 2 * r / n;
      acc += std::pow(1 - sq(u / r), 8) * std::exp(kI * q * (u + c));
    }
    return acc * (2 * r / n);
  };
  double ref = 0;
  const int nk = 3000;
  const double h = 60.0 / nk;
  for (int i = 0; i < nk; ++i) {
    const double k = -30 + (i + 0.5) * h;
    const double w = std::sqrt(k * k + 1);
    const cplx fh = bump_ft(w, 0.2, 1.0) * bump_ft(-k, 0.5, 1.5) / (2 * kPi);
    ref += std::norm(fh) / w * h;
  }
  CHECK(std::abs(sq(psi.norm()) - ref) < 1e-6 * ref);
}

TEST_CASE("inner product and translations") {
  SpectralMeasure::Options o;
  auto sp = make_space(SpectralMeasure(o));
  auto a = embed_test_function(bump_at(0, 0), sp);
  auto b = embed_test_function(bump_at(0.5, 1.0), sp);
  CHECK(inner(a, a).real() == doctest::Approx(sq(a.norm())));
  CHECK(std::abs(inner(a, a).imag()) < 1e-14 * sq(a.norm()));
  CHECK(symplectic(a, a) == doctest::Approx(0.0).epsilon(1e-14));

  minkgeom::CausalPoint zero{0, {0}};
  auto a0 = translate(a, zero);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a0[i] == a[i]);

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int r = 0; r < 5; ++r) {
    minkgeom::CausalPoint x{u(rng), {u(rng)}}, mx{-x.t, {-x.x[0]}};
    auto ta = translate(a, x);
    CHECK(ta.norm() == doctest::Approx(a.norm()).epsilon(1e-13));
    auto back = translate(ta, mx);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(back[i] - a[i]));
    CHECK(diff < 1e-13);
    CHECK(std::abs(inner(translate(a, x), translate(b, x)) - inner(a, b)) < 1e-12 * a.norm() * b.norm());
  }
}

TEST_CASE("space-like separated test functions have vanishing symplectic form") {
  SpectralMeasure::Options o;
  for (int alpha : {0, 1}) {
    o.alpha = alpha;
    auto sp = make_space(SpectralMeasure(o), 512, 0.1);
    // supports: double cones of causal radius 1 + 1 around (0, 0) and (0.5, 5)
    auto f1 = bump_at(0, 0), f2 = bump_at(0.5, 5.0);
    minkgeom::DoubleCone c1{{0, {0}}, f1.support_radius()}, c2{{0.5, {5.0}}, f2.support_radius() - 0.5 - 5.0};
    REQUIRE(minkgeom::spacelike_separated(c1, c2).separated);
    auto p1 = embed_test_function(f1, sp), p2 = embed_test_function(f2, sp);
    CHECK(std::abs(symplectic(p1, p2)) <= 1e-8 * p1.norm() * p2.norm());
    // control: time-like neighbours do not commute
    auto p3 = embed_test_function(bump_at(5.0, 0.5), sp);
    CHECK(std::abs(symplectic(p1, p3)) > 1e-4 * p1.norm() * p3.norm());
  }
}

TEST_CASE("spectral filters") {
  SpectralMeasure::Options o;
  auto sp = make_space(SpectralMeasure(o));
  auto psi = embed_test_function(bump_at(0.2, 0.3), sp);
  auto all = spectral_filter(psi, region_all());
  for (std::size_t i = 0; i < psi.size(); ++i) CHECK(all[i] == psi[i]);
  CHECK(spectral_filter(psi, region_energy_below(-1.0)).norm() == 0.0);
  CHECK(spectral_filter(psi, region_empty()).norm() == 0.0);

  auto band = spectral_filter(psi, region_mass_band(1.0 - 1e-12, 1.0 + 1e-12));
  auto sharp = sharp_mass_component(psi);
  for (std::size_t i = 0; i < psi.size(); ++i) CHECK(std::abs(band[i] - sharp[i]) < 1e-15);
  auto twice = sharp_mass_component(sharp);
  for (std::size_t i = 0; i < psi.size(); ++i) CHECK(twice[i] == sharp[i]);
  CHECK(sharp.norm() <= psi.norm());
  CHECK(std::abs(inner(sharp, psi) - inner(sharp, sharp)) < 1e-14 * sq(psi.norm()));

  auto box = region_box(0.0, 2.5, {-1.0}, {2.0});
  minkgeom::CausalPoint x{3.1, {-2.2}};
  auto lhs = translate(spectral_filter(psi, box), x), rhs = spectral_filter(translate(psi, x), box);
  for (std::size_t i = 0; i < psi.size(); ++i) CHECK(lhs[i] == rhs[i]);
  auto filt = spectral_filter(psi, box);
  CHECK(filt.norm() <= psi.norm());
  auto filt2 = spectral_filter(filt, box);
  for (std::size_t i = 0; i < psi.size(); ++i) CHECK(filt2[i] == filt[i]);

  // vector supported off the atom
  auto off = psi - sharp;
  CHECK(sharp_mass_component(off).norm() == 0.0);
}

TEST_CASE("sharp-mass fraction is stable under mass-grid refinement") {
  SpectralMeasure::Options o;
  o.eps = 0.5;
  auto f = bump_at(0.1, 0.2);
  auto frac = [&](int cells, double min_d) {
    o.cells_per_side = cells;
    o.min_distance = min_d;
    auto sp = make_space(SpectralMeasure(o));
    auto psi = embed_test_function(f, sp);
    return sq(sharp_mass_component(psi).norm() / psi.norm());
  };
  const double coarse = frac(3, 0.2), fine = frac(100, 1e-4);
  CHECK(std::abs(coarse - fine) < 1e-3);
}

TEST_CASE("time-zero embedding") {
  SpectralMeasure::Options o;
  auto sp = make_space(SpectralMeasure(o), 256, 0.2);
  ExtendedFunction zero{{{0, 1, 8, 0.0}}, {0, 1, 8, 0.0}};
  auto z = timezero_embed(zero, sp);
  CHECK(z.phi.norm() == 0.0);
  CHECK(z.pi.norm() == 0.0);

  ExtendedFunction g{{{0, 1.0, 8, 1.0}}, {0, 1.0, 8, 1.0}};
  auto v = timezero_embed(g, sp);
  for (std::size_t i = 0; i < v.phi.size(); ++i) CHECK(std::abs(v.pi[i] - kI * sp->omega(i) * v.phi[i]) < 1e-14);
  CHECK(lattice_tail_fraction(v.phi) < 1e-3);
  CHECK(lattice_tail_fraction(v.pi) < 1e-3);
  // real symmetric g: the extended transform is real and even
  for (double k : {0.3, 1.7}) {
    const double kp[1] = {k}, km[1] = {-k};
    CHECK(std::abs(g.fhat(kp, 1.2) - g.fhat(km, 1.2)) < 1e-14);
    CHECK(std::abs(g.fhat(kp, 1.2).imag()) < 1e-14);
  }
}
