#include <doctest.h>
#include <gsl/gsl_integration.h>

#include <cmath>

#include "hrlab/numerics.hpp"
#include "hrlab/rsfamily.hpp"

using namespace hrlab;
using namespace hrlab::rs;

namespace {

spmodel::SpacePtr atom_space(int n = 64, double dk = 0.25) {
  return std::make_shared<spmodel::SPSpace>(wavepacket::Lattice{1, n, dk}, spmodel::SpectralMeasure::atom_only(1.0));
}

// Unit-norm one-particle vector of a local bump.
spmodel::SPVector unit_psi(const spmodel::SpacePtr& sp) {
  const auto f = spmodel::TestFunction::separable({0.0, 0.5, 8, 1.0}, {{0.0, 0.5, 8, 1.0}});
  spmodel::SPVector v = spmodel::embed_test_function(f, sp);
  v *= 1.0 / v.norm();
  return v;
}

struct CoeffParams {
  double gamma, beta, sigma;
  int n;
};

double coeff_integrand(double z, void* p) {
  const auto* c = static_cast<CoeffParams*>(p);
  const double x = c->sigma * z;
  const double g = x * std::exp(-c->beta * std::pow(std::abs(x), 1.0 / c->gamma));
  // physicists' recursion for the orthonormal probabilists' polynomial
  double h0 = 1.0, h1 = z;
  for (int k = 1; k < c->n; ++k) {
    const double h2 = (z * h1 - std::sqrt(static_cast<double>(k)) * h0) / std::sqrt(k + 1.0);
    h0 = h1;
    h1 = h2;
  }
  const double hn = c->n == 0 ? 1.0 : h1;
  return 2.0 * g * hn * std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

// Independent adaptive oracle on [0, inf) for an odd degree.
double oracle_coeff(double gamma, double beta, double sigma, int n) {
  CoeffParams c{gamma, beta, sigma, n};
  gsl_function fn{&coeff_integrand, &c};
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(2000);
  double res = 0, err = 0;
  gsl_integration_qagiu(&fn, 0.0, 1e-14, 1e-13, 2000, w, &res, &err);
  gsl_integration_workspace_free(w);
  return res;
}

RVec log_grid(double lo, double hi, int n) {
  RVec out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

}  // namespace

TEST_CASE("closed-form norm is the supremum of the damped field") {
  CHECK(rs_norm_closed_form(1.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  for (double gamma : {0.5, 1.0, 2.0})
    for (double beta : {1.0, 0.1, 0.01}) {
      // coarse log grid then a fine linear grid around the coarse winner
      auto h = [&](double x) { return x * std::exp(-beta * std::pow(x, 1.0 / gamma)); };
      double best_x = 0, best = 0;
      for (double x : log_grid(1e-6, 1e6, 20001))
        if (h(x) > best) best = h(x), best_x = x;
      for (int i = -2000; i <= 2000; ++i) {
        const double x = best_x * (1.0 + 1e-3 * i / 2000.0);
        best = std::max(best, h(x));
      }
      CHECK(best == doctest::Approx(rs_norm_closed_form(beta, gamma)).epsilon(1e-9));
      CHECK(best <= rs_norm_closed_form(beta, gamma) * (1 + 1e-14));
      CHECK(rs_norm_closed_form(beta / 10, gamma) / rs_norm_closed_form(beta, gamma) ==
            doctest::Approx(std::pow(10.0, gamma)).epsilon(1e-12));
    }
}

TEST_CASE("hermite coefficients: identity, parity and independent oracle") {
  const auto sp = atom_space();
  spmodel::SPVector psi = unit_psi(sp);
  psi *= std::sqrt(2.0);  // sigma = 1
  RSFamilySpec spec = make_spec(psi, 1.0, 7);
  CHECK(spec.sigma() == doctest::Approx(1.0).epsilon(1e-12));

  const HermiteExpansion id = hermite_truncate(spec, 0.0);
  CHECK(id.coeffs[1] == doctest::Approx(1.0).epsilon(1e-12));
  for (int n = 0; n <= 7; ++n)
    if (n != 1) CHECK(std::abs(id.coeffs[n]) < 1e-12);
  CHECK(id.residual < 1e-6);

  const HermiteExpansion h = hermite_truncate(spec, 0.1);
  const HermiteExpansion fine = hermite_truncate(spec, 0.1, false, 40, 160);
  for (int n = 0; n <= 7; ++n) {
    if (n % 2 == 0) {
      CHECK(std::abs(h.coeffs[n]) <= 1e-12);
      continue;
    }
    CHECK(std::abs(h.coeffs[n] - fine.coeffs[n]) < 1e-9);
    CHECK(std::abs(h.coeffs[n] - oracle_coeff(1.0, 0.1, 1.0, n)) < 1e-9);
  }
  for (double gamma : {0.5, 2.0}) {
    RSFamilySpec s2 = make_spec(psi, gamma, 7);
    const HermiteExpansion a = hermite_truncate(s2, 0.05);
    for (int n = 1; n <= 7; n += 2) CHECK(std::abs(a.coeffs[n] - oracle_coeff(gamma, 0.05, 1.0, n)) < 1e-9);
  }
}

TEST_CASE("hermite truncation residual escalates in strict mode") {
  const auto sp = atom_space();
  spmodel::SPVector psi = unit_psi(sp);
  psi *= 4.0;
  RSFamilySpec spec = make_spec(psi, 0.5, 1);
  const HermiteExpansion h = hermite_truncate(spec, 2.0);
  CHECK(h.residual > 0.1);
  CHECK_THROWS_AS(hermite_truncate(spec, 2.0, true), TruncationError);
  CHECK_THROWS_AS(make_spec(psi, 1.0, 6), PreconditionError);
  CHECK_THROWS_AS(make_spec(psi, 0.0, 7), PreconditionError);
}

TEST_CASE("truncated dense norms increase towards the closed form") {
  const auto sp = atom_space();
  RSFamilySpec spec = make_spec(unit_psi(sp), 1.0, 7);
  for (double beta : {0.1, 0.3}) {
    double prev = 0;
    for (int n_max : {8, 12, 16}) {
      const double nrm = rs_dense_norm(spec, beta, n_max);
      CHECK(nrm <= rs_norm_closed_form(beta, 1.0) + 1e-9);
      CHECK(nrm > prev);
      prev = nrm;
    }
  }
}

TEST_CASE("vacuum error vanishes linearly and monotonically") {
  const auto sp = atom_space();
  RSFamilySpec spec = make_spec(unit_psi(sp), 1.0, 7);
  CHECK(vacuum_error(spec, 0.0) == 0.0);
  double prev = 0;
  for (double beta : log_grid(1e-4, 1.0, 12)) {
    const double e = vacuum_error(spec, beta);
    CHECK(e > prev);
    prev = e;
  }
  // leading order: ||X (e^{-beta|X|} - 1)|| ~ beta sqrt(E X^4) = beta sqrt(3) sigma^2
  const double sigma = spec.sigma();
  const double c = std::sqrt(3.0) * sigma * sigma;
  CHECK(vacuum_error(spec, 1e-6) / 1e-6 == doctest::Approx(c).epsilon(1e-4));
  const double r3 = std::abs(vacuum_error(spec, 1e-3) / 1e-3 - c);
  const double r4 = std::abs(vacuum_error(spec, 1e-4) / 1e-4 - c);
  CHECK(r4 < r3);
}

TEST_CASE("term algebra and dense engine agree on A Omega") {
  const auto sp = atom_space();
  const spmodel::SPVector psi = unit_psi(sp);
  RSFamilySpec spec = make_spec(psi, 1.0, 7);
  fock::EngineLimits lim;
  lim.n_max = 8;
  const fock::SectorState vac = fock::SectorState::vacuum(lim);
  for (double beta : {0.05, 0.5}) {
    const fock::SectorState s = rs_apply(spec, beta, vac);
    CHECK(std::abs(fock::state_inner(vac, s)) < 1e-12);
    const HermiteExpansion h = hermite_truncate(spec, beta);
    fock::FockSpace space(1, 12);
    fock::CVecE c(1);
    c(0) = psi.norm();
    const fock::CMat poly =
        fock::hermitian_function(space.segal(c), [&](double x) { return hermite_series(h.coeffs, spec.sigma(), x); });
    const fock::CVecE dense = poly * space.vacuum();
    const fock::ModeBasis basis({psi}, 1e-12);
    const fock::CVecE term = fock::to_dense(s, basis, space);
    CHECK((dense - term).norm() < 1e-8);
  }
}

TEST_CASE("one-particle component of A Omega tends to psi / sqrt 2") {
  const auto sp = atom_space();
  const spmodel::SPVector psi = unit_psi(sp);
  RSFamilySpec spec = make_spec(psi, 1.0, 7);
  const auto ptr = std::make_shared<const spmodel::SPVector>((1.0 / std::sqrt(2.0)) * psi);
  const fock::SectorState ref = fock::apply_creator(ptr, fock::SectorState::vacuum());
  double prev = 1e300;
  for (double beta : {1e-1, 1e-2, 1e-3}) {
    const fock::SectorState one = fock::sector(rs_apply(spec, beta, fock::SectorState::vacuum()), 1);
    const double dist = fock::state_distance(one, ref).value;
    CHECK(dist < prev);
    prev = dist;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("degree recovery after the error rescaling") {
  const auto sp = atom_space();
  const RVec betas = log_grid(1e-3, 1e-1, 8);
  for (double gamma : {0.5, 1.0, 2.0}) {
    RSFamilySpec spec = make_spec(unit_psi(sp), gamma, 7);
    RVec err, nrm;
    for (double b : betas) {
      err.push_back(vacuum_error(spec, b));
      nrm.push_back(rs_norm_closed_form(b, gamma));
    }
    const DegreeFit f = measure_degree(betas, err, nrm);
    CHECK(std::abs(f.gamma_hat - gamma) <= 0.15);
    for (std::size_t i = 0; i < betas.size(); ++i) CHECK(err[i] <= f.beta_prime[i] * (1 + 1e-15));
  }
  const RVec flat(8, 2.0);
  RVec err;
  for (double b : betas) err.push_back(b);
  CHECK(std::abs(measure_degree(betas, err, flat).gamma_hat) < 1e-12);
  RVec bumpy = err;
  bumpy[3] = bumpy[5];
  CHECK_THROWS_AS(measure_degree(betas, bumpy, flat), NumericalError);
  CHECK_THROWS_AS(measure_degree(RVec(betas.begin(), betas.begin() + 5), RVec(err.begin(), err.begin() + 5), RVec(5, 1.0)),
                  NumericalError);
  CHECK_THROWS_AS(measure_degree(log_grid(1e-2, 1e-1, 8), err, flat), NumericalError);
}

TEST_CASE("time derivative ratio: linear oracle and stability") {
  const auto sp = atom_space();
  const spmodel::SPVector psi = unit_psi(sp);
  RSFamilySpec spec = make_spec(psi, 1.0, 7);
  CHECK(uniform_differentiability_ratio(spec, 0.1, 0, 10).ratio == doctest::Approx(1.0).epsilon(1e-12));
  // i[dGamma(omega), Phi(psi)] = Phi(i omega psi); total-number truncation is invariant under mode rotations
  spmodel::SPVector wpsi = psi;
  for (std::size_t i = 0; i < wpsi.size(); ++i) wpsi[i] *= sp->omega(i);
  const DifferentiabilityResult lin = uniform_differentiability_ratio(spec, 0.0, 1, 10);
  CHECK(lin.ratio == doctest::Approx(wpsi.norm() / psi.norm()).epsilon(1e-8));
  CHECK(lin.leakage < 1e-10);
  double lo = 1e300, hi = 0;
  for (double beta : log_grid(1e-3, 1e-1, 5)) {
    const double r = uniform_differentiability_ratio(spec, beta, 2, 10).ratio;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo < 10.0);
}

TEST_CASE("alternating projections") {
  spmodel::SpectralMeasure::Options o;
  o.mass = 1.0;
  o.eps = 0.5;
  const auto sp =
      std::make_shared<spmodel::SPSpace>(wavepacket::Lattice{1, 128, 0.2}, spmodel::SpectralMeasure(o), 0.5);
  DictionarySpec cyl;
  cyl.s_extent = 20.0;
  const auto dict = make_dictionary(cyl, 1);
  CHECK(dict.size() == 80u);

  // target already in the phi span
  spmodel::SPVector in_span = spmodel::timezero_embed(dict[7], sp).phi;
  in_span *= 1.0 / in_span.norm();
  CHECK(alternating_projection(in_span, cyl, 1).residuals[0] < 1e-8);

  // sharp-mass component of a local field
  spmodel::ExtendedFunction g0{{{0.0, 0.5, 8, 1.0}}, {0.0, 0.5, 8, 1.0}, true};
  spmodel::SPVector target = spmodel::sharp_mass_component(spmodel::timezero_embed(g0, sp).phi);
  target *= 1.0 / target.norm();
  const AltProjResult r = alternating_projection(target, cyl, 50);
  for (std::size_t i = 1; i < r.residuals.size(); ++i) CHECK(r.residuals[i] <= r.residuals[i - 1] * (1 + 1e-12));
  CHECK(r.residuals.back() < 0.1);
  MESSAGE("cylinder residual " << r.residuals.back() << " rank " << r.rank_phi << " cond " << r.condition);

  DictionarySpec ball;
  const AltProjResult b = alternating_projection(target, ball, 50);
  for (std::size_t i = 1; i < b.residuals.size(); ++i) CHECK(b.residuals[i] <= b.residuals[i - 1] * (1 + 1e-12));
  MESSAGE("ball residual " << b.residuals.back());
}

TEST_CASE("sharp-mass family: off-atom mass scales like width^eps") {
  spmodel::SpectralMeasure::Options o;
  o.mass = 1.0;
  o.eps = 0.5;
  o.cells_per_side = 40;
  o.min_distance = 1e-7;
  const auto sp =
      std::make_shared<spmodel::SPSpace>(wavepacket::Lattice{1, 64, 0.25}, spmodel::SpectralMeasure(o), 0.5);
  spmodel::SPVector target = spmodel::sharp_mass_component(unit_psi(sp));
  target *= 1.0 / target.norm();
  const RVec betas = log_grid(1e-4, 1e-2, 6);
  RVec frac;
  for (double b : betas) {
    const SharpMassFamily f = gff_sharp_mass_family(target, b);
    frac.push_back(f.off_atom_fraction);
    CHECK(f.sharp_error > 0);
  }
  for (std::size_t i = 1; i < frac.size(); ++i) CHECK(frac[i] > frac[i - 1]);
  const num::LogLogFit fit = num::fit_loglog(betas, frac);
  CHECK(std::abs(fit.slope - 0.5) <= 0.15);

  // continuum oracle at small width: fraction ~ width^eps * 2 int_0^1 bump(u)^2 u^{eps-1} du
  double integral = 0;
  const num::Quadrature q = num::graded_half_line(30, 20, 1.0);
  for (std::size_t i = 0; i < q.nodes.size(); ++i)
    integral += q.weights[i] * sq(num::poly_bump(q.nodes[i], 4)) * std::pow(q.nodes[i], -0.5);
  const double pred = std::sqrt(1e-4) * 2.0 * integral;
  CHECK(frac[0] == doctest::Approx(pred).epsilon(0.05));

  spmodel::SpectralMeasure::Options o1 = o;
  o1.alpha = 1;
  const auto sp1 =
      std::make_shared<spmodel::SPSpace>(wavepacket::Lattice{1, 64, 0.25}, spmodel::SpectralMeasure(o1), 0.5);
  const spmodel::SPVector t1 = spmodel::sharp_mass_component(unit_psi(sp1));
  CHECK_THROWS_AS(gff_sharp_mass_family(t1, 1e-3), PreconditionError);
}
