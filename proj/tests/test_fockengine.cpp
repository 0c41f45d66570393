#include <doctest.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <random>

#include "hrlab/fockengine.hpp"

using namespace hrlab;
using namespace hrlab::fock;
using spmodel::SPVector;

namespace {

spmodel::SpacePtr small_space() {
  static auto sp = std::make_shared<spmodel::SPSpace>(wavepacket::Lattice{1, 64, 0.25},
                                                      spmodel::SpectralMeasure::atom_only(1.0));
  return sp;
}

FactorPtr random_vector(std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  SPVector v(small_space());
  const auto& sp = *small_space();
  // smooth random profile on a band of momenta
  const double c = g(rng), d = g(rng), e = g(rng), f = g(rng);
  for (std::size_t i = 0; i < sp.n_k(); ++i) {
    const double k = sp.k(i)[0];
    const double env = std::exp(-sq(k - 0.5 * c));
    v[i] = scale * env * cplx(d + e * k, f - 0.3 * k * k);
  }
  return std::make_shared<const SPVector>(std::move(v));
}

// Vacuum expectation of a word in creators/annihilators by commuting annihilators to the right.
struct Op {
  bool create;
  const SPVector* v;
};

cplx ccr_expectation(std::vector<Op> ops) {
  if (ops.empty()) return 1.0;
  if (!ops.back().create || ops.front().create) return 0.0;
  // rightmost annihilator with a creator to its right
  for (std::size_t i = ops.size() - 1; i-- > 0;) {
    if (!ops[i].create && ops[i + 1].create) {
      std::vector<Op> contracted;
      for (std::size_t j = 0; j < ops.size(); ++j)
        if (j != i && j != i + 1) contracted.push_back(ops[j]);
      std::vector<Op> swapped = ops;
      std::swap(swapped[i], swapped[i + 1]);
      return spmodel::inner(*ops[i].v, *ops[i + 1].v) * ccr_expectation(contracted) + ccr_expectation(swapped);
    }
  }
  return 0.0;
}

SectorState create_all(const std::vector<FactorPtr>& fs, EngineLimits lim = {}) {
  SectorState s = SectorState::vacuum(lim);
  for (auto it = fs.rbegin(); it != fs.rend(); ++it) s = apply_creator(*it, s);
  return s;
}

// Probabilists' Hermite polynomials normalized in N(0,1).
double hermite_orthonormal(int n, double x) {
  double h0 = 1, h1 = x;
  if (n == 0) return 1;
  for (int k = 1; k < n; ++k) {
    const double h2 = x * h1 - k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1 / std::sqrt(std::tgamma(n + 1.0));
}

}  // namespace

TEST_CASE("permanents") {
  CHECK(std::abs(perm(CMat::Identity(3, 3)) - 1.0) < 1e-15);
  CHECK(std::abs(perm(CMat::Ones(3, 3)) - 6.0) < 1e-13);
  CHECK(std::abs(perm(CMat(0, 0)) - 1.0) < 1e-15);
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  for (int n = 1; n <= 8; ++n) {
    CMat m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = {g(rng), g(rng)};
    const cplx a = perm_enumerate(m), b = perm_ryser(m);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
  CHECK(std::abs(perm(CMat::Ones(7, 7)) - 5040.0) < 1e-8);
  CHECK_THROWS_AS(perm(CMat::Ones(13, 13)), SizeError);
}

TEST_CASE("state inner products") {
  std::mt19937 rng(2);
  auto vac = SectorState::vacuum();
  CHECK(std::abs(state_inner(vac, vac) - 1.0) < 1e-15);
  auto p = random_vector(rng), q = random_vector(rng);
  CHECK(std::abs(state_inner(create_all({p}), create_all({q})) - spmodel::inner(*p, *q)) < 1e-13);
  CHECK(std::abs(state_inner(create_all({p}), vac)) == 0.0);
  CHECK(vec_norm(create_all({p})) == doctest::Approx(p->norm()));
  CHECK(vec_norm(create_all({p, p})) == doctest::Approx(std::sqrt(2.0) * sq(p->norm())));

  for (int n = 1; n <= 3; ++n) {
    std::vector<FactorPtr> a, b;
    for (int i = 0; i < n; ++i) {
      a.push_back(random_vector(rng));
      b.push_back(random_vector(rng));
    }
    std::vector<Op> word;
    for (int i = 0; i < n; ++i) word.push_back({false, a[i].get()});
    for (int i = n - 1; i >= 0; --i) word.push_back({true, b[i].get()});
    const cplx ref = ccr_expectation(word);
    const cplx got = state_inner(create_all(a), create_all(b));
    CHECK(std::abs(got - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("creators and annihilators") {
  std::mt19937 rng(3);
  auto p = random_vector(rng), q = random_vector(rng);
  auto vac = SectorState::vacuum();
  CHECK(apply_annihilator(*p, vac).terms().empty());
  // (a(p) a*(q) - a*(q) a(p)) s = <p,q> s on a random 2-particle state
  auto s = create_all({random_vector(rng), random_vector(rng)}) + create_all({random_vector(rng)});
  auto lhs = apply_annihilator(*p, apply_creator(q, s)) - apply_creator(q, apply_annihilator(*p, s));
  const double scale = vec_norm(s) * p->norm() * q->norm();
  CHECK(state_distance(lhs, spmodel::inner(*p, *q) * s).value <= 1e-10 * scale);
  // [a*, a*] = 0 and [a, a] = 0
  CHECK(state_distance(apply_creator(p, apply_creator(q, s)), apply_creator(q, apply_creator(p, s))).value <=
        1e-10 * scale);
  CHECK(state_distance(apply_annihilator(*p, apply_annihilator(*q, s)), apply_annihilator(*q, apply_annihilator(*p, s)))
            .value <= 1e-10 * scale);
}

TEST_CASE("truncation is reported") {
  std::mt19937 rng(4);
  EngineLimits lim;
  lim.n_max = 2;
  auto p = random_vector(rng);
  auto s = create_all({p, p}, lim);
  CHECK(s.discarded_norm() == 0.0);
  auto t = apply_creator(p, s);
  CHECK(t.terms().empty());
  CHECK(t.discarded_norm() == doctest::Approx(std::sqrt(6.0) * std::pow(p->norm(), 3)));
}

TEST_CASE("Segal polynomials") {
  std::mt19937 rng(5);
  auto p = random_vector(rng);
  auto vac = SectorState::vacuum();
  const double sigma = p->norm() / std::sqrt(2.0);
  auto same = apply_segal_poly({1.0}, p, vac);
  CHECK(vec_norm(same - vac) < 1e-14);
  // degree one with c_1 = sigma is Phi_S(p); on the vacuum it gives a*(p) Omega / sqrt 2
  auto lin = apply_segal_poly({0.0, sigma}, p, vac);
  CHECK(vec_norm(lin - (1.0 / std::sqrt(2.0)) * create_all({p})) < 1e-13);

  std::normal_distribution<double> g;
  RVec odd(6, 0.0);
  for (int n = 1; n <= 5; n += 2) odd[n] = g(rng);
  auto r = apply_segal_poly(odd, p, vac);
  CHECK(std::abs(state_inner(vac, r)) < 1e-12);
  // orthonormality in the vacuum gaussian: ||g(Phi) Omega||^2 = sum c_n^2
  RVec c(6);
  for (auto& x : c) x = g(rng);
  auto full = apply_segal_poly(c, p, vac);
  double ref = 0;
  for (double x : c) ref += x * x;
  CHECK(sq(vec_norm(full)) == doctest::Approx(ref).epsilon(1e-10));
  CHECK(state_inner(vac, full).real() == doctest::Approx(c[0]).epsilon(1e-12));
}

TEST_CASE("project out vacuum") {
  std::mt19937 rng(6);
  auto vac = SectorState::vacuum();
  CHECK(project_out_vacuum(vac).terms().empty());
  auto two = create_all({random_vector(rng), random_vector(rng)});
  CHECK(vec_norm(project_out_vacuum(two) - two) == 0.0);
  auto mixed = two + cplx(0.3, 0.1) * vac;
  CHECK(std::abs(state_inner(vac, project_out_vacuum(mixed))) < 1e-12);
}

TEST_CASE("mode basis") {
  std::mt19937 rng(7);
  auto p = random_vector(rng), q = random_vector(rng);
  ModeBasis two({*p, *q}, 1e-10);
  CHECK(two.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(std::abs(spmodel::inner(two.modes()[i], two.modes()[j]) - (i == j ? 1.0 : 0.0)) < 1e-10);
  ModeBasis dup({*p, *p, 2.0 * *p}, 1e-10);
  CHECK(dup.size() == 1);
  CHECK(dup.max_residual() < 1e-10);
  ModeBasis ortho(two.modes(), 1e-10);
  REQUIRE(ortho.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto c = ortho.coefficients(two.modes()[i]);
    CHECK(std::abs(std::abs(c(static_cast<Eigen::Index>(i))) - 1.0) < 1e-10);
  }

  // translates along a ray share few effective modes
  auto sp = std::make_shared<spmodel::SPSpace>(wavepacket::Lattice{1, 256, 0.1}, spmodel::SpectralMeasure::atom_only(1.0));
  auto f = spmodel::TestFunction::separable({0, 1, 8, 1}, {{0, 1, 8, 1}});
  auto psi = spmodel::embed_test_function(f, sp);
  std::vector<SPVector> ray;
  for (int i = 0; i < 40; ++i) ray.push_back(spmodel::translate(psi, {0.05 * i, {0.025 * i}}));
  ModeBasis rb(ray, 1e-8);
  CHECK(rb.size() < 20);
  CHECK(rb.max_residual() < 1e-3);
}

TEST_CASE("compression keeps the state") {
  std::mt19937 rng(8);
  std::vector<FactorPtr> fs;
  for (int i = 0; i < 3; ++i) fs.push_back(random_vector(rng));
  SectorState s;
  s = SectorState::vacuum();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += cplx(i + 1, j) * create_all({fs[i], fs[j]});
  auto c = compress(s, 1e-12);
  CHECK(c.terms().size() <= 1 + 6);
  CHECK(state_distance(c, s).value < 1e-10 * vec_norm(s));
  CHECK(c.discarded_norm() < 1e-10 * vec_norm(s));
  // weak form against an independent state
  auto probe = create_all({random_vector(rng), random_vector(rng)});
  CHECK(std::abs(state_inner(probe, c) - state_inner(probe, s)) < 1e-10 * vec_norm(probe) * vec_norm(s));
}

TEST_CASE("dense engine: oscillator structure and CCR") {
  FockSpace one(1, 6);
  CVecE e1(1);
  e1 << 1.0;
  CMat x = one.segal(e1);
  for (int n = 1; n <= 6; ++n) CHECK(std::abs(x(n - 1, n) - std::sqrt(n / 2.0)) < 1e-15);
  CHECK(hermiticity_defect(x) < 1e-14);

  FockSpace three(3, 4);
  CHECK(three.dim() == 35);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CMat ai = three.annihilator(i), aj = three.annihilator(j);
      CMat comm = ai * aj.adjoint() - aj.adjoint() * ai;
      CMat aa = ai * aj - aj * ai;
      for (std::size_t s = 0; s < three.dim(); ++s) {
        if (three.particles(s) >= 4) continue;  // the top level is cut by truncation
        CVecE v = CVecE::Zero(35);
        v(static_cast<Eigen::Index>(s)) = 1.0;
        CHECK((comm * v - (i == j ? 1.0 : 0.0) * v).norm() < 1e-12);
        CHECK((aa * v).norm() < 1e-12);
      }
    }
  CHECK(op_norm(three.identity()) == doctest::Approx(1.0));
  CMat r = CMat::Random(5, 5);
  CHECK(op_norm(r.adjoint() * r) == doctest::Approx(sq(op_norm(r))));
  CHECK_THROWS_AS(FockSpace(20, 6), SizeError);
}

TEST_CASE("dense functional calculus against Gauss-Hermite quadrature") {
  FockSpace one(1, 60);
  CVecE e1(1);
  e1 << 1.0;
  auto g = [](double x) { return std::cos(1.3 * x) * std::exp(-0.2 * x * x); };
  CMat gx = hermitian_function(one.segal(e1), g);
  const cplx got = gx(0, 0);
  // vacuum variance of Phi_S(e1) is 1/2
  gsl_integration_fixed_workspace* w = gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, 200, 0.0, 1.0, 0.0, 0.0);
  gsl_function fn{[](double x, void*) {
                    const double y = x;  // weight e^{-x^2}: variance 1/2
                    return std::cos(1.3 * y) * std::exp(-0.2 * y * y);
                  },
                  nullptr};
  double ref = 0;
  gsl_integration_fixed(&fn, &ref, w);
  gsl_integration_fixed_free(w);
  ref /= std::sqrt(kPi);
  CHECK(std::abs(got - ref) < 1e-8);
}

TEST_CASE("commuting modes give commuting functions") {
  FockSpace two(2, 8, 4000, Truncation::per_mode);
  CHECK(two.dim() == 81);
  CVecE a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  auto g1 = [](double x) { return std::tanh(x); };
  auto g2 = [](double x) { return x * std::exp(-x * x); };
  CMat A = hermitian_function(two.segal(a), g1), B = hermitian_function(two.segal(b), g2);
  CHECK(op_norm(A * B - B * A) <= 1e-10 * op_norm(A) * op_norm(B));
}

TEST_CASE("term algebra and dense engine agree") {
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  for (int scenario = 0; scenario < 6; ++scenario) {
    const int m = 1 + scenario % 3;
    std::vector<FactorPtr> fs;
    std::vector<SPVector> raw;
    for (int i = 0; i < m; ++i) {
      fs.push_back(random_vector(rng, 0.7));
      raw.push_back(*fs.back());
    }
    ModeBasis basis(raw, 1e-12);
    FockSpace space(static_cast<int>(basis.size()), 4);
    EngineLimits lim;
    lim.n_max = 4;
    // X_1 X_2 Omega with Hermite polynomials of total degree <= 4
    RVec c1{g(rng), g(rng), g(rng)}, c2{g(rng), g(rng)};
    auto p1 = fs[0], p2 = fs[scenario % m];
    auto term = apply_segal_poly(c1, p1, apply_segal_poly(c2, p2, SectorState::vacuum(lim)));
    auto dense_poly = [&](const RVec& c, const FactorPtr& p) {
      const double sigma = p->norm() / std::sqrt(2.0);
      return hermitian_function(space.segal(basis.coefficients(*p)), [&](double x) {
        double v = 0;
        for (std::size_t n = 0; n < c.size(); ++n) v += c[n] * hermite_orthonormal(static_cast<int>(n), x / sigma);
        return v;
      });
    };
    CVecE dense = dense_poly(c1, p1) * (dense_poly(c2, p2) * space.vacuum());
    CVecE conv = to_dense(term, basis, space);
    CHECK((dense - conv).norm() <= 1e-8 * std::max(1.0, dense.norm()));
    const cplx vac_term = state_inner(SectorState::vacuum(lim), term);
    CHECK(std::abs(vac_term - dense(0)) <= 1e-8 * std::max(1.0, std::abs(dense(0))));
  }
}

TEST_CASE("spectral pairing") {
  std::mt19937 rng(10);
  auto p = random_vector(rng), q = random_vector(rng), r = random_vector(rng), s = random_vector(rng);
  auto one = [](double, std::span<const double>) { return 1.0; };
  auto none = [](double w, std::span<const double>) { return w < 0 ? 1.0 : 0.0; };
  for (int n = 0; n <= 3; ++n) {
    std::vector<FactorPtr> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = random_vector(rng);
      b[i] = random_vector(rng);
    }
    auto sa = create_all(a), sb = create_all(b);
    const cplx ref = state_inner(sa, sb);
    CHECK(std::abs(spectral_pairing(sa, sb, one) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    CHECK(spectral_pairing(sa, sb, none) == 0.0);
  }
  CHECK_THROWS_AS(spectral_pairing(create_all({p, q, r, s}), create_all({p, q, r, s}), one), SizeError);

  // half-space w < c against a direct sum over the two-particle tensor grid
  const double cut = 2.6;
  auto half = [cut](double w, std::span<const double>) { return w < cut ? 1.0 : 0.0; };
  auto sa = create_all({p, q}), sb = create_all({r, s});
  const auto& sp = *small_space();
  cplx ref = 0;
  for (std::size_t i = 0; i < sp.size(); ++i)
    for (std::size_t j = 0; j < sp.size(); ++j) {
      if (sp.omega(i) + sp.omega(j) >= cut) continue;
      const cplx psi = (*p)[i] * (*q)[j] + (*q)[i] * (*p)[j];
      const cplx phi = (*r)[i] * (*s)[j] + (*s)[i] * (*r)[j];
      ref += 0.5 * std::conj(psi) * phi * sp.weight(i) * sp.weight(j);
    }
  CHECK(std::abs(spectral_pairing(sa, sb, half) - ref) < 1e-10 * std::max(1.0, std::abs(ref)));
}
