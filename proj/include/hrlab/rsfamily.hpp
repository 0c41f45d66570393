#pragma once

#include <functional>
#include <optional>

#include "hrlab/common.hpp"
#include "hrlab/fockengine.hpp"
#include "hrlab/spmodel.hpp"

namespace hrlab::rs {

// Damped field g_beta(x) = x exp(-beta |x|^{1/gamma}).
struct RSFamilySpec {
  double gamma = 1.0;
  int degree = 7;            // Hermite truncation degree D (odd)
  double region_radius = 1;  // causal radius of the localization region
  spmodel::SPVector psi;     // omega^{-1/2} f^_+ of the local test function

  double sigma() const { return psi.norm() / std::sqrt(2.0); }
  double g(double beta, double x) const;
};

RSFamilySpec make_spec(const spmodel::SPVector& psi, double gamma, int degree = 7, double region_radius = 1.0);

struct HermiteExpansion {
  RVec coeffs;          // c_n = E[g(sigma Z) h_n(Z)], n <= D
  double residual = 0;  // relative L^2(gauss) truncation residual
};

// E[F(Z)], Z ~ N(0, 1), on the graded half-line rule applied to F(z) + F(-z).
double gauss_expectation(const std::function<double(double)>& f, int panels = 40, int per_panel = 16);
// sum_n c_n h_n(x / sigma) with orthonormal probabilists' Hermite h_n.
double hermite_series(const RVec& coeffs, double sigma, double x);

HermiteExpansion hermite_truncate(const RSFamilySpec& spec, double beta, bool strict = false, int panels = 40,
                                  int per_panel = 16);

// sup_x |g_beta(x)| = (gamma / beta)^gamma e^{-gamma}.
double rs_norm_closed_form(double beta, double gamma);
// ||A_beta Omega - phi(f) Omega|| = sqrt(E[(g_beta(X) - X)^2]), X ~ N(0, sigma^2).
double vacuum_error(const RSFamilySpec& spec, double beta);

// Term-algebra action on a state (Hermite polynomial of Phi_S(psi)).
fock::SectorState rs_apply(const RSFamilySpec& spec, double beta, const fock::SectorState& s);
// Dense single-mode matrix g_beta(Phi_S(psi)) on occupations <= n_max (mode e = psi / ||psi||).
fock::CMat rs_dense_single_mode(const RSFamilySpec& spec, double beta, int n_max);
double rs_dense_norm(const RSFamilySpec& spec, double beta, int n_max);

struct DegreeFit {
  double gamma_hat = 0;
  double ci = 0;       // 95% half-width
  double residual = 0;
  RVec beta_prime;     // rescaled parameter beta' = vacuum error
};

// Slope of log ||A|| against log(1 / beta') with beta' = err(beta); needs >= 6 points over >= 2 decades.
DegreeFit measure_degree(const RVec& betas, const RVec& errors, const RVec& norms);

struct DifferentiabilityResult {
  double ratio = 0;
  double leakage = 0;  // relative part of omega * (last Krylov vector) outside the Krylov span
};

// ||ad_H^order (A_beta)|| / ||A_beta|| with H = dGamma(omega) restricted to span{psi, omega psi, ...}.
DifferentiabilityResult uniform_differentiability_ratio(const RSFamilySpec& spec, double beta, int order, int n_max);

struct AltProjResult {
  RVec residuals;      // ||(P_pi^perp P_phi^perp)^N Psi||, N = 1..iterations
  int rank_phi = 0;
  int rank_pi = 0;
  double condition = 0;  // largest / smallest kept Gram eigenvalue
  bool regularized = false;
};

// Orthogonal projection onto the complex span of `dictionary` (Gram eigen-decomposition with cut).
class SpanProjector {
 public:
  SpanProjector(const std::vector<spmodel::SPVector>& dictionary, double rel_cut = 1e-12);
  spmodel::SPVector apply(const spmodel::SPVector& v) const;
  int rank() const { return static_cast<int>(basis_.size()); }
  double condition() const { return condition_; }
  bool regularized() const { return regularized_; }

 private:
  std::vector<spmodel::SPVector> basis_;
  double condition_ = 1;
  bool regularized_ = false;
};

// Bumps on extended (x, s)-space. Ball dictionary: product supports inside the box inscribed in
// the ball |(x, s)| < radius. Cylinder dictionary (s_extent > 0): x-support in the ball, s in
// [-s_extent, s_extent].
struct DictionarySpec {
  double radius = 1.0;
  int x_bumps = 5;             // per spatial axis
  double bump_fraction = 0.6;  // x-bump radius over the x half-extent
  int s_bumps = 16;
  double s_extent = -1;
  int smoothness = 8;
};

std::vector<spmodel::ExtendedFunction> make_dictionary(const DictionarySpec& d, int dim);

AltProjResult alternating_projection(const spmodel::SPVector& target, const DictionarySpec& dict, int iterations);

struct SharpMassFamily {
  spmodel::SPVector vector;  // omega^{-1/2} g^_beta on the measure's nodes
  double width = 0;          // mollifier half-width h(beta) = beta
  double off_atom_fraction = 0;
  double sharp_error = 0;    // ||v - target|| / ||target||
};

// target must live on the atom. Its amplitudes are carried to every mass node and multiplied
// by an even mollifier in mu - m of half-width beta.
SharpMassFamily gff_sharp_mass_family(const spmodel::SPVector& target, double beta, int smoothness = 4);

}  // namespace hrlab::rs
