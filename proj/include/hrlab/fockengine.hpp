#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "hrlab/common.hpp"
#include "hrlab/spmodel.hpp"

namespace hrlab::fock {

using CMat = Eigen::MatrixXcd;
using CVecE = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

// Matrix permanent. Enumeration for n <= 5, Ryser for 6 <= n <= 12.
cplx perm(const CMat& g);
cplx perm_enumerate(const CMat& g);
cplx perm_ryser(const CMat& g);

using FactorPtr = std::shared_ptr<const spmodel::SPVector>;

// coeff * a*(f_1) ... a*(f_n) Omega
struct ProductTerm {
  cplx coeff = 1.0;
  std::vector<FactorPtr> factors;
  std::size_t n() const { return factors.size(); }
};

struct EngineLimits {
  int n_max = 6;
  std::size_t term_threshold = 512;
  double tol_modes = 1e-6;
};

class SectorState {
 public:
  SectorState() = default;
  explicit SectorState(EngineLimits limits) : limits_(limits) {}
  static SectorState vacuum(EngineLimits limits = {});

  const std::vector<ProductTerm>& terms() const { return terms_; }
  std::vector<ProductTerm>& terms() { return terms_; }
  const EngineLimits& limits() const { return limits_; }
  // Norm dropped by particle-number truncation so far (triangle-inequality accumulation).
  double discarded_norm() const { return discarded_; }
  void add_discarded(double x) { discarded_ += x; }
  int max_particles() const;

  void add_term(ProductTerm t) { terms_.push_back(std::move(t)); }
  SectorState& operator+=(const SectorState& o);
  SectorState& operator*=(cplx c);

 private:
  EngineLimits limits_;
  std::vector<ProductTerm> terms_;
  double discarded_ = 0.0;
};

SectorState operator+(SectorState a, const SectorState& b);
SectorState operator-(SectorState a, const SectorState& b);
SectorState operator*(cplx c, SectorState a);

cplx state_inner(const SectorState& a, const SectorState& b);
double vec_norm(const SectorState& a);

SectorState apply_creator(const FactorPtr& psi, const SectorState& s);
SectorState apply_annihilator(const spmodel::SPVector& psi, const SectorState& s);
// sum_n c_n h_n(Phi_S(psi) / sigma), h_n orthonormal Hermite for N(0, 1), sigma = ||psi|| / sqrt 2.
SectorState apply_segal_poly(const RVec& hermite_coeffs, const FactorPtr& psi, const SectorState& s);
// Wick-ordered coefficient b_{jl} of a*(psi)^j a(psi)^l in the expansion above.
double wick_coefficient(const RVec& hermite_coeffs, double sigma, int j, int l);
SectorState project_out_vacuum(const SectorState& s);
// Component with exactly n particles.
SectorState sector(const SectorState& s, std::size_t n);

class ModeBasis {
 public:
  ModeBasis(const std::vector<spmodel::SPVector>& vectors, double tol_modes);

  std::size_t size() const { return modes_.size(); }
  const std::vector<spmodel::SPVector>& modes() const { return modes_; }
  // <e_i, v>
  CVecE coefficients(const spmodel::SPVector& v) const;
  spmodel::SPVector reconstruct(const CVecE& c) const;
  // Worst relative reconstruction residual over the input vectors.
  double max_residual() const { return max_residual_; }
  const RVec& gram_spectrum() const { return spectrum_; }

 private:
  std::vector<spmodel::SPVector> modes_;
  RVec spectrum_;
  double max_residual_ = 0.0;
};

// Re-expand every factor in a shared mode basis and merge equal mode multisets. The projection
// loss is bounded by sqrt(n!) sum_r ||f_r - P f_r|| prod_{s != r} ||f_s|| per term and added to
// the discarded norm.
SectorState compress(const SectorState& s, double tol_modes);
// ||a - b|| with the cancellation done on merged mode coefficients rather than on the Gram form;
// error bounds the mode projection loss.
struct Distance {
  double value = 0.0;
  double error = 0.0;
};
Distance state_distance(const SectorState& a, const SectorState& b, double tol_modes = 1e-14);

enum class Truncation {
  total,     // sum of occupations <= n_max, dimension C(M + n_max, n_max)
  per_mode,  // every occupation <= n_max, dimension (n_max + 1)^M; functions of distinct modes commute
};

// Truncated Fock space over M orthonormal modes.
class FockSpace {
 public:
  FockSpace(int modes, int n_max, std::size_t dim_budget = 4000, Truncation kind = Truncation::total);

  int modes() const { return modes_; }
  int n_max() const { return n_max_; }
  Truncation truncation() const { return kind_; }
  std::size_t dim() const { return states_.size(); }
  const std::vector<std::vector<int>>& occupations() const { return states_; }
  std::size_t index_of(const std::vector<int>& occ) const;
  int particles(std::size_t idx) const;

  // a_i as a sparse dim x dim matrix.
  const SpMat& annihilator(int i) const { return ann_[i]; }
  // a(v) = sum conj(c_i) a_i for coefficients c_i = <e_i, v>.
  SpMat annihilator(const CVecE& c) const;
  SpMat creator(const CVecE& c) const;
  CMat segal(const CVecE& c) const;
  CVecE vacuum() const;
  CMat identity() const;

 private:
  int modes_, n_max_;
  Truncation kind_;
  std::vector<std::vector<int>> states_;
  std::vector<SpMat> ann_;
};

// g applied to a Hermitian matrix through its eigendecomposition.
CMat hermitian_function(const CMat& h, const std::function<double(double)>& g);
double op_norm(const CMat& a);
double hermiticity_defect(const CMat& a);

// Dense vector of a term-algebra state (every factor expanded in `basis`).
CVecE to_dense(const SectorState& s, const ModeBasis& basis, const FockSpace& space);

// Sum over term pairs and permutations of w(p_1 + ... + p_n) prod rho_{i, pi(i)}(p_i); n <= 3.
using EnergyMomentumWeight = std::function<double(double omega, std::span<const double> k)>;
cplx spectral_pairing(const SectorState& a, const SectorState& b, const EnergyMomentumWeight& w);

}  // namespace hrlab::fock
