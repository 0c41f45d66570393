#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hrlab/common.hpp"
#include "hrlab/minkgeom.hpp"
#include "hrlab/wavepacket.hpp"

namespace hrlab::spmodel {

// Mass measure delta_m + |mu - m|^{eps - 1} on [0, m + 1] (+ alpha * Lebesgue up to mu_max),
// discretized into cells with exact integrated weights.
class SpectralMeasure {
 public:
  struct Options {
    double mass = 1.0;
    double eps = 0.5;
    int alpha = 0;
    double mu_max = -1.0;      // alpha = 1 tail end; default mass + 4
    int cells_per_side = 3;    // geometric cells between the atom and distance 1
    double min_distance = 0.2;
    int tail_cells = 4;
    int nodes_per_cell = 2;    // 1: centroid rule, 2: two-point Gauss rule for the cell weight
    bool continuum = true;     // false: pure atom
  };

  explicit SpectralMeasure(const Options& opt);
  static SpectralMeasure atom_only(double mass);

  double mass() const { return mass_; }
  double eps() const { return eps_; }
  int alpha() const { return alpha_; }
  std::size_t size() const { return nodes_.size(); }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  // Cell edges [lo, hi] of every node (the atom has lo = hi = m).
  std::span<const std::pair<double, double>> cells() const { return cells_; }
  std::size_t atom_index() const { return 0; }

  // Exact measure of [a, b] under the continuous part.
  double continuous_mass(double a, double b) const;

 private:
  double mass_, eps_;
  int alpha_;
  double mu_max_;
  RVec nodes_, weights_;
  std::vector<std::pair<double, double>> cells_;
};

// Momentum lattice times mass nodes. omega(j, i) = sqrt(|k_i|^2 + mu_j^2).
// shift moves every lattice point by shift * dk per axis; 0.5 keeps k = 0 off the lattice, which
// the 1/omega weight needs once mass nodes approach 0.
class SPSpace {
 public:
  SPSpace(wavepacket::Lattice grid, SpectralMeasure measure, double shift = 0.0);

  const wavepacket::Lattice& grid() const { return grid_; }
  double shift() const { return shift_; }
  const SpectralMeasure& measure() const { return measure_; }
  int dim() const { return grid_.dim; }
  std::size_t n_k() const { return grid_.size(); }
  std::size_t n_mass() const { return measure_.size(); }
  std::size_t size() const { return n_k() * n_mass(); }
  std::size_t index(std::size_t mass_node, std::size_t k_idx) const { return mass_node * n_k() + k_idx; }

  double omega(std::size_t flat) const { return omega_[flat]; }
  std::span<const double> k(std::size_t k_idx) const { return {k_.data() + k_idx * dim(), static_cast<std::size_t>(dim())}; }
  // dk^d * w_j of the flat index.
  double weight(std::size_t flat) const { return weight_[flat]; }

 private:
  wavepacket::Lattice grid_;
  SpectralMeasure measure_;
  double shift_;
  RVec k_, omega_, weight_;
};

using SpacePtr = std::shared_ptr<const SPSpace>;

class SPVector {
 public:
  SPVector() = default;
  explicit SPVector(SpacePtr space) : space_(std::move(space)), amps_(space_->size(), 0.0) {}
  SPVector(SpacePtr space, CVec amps);

  const SPSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  std::span<const cplx> amps() const { return amps_; }
  std::span<cplx> amps() { return amps_; }
  cplx& operator[](std::size_t i) { return amps_[i]; }
  cplx operator[](std::size_t i) const { return amps_[i]; }
  std::size_t size() const { return amps_.size(); }
  double norm() const;

  SPVector& operator+=(const SPVector& o);
  SPVector& operator-=(const SPVector& o);
  SPVector& operator*=(cplx c);

 private:
  SpacePtr space_;
  CVec amps_;
};

SPVector operator+(SPVector a, const SPVector& b);
SPVector operator-(SPVector a, const SPVector& b);
SPVector operator*(cplx c, SPVector a);

cplx inner(const SPVector& a, const SPVector& b);
double symplectic(const SPVector& a, const SPVector& b);

// Multiplication by e^{i omega t - i k.x}.
SPVector translate(const SPVector& psi, const minkgeom::CausalPoint& x);

// Region of (omega, k)-space.
using Region = std::function<bool(double omega, std::span<const double> k)>;
Region region_all();
Region region_empty();
Region region_energy_below(double e_max);
Region region_box(double w_lo, double w_hi, RVec k_lo, RVec k_hi);
// Hyperboloid band lo <= sqrt(w^2 - k^2) <= hi.
Region region_mass_band(double lo, double hi);

SPVector spectral_filter(const SPVector& psi, const Region& region);
SPVector sharp_mass_component(const SPVector& psi);

// 1D compact profile h(u) = amplitude * (1 - ((u - c)/r)^2)^s.
struct Bump1D {
  double center = 0.0;
  double radius = 1.0;
  int smoothness = 8;
  double amplitude = 1.0;

  double operator()(double u) const;
  // int e^{i q u} h(u) du by Gauss-Legendre; throws NumericalError if n vs 2n disagree by > 1e-6.
  cplx transform(double q) const;
};

// Space-time test function: separable product of bumps in x0 and each spatial axis, or a
// callable giving f^(w, k) directly. f^(k) = (2 pi)^{-(d+1)/2} int e^{i(k0 x0 - k.x)} f(x) dx.
class TestFunction {
 public:
  using Spectral = std::function<cplx(double w, std::span<const double> k)>;

  static TestFunction separable(Bump1D time, std::vector<Bump1D> space);
  static TestFunction spectral(int dim, Spectral fhat, double support_radius);

  int dim() const { return dim_; }
  cplx fhat(double w, std::span<const double> k) const;
  // Causal radius of a double cone around the origin containing the support.
  double support_radius() const { return support_radius_; }
  const Bump1D& time_profile() const { return time_; }
  const std::vector<Bump1D>& space_profiles() const { return space_; }
  bool is_separable() const { return !fhat_; }

 private:
  int dim_ = 1;
  Bump1D time_;
  std::vector<Bump1D> space_;
  Spectral fhat_;
  double support_radius_ = 0.0;
};

// amps(k, mu_j) = omega^{-1/2} f^(omega_mu(k), k).
SPVector embed_test_function(const TestFunction& f, const SpacePtr& space);

// Extended time-zero function g(x, s) = prod_a gx_a(x_a) * (gs(s) + gs(-s)).
struct ExtendedFunction {
  std::vector<Bump1D> space;
  Bump1D s_profile;
  bool symmetrize = true;

  // g^(k, mu) = (2 pi)^{-(d+1)/2} int e^{-ik.x - i mu s} g
  cplx fhat(std::span<const double> k, double mu) const;
};

struct TimeZeroVectors {
  SPVector phi;  // omega^{-1/2} g^
  SPVector pi;   // i omega^{1/2} g^
};

TimeZeroVectors timezero_embed(const ExtendedFunction& g, const SpacePtr& space);

// Fraction of the norm of a time-zero vector carried by lattice points below the outer band
// (reconstructibility check for the momentum lattice).
double lattice_tail_fraction(const SPVector& psi, double band = 0.9);

}  // namespace hrlab::spmodel
