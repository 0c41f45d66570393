#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "hrlab/common.hpp"
#include "hrlab/rsfamily.hpp"
#include "hrlab/spmodel.hpp"
#include "hrlab/wavepacket.hpp"

namespace hrlab::creation {

// Compact bump amplitude * (1 - ((x - center) / half_width)^2)^smoothness.
struct BandProfile {
  double center = 0.0;
  double half_width = 1.0;
  int smoothness = 4;

  double operator()(double x) const;
  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
};

// Smearing function chi(t, x) = chi_t(t) chi_x(x) in d = 1. Its transform is U(omega) V(k) / (2 pi)
// with U = energy band, V = momentum band; the node sums carry a smooth box window.
struct ChiSpec {
  BandProfile energy{1.2, 0.45, 4};
  BandProfile momentum{0.0, 1.0, 4};
  double window_radius = 120.0;  // causal radius; nodes fill |t|, |x| <= window_radius / 2
  double ramp_fraction = 0.5;    // window falloff width over the half side
  int window_smoothness = 4;
  double t_step = 0.25;
  double x_step = 0.25;
  double leakage_budget = 1e-3;
  double table_step = 1e-3;      // spacing of the cubic Hermite table of the time transfer
  double table_extent = 20.0;    // table covers |omega| <= min(table_extent, pi / t_step)
};

class ChiSmear {
 public:
  explicit ChiSmear(const ChiSpec& spec);

  const ChiSpec& spec() const { return spec_; }
  std::span<const double> t_nodes() const { return t_; }
  std::span<const double> x_nodes() const { return x_; }
  std::span<const cplx> t_weights() const { return wt_; }
  std::span<const cplx> x_weights() const { return wx_; }

  // T(omega) = sum_j w_j e^{i omega t_j}, the discrete counterpart of U(omega).
  cplx time_transfer(double omega) const;
  // Table lookup; |fast - exact| <= table_error().
  cplx time_transfer_fast(double omega) const;
  // X(k) = sum_j w_j e^{-i k x_j}, the discrete counterpart of V(k).
  cplx space_transfer(double k) const;
  // U(omega) V(k) = (2 pi)^{(d+1)/2} chi^(omega, k).
  double target(double omega, double k) const;
  // Upper bound of |T| on [a, b] for the continuous time smearing: table maximum plus slack below the
  // Nyquist energy pi / t_step, window-smoothness decay away from the energy band.
  double time_sup(double a, double b) const;
  // Decay bound alone: (1 / 2 pi) int |U| min_k ||W^(k)||_1 / dist^k.
  double decay_bound(double a, double b) const;
  double nyquist() const { return kPi / spec_.t_step; }

  // Fraction of the |T| |X| mass outside the target box over one period of the node sums.
  double leakage() const { return leakage_; }
  // Euclidean distance of the target box from the closed backward cone.
  double margin() const { return margin_; }
  double time_l1() const { return l1_t_; }
  double space_l1() const { return l1_x_; }
  double l1() const { return l1_t_ * l1_x_; }
  double table_error() const { return table_error_; }

 private:
  ChiSpec spec_;
  RVec t_, x_;
  CVec wt_, wx_;
  RVec table_abs_, window_derivs_;
  CVec table_val_, table_der_;
  double table_lo_ = 0;
  double leakage_ = 0, margin_ = 0, l1_t_ = 0, l1_x_ = 0, table_error_ = 0, curvature_ = 0;
  double band_l1_ = 0, alias_ = 0;
};

using ChiPtr = std::shared_ptr<const ChiSmear>;

// Validates the band geometry and the leakage budget; throws PreconditionError on margin <= 0 and
// NumericalError when the window is too small for the budget.
ChiPtr make_chi(const ChiSpec& spec);

// Spatial quadrature of f(tau, .) on the grid y_j = (j - 3n/2) dx / 3 over the periodic box.
class PacketSmear {
 public:
  // coverage < 1 drops the smallest nodes until that fraction of the L1 mass remains.
  PacketSmear(const wavepacket::WavePacket& wp, double tau, double coverage = 1.0);

  double tau() const { return tau_; }
  double step() const { return step_; }
  int lattice_n() const { return n_; }
  double dk() const { return dk_; }
  std::span<const double> nodes() const { return y_; }
  // f(tau, y_j) * step, zero for dropped nodes.
  std::span<const cplx> weights() const { return w_; }
  double l1() const { return l1_; }
  double discarded_l1() const { return discarded_l1_; }
  // Y(m dk) = sum_j w_j e^{-i m dk y_j} for |m| <= 3n/2 (equals f~(k) e^{-i omega tau} at full coverage).
  cplx transfer(int m) const;

 private:
  double tau_, step_, dk_;
  int n_;
  RVec y_;
  CVec w_, y_table_;
  double l1_ = 0, discarded_l1_ = 0;
};

// Time and space transfer of a smeared operator sum_x W(x) U(x) A U(x)^*: the kernel of
// a*(p)^j a(q)^l picks up e^{i Omega tau} T(Omega) G(K) with Omega, K the created minus annihilated
// energy and momentum.
class Transfer {
 public:
  Transfer() = default;
  Transfer(double tau, ChiPtr chi, CVec g, int g_offset, bool reflected = false);

  double tau() const { return tau_; }
  bool has_time_profile() const { return static_cast<bool>(chi_); }
  cplx time(double omega) const;
  cplx time_fast(double omega) const;
  // G(m dk); zero outside the table.
  cplx space(int m) const;
  double space_sup() const;
  double time_sup(double a, double b) const;
  double table_error() const { return chi_ ? chi_->table_error() : 0.0; }
  double nyquist() const { return chi_ ? chi_->nyquist() : 0.0; }
  // Target region of the time and space smearing as {omega_lo, omega_hi, k_lo, k_hi}.
  std::array<double, 4> band() const;
  // Transfer of the adjoint operator: conj T(-omega), conj G(-m).
  Transfer adjoint() const;

 private:
  double tau_ = 0;
  ChiPtr chi_;
  CVec g_;
  int g_offset_ = 0;
  bool reflected_ = false;
};

// Degree-D Hermite approximant of g_beta(Phi_S(u)) smeared by a transfer, in Wick-ordered form
// sum b_jl W a*(u_x)^j a(u_x)^l. Single-particle space: atom-only lattice in d = 1.
class SmearedOp {
 public:
  SmearedOp(const rs::RSFamilySpec& rs, double beta, Transfer transfer, double weight_l1);

  // B_tau: chi and packet; A_tau: packet only; B_beta: chi only (at the origin).
  static SmearedOp creation(const rs::RSFamilySpec& rs, double beta, const ChiPtr& chi, const PacketSmear& f);
  static SmearedOp packet_only(const rs::RSFamilySpec& rs, double beta, const PacketSmear& f);
  static SmearedOp chi_only(const rs::RSFamilySpec& rs, double beta, const ChiPtr& chi, int lattice_n, double dk);

  SmearedOp adjoint() const;

  int n() const { return n_; }
  double dk() const { return dk_; }
  int degree() const { return degree_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double b(int j, int l) const { return j + l <= degree_ ? b_[j * (degree_ + 1) + l] : 0.0; }
  const CVec& u() const { return u_; }
  const RVec& omega() const { return omega_; }
  const Transfer& transfer() const { return transfer_; }
  // sum |W| over all smearing nodes.
  double weight_l1() const { return weight_l1_; }
  // Triangle bound sum |W| sup |g_beta| on the norm of the smeared bounded operator.
  double norm_bound() const { return weight_l1_ * rs::rs_norm_closed_form(beta_, gamma_); }
  double hermite_residual() const { return hermite_residual_; }
  // Bound on ||K_jl||_HS from the distribution of created minus annihilated energy.
  double kernel_hs_bound(int j, int l) const;
  // Norm of the Hermite tail beyond the degree on the vacuum, after smearing.
  double vacuum_tail_bound() const;

 private:
  int n_ = 0;
  double dk_ = 0, beta_ = 0, gamma_ = 1, sigma_ = 0, unorm_ = 0;
  int degree_ = 0;
  RVec b_, omega_, tail_coeffs_;
  CVec u_;
  double tail_residual_ = 0;  // absolute L2(gauss) norm of g beyond the extended degree
  Transfer transfer_;
  double weight_l1_ = 0, hermite_residual_ = 0, mass_ = 1;
  mutable std::vector<double> hs_cache_;
};

// State with sectors 0..max_sector on the momentum lattice. Sector p holds the symmetric kernel
// s(k_1..k_p) of (p!)^{-1/2} int s a*(k_1)..a*(k_p) Omega; norms carry dk^p.
class GridState {
 public:
  GridState() = default;
  GridState(int n, double dk, int max_sector = 2);
  static GridState vacuum(int n, double dk, int max_sector = 2);

  int n() const { return n_; }
  double dk() const { return dk_; }
  int max_sector() const { return max_sector_; }
  cplx& s0() { return s0_; }
  cplx s0() const { return s0_; }
  CVec& sector(int p);
  const CVec& sector(int p) const;
  double sector_norm(int p) const;
  double norm() const;
  // Triangle-inequality bound on everything the engine did not represent.
  double discarded() const { return discarded_; }
  void add_discarded(double x) { discarded_ += x; }
  void set_discarded(double x) { discarded_ = x; }

  GridState& operator+=(const GridState& o);
  GridState& operator-=(const GridState& o);
  GridState& operator*=(cplx c);

 private:
  int n_ = 0, max_sector_ = 2;
  double dk_ = 0;
  cplx s0_ = 0;
  std::array<CVec, 4> s_;
  double discarded_ = 0;
};

GridState operator+(GridState a, const GridState& b);
GridState operator-(GridState a, const GridState& b);
cplx grid_inner(const GridState& a, const GridState& b);
GridState project_out_vacuum(GridState s);
// Single-particle vector as a sector-1 state (atom lattice amplitudes).
GridState from_single_particle(const spmodel::SPVector& v, int max_sector = 2);

// op applied to s. Exact for j + l <= 3 up to the top sector; every other term enters discarded()
// through its Hilbert-Schmidt bound.
GridState apply(const SmearedOp& op, const GridState& s);

// ||B Omega (chi then f) - B Omega (f then chi)|| / ||B Omega|| on the single-particle sector.
double convolution_identity(const rs::RSFamilySpec& rs, double beta, const ChiPtr& chi, const PacketSmear& f);

double vacuum_annihilation_residual(const SmearedOp& op);

struct TransferResult {
  double outside_fraction = 0;  // share of ||B Psi||^2 outside Delta + Delta_chi
  bool empty_input = false;     // Psi = 0: 0/0 guarded
  // Smallest (omega, k) box holding all output components above the relative threshold.
  double omega_lo = 0, omega_hi = 0, k_lo = 0, k_hi = 0;
};

// Delta is the box [omega_lo, omega_hi] x [k_lo, k_hi] of the input state.
TransferResult em_transfer_residual(const SmearedOp& op, const GridState& input, double omega_lo, double omega_hi,
                                    double k_lo, double k_hi, double threshold = 1e-6);

struct SinglePoint {
  double tau = 0, beta = 0;
  double error = 0;      // ||B_tau Omega - U V f~ u / sqrt 2||
  double reference = 0;  // norm of the reference vector
  double discarded = 0;
};

// Reference (2 pi) chi^(omega, k) f~(k) Psi_1 with Psi_1 = u / sqrt 2.
std::vector<SinglePoint> single_particle_limit(const rs::RSFamilySpec& rs, const ChiPtr& chi,
                                               const wavepacket::WavePacket& packet, std::span<const double> taus,
                                               double mu, double coverage = 1.0);

struct EnergyBound {
  double filtered_norm = 0;     // ||B_tau E(Delta)|| on the represented sectors
  double dropped = 0;           // HS bound of the unrepresented part
  double rs_norm = 0;           // sup |g_beta|
  double ratio = 0;             // filtered_norm / rs_norm
  double unfiltered_ratio = 0;  // sum |W|: triangle bound of ||B_tau|| / ||A_beta||
  int range_dim = 0;            // dimension of the range of E(Delta)
};

// Delta = {energy <= e_max} with e_max < 2m: vacuum plus single particles below e_max.
EnergyBound energy_bound_ratio(const SmearedOp& op, double e_max);

// N_p(G) = (1 / 2 pi) int |s|^p |G^(s)| ds for G(y) = y exp(-|y|^{1/gamma}).
double fourier_moment_unit(double gamma, double p);
// N_p(g_beta) = beta^{gamma (p - 1)} N_p(G).
double fourier_moment(double gamma, double beta, double p);

struct TailPoint {
  double r = 0;
  double tail = 0;  // sum of |w| over nodes with |x|_c >= r - R, over sum |w|
};

std::vector<TailPoint> almost_local_tail(const ChiSmear& chi, double region_radius, std::span<const double> radii);

// Imaginary part of <u1_x, u2_{x + (T, X)}> on X_j = (j - 3n/2) dx / 3.
RVec commutator_function(const spmodel::SPVector& u1, const spmodel::SPVector& u2, double t);

struct CommutatorIntegral {
  double beta = 0;
  double proof_constant = 0;  // pairs not spacelike get 2||A||^2, spacelike pairs N_1^2 |D|; over ||A||^2
  double min_constant = 0;    // min of the two per pair, over ||A||^2
};

// int dx ||[B_beta, B_beta^*(x)]|| bounds for the chi-only operator, one entry per beta.
std::vector<CommutatorIntegral> commutator_integral(const rs::RSFamilySpec& rs, std::span<const double> betas,
                                                    const ChiSmear& chi);

// Smearing of one operator for the correlation bounds: chi times a packet at time tau.
struct SmearedSupport {
  const ChiSmear* chi = nullptr;
  const PacketSmear* packet = nullptr;
  const spmodel::SPVector* u = nullptr;
};

struct CommutatorBound {
  double value = 0;  // N_1(g1) N_1(g2) sum |W_1| |W_2| |Im <u1_x, u2_x'>|
  double floor = 0;  // rounding level of the FFT commutator function inside the same sum
};

// Upper bound on ||[B_1, B_2]||. The chi space step must equal the packet quadrature step.
CommutatorBound commutator_bound(const SmearedSupport& a, const SmearedSupport& b, double n1_a, double n1_b);

struct Moments {
  double n_half = 0, n_one = 0, n_three_halves = 0;
};

// Upper bound on ||[[B, B_1], B_2]|| from |1 - e^{ix}| <= 2^{1/2} |x|^{1/2}.
CommutatorBound double_commutator_bound(const SmearedSupport& b, const SmearedSupport& b1, const SmearedSupport& b2,
                               const Moments& m, const Moments& m1, const Moments& m2);

}  // namespace hrlab::creation
