#include "hrlab/creation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "hrlab/numerics.hpp"

namespace hrlab::creation {

namespace {

constexpr int kTailDegree = 41;  // Hermite coefficients kept for the smeared vacuum tail bound

spmodel::Bump1D as_bump(const BandProfile& b) { return {b.center, b.half_width, b.smoothness, 1.0}; }

// sum_j w_j z^j by Horner, z = e^{i omega h}, times e^{i omega t_0}; also sum_j t_j w_j e^{i omega t_j}.
struct UniformSum {
  double t0 = 0, h = 1;
  const CVec* w = nullptr;

  cplx value(double omega) const {
    const cplx z = std::exp(kI * omega * h);
    cplx acc = 0;
    for (std::size_t j = w->size(); j-- > 0;) acc = acc * z + (*w)[j];
    return acc * std::exp(kI * omega * t0);
  }
  cplx moment(double omega) const {
    const cplx z = std::exp(kI * omega * h);
    cplx acc = 0;
    for (std::size_t j = w->size(); j-- > 0;) acc = acc * z + (*w)[j] * (t0 + h * static_cast<double>(j));
    return acc * std::exp(kI * omega * t0);
  }
};

// Nodes j h with |j h| <= half, weights profile(t) * window(t) * h; zero-weight ends removed.
void window_nodes(double half, double h, double ramp_fraction, int smooth, const std::function<cplx(double)>& profile,
                  RVec& nodes, CVec& weights) {
  const int m = static_cast<int>(std::floor(half / h));
  const double ramp = half * ramp_fraction;
  const double flat = half - ramp;
  nodes.clear();
  weights.clear();
  for (int j = -m; j <= m; ++j) {
    const double t = j * h;
    const double win = ramp > 0 ? num::flat_top(t, 0.0, flat, ramp, smooth) : 1.0;
    if (win == 0.0) continue;
    nodes.push_back(t);
    weights.push_back(profile(t) * win * h);
  }
  require(!nodes.empty(), "make_chi: window holds no nodes");
}

double abs_sum(const CVec& w) {
  double s = 0;
  for (const cplx& x : w) s += std::abs(x);
  return s;
}

// Fraction of the |transfer| mass over one period that lies inside [lo, hi].
double inside_fraction(const std::function<cplx(double)>& f, double period, double lo, double hi, double step) {
  const int m = static_cast<int>(std::ceil(period / step));
  const double d = period / m;
  double in = 0, tot = 0;
  for (int i = 0; i < m; ++i) {
    const double x = -0.5 * period + (i + 0.5) * d;
    const double a = std::abs(f(x));
    tot += a;
    if (x >= lo && x <= hi) in += a;
  }
  return tot > 0 ? in / tot : 0.0;
}

}  // namespace

double BandProfile::operator()(double x) const { return num::poly_bump((x - center) / half_width, smoothness); }

// ---------------------------------------------------------------------------------------------
// ChiSmear

ChiSmear::ChiSmear(const ChiSpec& spec) : spec_(spec) {
  require(spec.energy.half_width > 0 && spec.momentum.half_width > 0, "make_chi: band half widths > 0");
  require(spec.energy.smoothness >= 1 && spec.momentum.smoothness >= 1, "make_chi: smoothness >= 1");
  require(spec.window_radius > 0 && spec.t_step > 0 && spec.x_step > 0, "make_chi: window and steps > 0");
  require(spec.ramp_fraction >= 0 && spec.ramp_fraction <= 1, "make_chi: ramp fraction in [0, 1]");
  require(spec.table_step > 0 && spec.table_extent > 0, "make_chi: table step and extent > 0");
  const double kmin =
      (spec.momentum.lo() <= 0 && spec.momentum.hi() >= 0) ? 0.0 : std::min(std::abs(spec.momentum.lo()), std::abs(spec.momentum.hi()));
  margin_ = (spec.energy.lo() + kmin) / std::sqrt(2.0);
  if (margin_ <= 0) throw PreconditionError("make_chi: target region touches the backward cone");

  const spmodel::Bump1D ub = as_bump(spec.energy), vb = as_bump(spec.momentum);
  const double half = 0.5 * spec.window_radius;
  window_nodes(half, spec.t_step, spec.ramp_fraction, spec.window_smoothness,
               [&](double t) { return ub.transform(-t) / (2.0 * kPi); }, t_, wt_);
  window_nodes(half, spec.x_step, spec.ramp_fraction, spec.window_smoothness,
               [&](double x) { return vb.transform(x) / (2.0 * kPi); }, x_, wx_);
  l1_t_ = abs_sum(wt_);
  l1_x_ = abs_sum(wx_);
  double m4 = 0;
  for (std::size_t j = 0; j < t_.size(); ++j) {
    curvature_ += std::abs(wt_[j]) * t_[j] * t_[j];
    m4 += std::abs(wt_[j]) * std::pow(t_[j], 4);
  }

  const UniformSum ts{t_.front(), spec.t_step, &wt_};
  // the node sum equals the continuous transfer up to aliases only below the Nyquist energy
  const double nyquist = kPi / spec.t_step;
  const int m = static_cast<int>(std::floor(std::min(spec.table_extent, nyquist) / spec.table_step));
  table_lo_ = -m * spec.table_step;
  const int size = 2 * m + 1;
  table_val_.resize(size);
  table_der_.resize(size);
  table_abs_.resize(size);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < size; ++i) {
    const double w = table_lo_ + i * spec.table_step;
    table_val_[i] = ts.value(w);
    table_der_[i] = kI * ts.moment(w);
    table_abs_[i] = std::abs(table_val_[i]);
  }
  // cubic Hermite: |f - p| <= h^4 / 384 max |f''''|, |T''''| <= sum |w| t^4
  table_error_ = std::pow(spec.table_step, 4) / 384.0 * m4;

  // ||W^(k)||_1 of the window: 2 int_0^1 |P^(k-1)(v)| dv / ramp^(k-1), P = v^s (1 - v)^s / B(s+1, s+1)
  const double ramp = half * spec.ramp_fraction;
  if (ramp > 0) {
    const int sm = spec.window_smoothness;
    RVec poly(2 * sm + 1, 0.0);  // coefficients of v^s (1 - v)^s
    for (int i = 0; i <= sm; ++i)
      poly[sm + i] = std::tgamma(sm + 1.0) / (std::tgamma(i + 1.0) * std::tgamma(sm - i + 1.0)) * ((i % 2) ? -1.0 : 1.0);
    const double bnorm = std::tgamma(sm + 1.0) * std::tgamma(sm + 1.0) / std::tgamma(2.0 * sm + 2.0);
    for (double& c : poly) c /= bnorm;
    const int samples = 20000;
    for (int k = 1; k <= sm + 1; ++k) {
      double acc = 0;
      for (int i = 0; i < samples; ++i) {
        const double v = (i + 0.5) / samples;
        double val = 0, pw = 1;
        for (std::size_t e = 0; e < poly.size(); ++e, pw *= v) val += poly[e] * pw;
        acc += std::abs(val);
      }
      window_derivs_.push_back(2.0 * acc / samples * 1.001 / std::pow(ramp, k - 1));
      for (std::size_t e = 0; e + 1 < poly.size(); ++e) poly[e] = poly[e + 1] * static_cast<double>(e + 1);
      poly.back() = 0.0;
    }
    const num::Quadrature gl = num::gauss_legendre(200, spec.energy.lo(), spec.energy.hi());
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) band_l1_ += gl.weights[i] * spec.energy(gl.nodes[i]);
    // aliases of the node sum: T(omega + 2 pi j / t_step) for |omega| <= nyquist
    for (int j = 1; j <= 200; ++j) {
      const double off = 2.0 * kPi * j / spec.t_step;
      alias_ += decay_bound(off - nyquist, off + nyquist) + decay_bound(-off - nyquist, -off + nyquist);
    }
  }

  const double step = std::min(0.01, kPi / (4.0 * spec.window_radius));
  const double in_t = inside_fraction([&](double w) { return ts.value(w); }, 2.0 * kPi / spec.t_step, spec.energy.lo(),
                                      spec.energy.hi(), step);
  const UniformSum xs{x_.front(), spec.x_step, &wx_};
  const double in_x = inside_fraction([&](double k) { return xs.value(-k); }, 2.0 * kPi / spec.x_step,
                                      spec.momentum.lo(), spec.momentum.hi(), step);
  leakage_ = 1.0 - in_t * in_x;
}

cplx ChiSmear::time_transfer(double omega) const {
  return UniformSum{t_.front(), spec_.t_step, &wt_}.value(omega);
}

cplx ChiSmear::time_transfer_fast(double omega) const {
  const double h = spec_.table_step;
  const double u = (omega - table_lo_) / h;
  const int i = static_cast<int>(std::floor(u));
  if (i < 0 || i + 1 >= static_cast<int>(table_val_.size())) return time_transfer(omega);
  const double s = u - i;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * table_val_[i] + h10 * h * table_der_[i] + h01 * table_val_[i + 1] + h11 * h * table_der_[i + 1];
}

cplx ChiSmear::space_transfer(double k) const { return UniformSum{x_.front(), spec_.x_step, &wx_}.value(-k); }

double ChiSmear::target(double omega, double k) const { return spec_.energy(omega) * spec_.momentum(k); }

double ChiSmear::decay_bound(double a, double b) const {
  const double d = std::max(spec_.energy.lo() - b, a - spec_.energy.hi());
  if (d <= 0.0 || window_derivs_.empty()) return l1_t_;
  // T = (1 / 2 pi) U * W^ with |W^(nu)| <= ||W^(k)||_1 / |nu|^k for the window transform W^
  double best = l1_t_;
  for (std::size_t k = 0; k < window_derivs_.size(); ++k)
    best = std::min(best, band_l1_ / (2.0 * kPi) * window_derivs_[k] / std::pow(d, static_cast<double>(k + 1)));
  return best;
}

double ChiSmear::time_sup(double a, double b) const {
  const double h = spec_.table_step;
  const double hi_table = table_lo_ + h * static_cast<double>(table_val_.size() - 1);
  double best = decay_bound(a, b);
  if (a >= table_lo_ && b <= hi_table) {
    const int i0 = std::max(0, static_cast<int>(std::floor((a - table_lo_) / h)));
    const int i1 =
        std::min(static_cast<int>(table_val_.size()) - 1, static_cast<int>(std::ceil((b - table_lo_) / h)));
    double mx = 0;
    for (int i = i0; i <= i1; ++i) mx = std::max(mx, table_abs_[i]);
    // |T - linear interpolant| <= h^2 / 8 sup |T''| between table points, plus the node-sum aliases
    best = std::min(best, mx + h * h / 8.0 * curvature_ + alias_);
  }
  return std::min(l1_t_, best);
}

ChiPtr make_chi(const ChiSpec& spec) {
  auto chi = std::make_shared<const ChiSmear>(spec);
  if (chi->leakage() > spec.leakage_budget)
    throw NumericalError("make_chi: leakage " + std::to_string(chi->leakage()) + " above budget; enlarge the window");
  return chi;
}

// ---------------------------------------------------------------------------------------------
// PacketSmear

PacketSmear::PacketSmear(const wavepacket::WavePacket& wp, double tau, double coverage) : tau_(tau) {
  require(wp.dim() == 1, "PacketSmear: d = 1 only");
  require(coverage >= 0.999 && coverage <= 1.0, "PacketSmear: coverage in [0.999, 1]");
  const auto& g = wp.grid();
  n_ = g.n;
  dk_ = g.dk;
  const int big = 3 * n_;
  step_ = 2.0 * kPi / (dk_ * big);
  y_.resize(big);
  for (int j = 0; j < big; ++j) y_[j] = (j - big / 2) * step_;

  // f(tau, y_j) = (dk / 2 pi) sum_i f~_i e^{-i omega_i tau} e^{i k_i y_j}
  CVec a(big, 0.0);
  auto vals = wp.values();
  for (int i = 0; i < n_; ++i) {
    const int ip = i - n_ / 2;
    const double k = ip * dk_;
    const double w = std::sqrt(k * k + wp.mass() * wp.mass());
    const double sign = (ip % 2 == 0) ? 1.0 : -1.0;  // e^{-i pi ip} from the centered y grid
    a[((ip % big) + big) % big] = vals[i] * std::exp(-kI * w * tau) * sign;
  }
  num::fft(a, +1);
  w_.resize(big);
  for (int j = 0; j < big; ++j) w_[j] = a[j] * (dk_ / (2.0 * kPi)) * step_;
  for (const cplx& x : w_) l1_ += std::abs(x);

  if (coverage < 1.0) {
    std::vector<int> order(big);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int p, int q) { return std::abs(w_[p]) < std::abs(w_[q]); });
    const double budget = (1.0 - coverage) * l1_;
    double dropped = 0;
    for (int idx : order) {
      const double m = std::abs(w_[idx]);
      if (dropped + m > budget) break;
      dropped += m;
      w_[idx] = 0.0;
    }
    discarded_l1_ = dropped;
  }

  // Y(m) = sum_j w_j e^{-i m dk y_j}, y_j = (j - big/2) step, dk step = 2 pi / big
  CVec b = w_;
  num::fft(b, -1);
  y_table_.resize(big + 1);
  for (int m = -big / 2; m <= big / 2; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    y_table_[m + big / 2] = b[((m % big) + big) % big] * sign;
  }
}

cplx PacketSmear::transfer(int m) const {
  const int big = 3 * n_;
  if (m < -big / 2 || m > big / 2) return 0.0;
  return y_table_[m + big / 2];
}

// ---------------------------------------------------------------------------------------------
// Transfer

Transfer::Transfer(double tau, ChiPtr chi, CVec g, int g_offset, bool reflected)
    : tau_(tau), chi_(std::move(chi)), g_(std::move(g)), g_offset_(g_offset), reflected_(reflected) {}

cplx Transfer::time(double omega) const {
  if (!chi_) return 1.0;
  return reflected_ ? std::conj(chi_->time_transfer(-omega)) : chi_->time_transfer(omega);
}

cplx Transfer::time_fast(double omega) const {
  if (!chi_) return 1.0;
  return reflected_ ? std::conj(chi_->time_transfer_fast(-omega)) : chi_->time_transfer_fast(omega);
}

cplx Transfer::space(int m) const {
  const int idx = (reflected_ ? -m : m) + g_offset_;
  if (idx < 0 || idx >= static_cast<int>(g_.size())) return 0.0;
  return reflected_ ? std::conj(g_[idx]) : g_[idx];
}

double Transfer::space_sup() const {
  double mx = 0;
  for (const cplx& x : g_) mx = std::max(mx, std::abs(x));
  return mx;
}

double Transfer::time_sup(double a, double b) const {
  if (!chi_) return 1.0;
  return reflected_ ? chi_->time_sup(-b, -a) : chi_->time_sup(a, b);
}

std::array<double, 4> Transfer::band() const {
  require(static_cast<bool>(chi_), "Transfer: no time smearing");
  const ChiSpec& s = chi_->spec();
  if (reflected_) return {-s.energy.hi(), -s.energy.lo(), -s.momentum.hi(), -s.momentum.lo()};
  return {s.energy.lo(), s.energy.hi(), s.momentum.lo(), s.momentum.hi()};
}

Transfer Transfer::adjoint() const {
  Transfer t = *this;
  t.reflected_ = !reflected_;
  return t;
}

// ---------------------------------------------------------------------------------------------
// SmearedOp

SmearedOp::SmearedOp(const rs::RSFamilySpec& rs, double beta, Transfer transfer, double weight_l1)
    : beta_(beta), gamma_(rs.gamma), transfer_(std::move(transfer)), weight_l1_(weight_l1) {
  const auto& sp = rs.psi.space();
  require(sp.dim() == 1 && sp.n_mass() == 1 && sp.shift() == 0.0, "SmearedOp: atom-only unshifted d = 1 lattice");
  require(beta > 0, "SmearedOp: beta > 0");
  n_ = sp.grid().n;
  dk_ = sp.grid().dk;
  mass_ = sp.measure().mass();
  u_.assign(rs.psi.amps().begin(), rs.psi.amps().end());
  omega_.resize(n_);
  for (int i = 0; i < n_; ++i) omega_[i] = sp.omega(i);
  unorm_ = rs.psi.norm();
  sigma_ = rs.sigma();
  degree_ = rs.degree;
  const rs::HermiteExpansion h = rs::hermite_truncate(rs, beta);
  hermite_residual_ = h.residual;
  b_.assign((degree_ + 1) * (degree_ + 1), 0.0);
  for (int j = 0; j <= degree_; ++j)
    for (int l = 0; j + l <= degree_; ++l) b_[j * (degree_ + 1) + l] = fock::wick_coefficient(h.coeffs, sigma_, j, l);
  rs::RSFamilySpec wide = rs;
  wide.degree = kTailDegree;
  const rs::HermiteExpansion ht = rs::hermite_truncate(wide, beta);
  tail_coeffs_ = ht.coeffs;
  // direct residual of the extended series: no cancellation against ||g||^2
  tail_residual_ = std::sqrt(rs::gauss_expectation([&](double z) {
    return sq(rs.g(beta, sigma_ * z) - rs::hermite_series(tail_coeffs_, sigma_, sigma_ * z));
  }));
}

SmearedOp SmearedOp::creation(const rs::RSFamilySpec& rs, double beta, const ChiPtr& chi, const PacketSmear& f) {
  require(f.lattice_n() == rs.psi.space().grid().n && f.dk() == rs.psi.space().grid().dk,
          "SmearedOp: packet and local vector on different lattices");
  const int big = 3 * f.lattice_n();
  CVec g(big + 1);
  for (int m = -big / 2; m <= big / 2; ++m) g[m + big / 2] = chi->space_transfer(m * f.dk()) * f.transfer(m);
  const double l1 = chi->l1() * (f.l1() - f.discarded_l1());
  return SmearedOp(rs, beta, Transfer(f.tau(), chi, std::move(g), big / 2), l1);
}

SmearedOp SmearedOp::packet_only(const rs::RSFamilySpec& rs, double beta, const PacketSmear& f) {
  require(f.lattice_n() == rs.psi.space().grid().n && f.dk() == rs.psi.space().grid().dk,
          "SmearedOp: packet and local vector on different lattices");
  const int big = 3 * f.lattice_n();
  CVec g(big + 1);
  for (int m = -big / 2; m <= big / 2; ++m) g[m + big / 2] = f.transfer(m);
  return SmearedOp(rs, beta, Transfer(f.tau(), nullptr, std::move(g), big / 2), f.l1() - f.discarded_l1());
}

SmearedOp SmearedOp::chi_only(const rs::RSFamilySpec& rs, double beta, const ChiPtr& chi, int lattice_n, double dk) {
  const int half = (rs.degree * lattice_n) / 2 + 1;
  CVec g(2 * half + 1);
  for (int m = -half; m <= half; ++m) g[m + half] = chi->space_transfer(m * dk);
  return SmearedOp(rs, beta, Transfer(0.0, chi, std::move(g), half), chi->l1());
}

SmearedOp SmearedOp::adjoint() const {
  SmearedOp o = *this;
  o.transfer_ = transfer_.adjoint();
  o.hs_cache_.clear();
  return o;
}

double SmearedOp::kernel_hs_bound(int j, int l) const {
  if (j + l > degree_ || j < 0 || l < 0) return 0.0;
  if (hs_cache_.empty()) hs_cache_.assign((degree_ + 1) * (degree_ + 1), -1.0);
  double& slot = hs_cache_[j * (degree_ + 1) + l];
  if (slot >= 0) return slot;
  const double bjl = std::abs(b(j, l));
  if (bjl == 0.0 || unorm_ == 0.0) return slot = 0.0;
  double et2 = 1.0;
  if (transfer_.has_time_profile()) {
    // distribution of sum(created omega) - sum(annihilated omega) under |u|^2 / ||u||^2, binned
    const double h = 0.01;
    int lo = 1 << 30, hi = -(1 << 30);
    std::vector<int> bin(n_);
    for (int i = 0; i < n_; ++i) {
      bin[i] = static_cast<int>(std::lround(omega_[i] / h));
      lo = std::min(lo, bin[i]);
      hi = std::max(hi, bin[i]);
    }
    RVec base(hi - lo + 1, 0.0);
    for (int i = 0; i < n_; ++i) base[bin[i] - lo] += std::norm(u_[i]) * dk_ / (unorm_ * unorm_);
    RVec dist{1.0};
    int off = 0;  // dist[i] sits at bin index i + off
    auto convolve = [&](bool created) {
      RVec out(dist.size() + base.size() - 1, 0.0);
      for (std::size_t a = 0; a < dist.size(); ++a)
        for (std::size_t c = 0; c < base.size(); ++c) {
          const std::size_t idx = created ? a + c : a + (base.size() - 1 - c);
          out[idx] += dist[a] * base[c];
        }
      off += created ? lo : -hi;
      dist.swap(out);
    };
    for (int a = 0; a < j; ++a) convolve(true);
    for (int a = 0; a < l; ++a) convolve(false);
    const double slack = 0.5 * (j + l) * h;
    et2 = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] == 0.0) continue;
      const double w = (static_cast<int>(i) + off) * h;
      et2 += dist[i] * sq(transfer_.time_sup(w - slack, w + slack));
    }
  }
  return slot = bjl * transfer_.space_sup() * std::pow(unorm_, j + l) * std::sqrt(et2);
}

double SmearedOp::vacuum_tail_bound() const {
  if (unorm_ == 0.0) return 0.0;
  // c_n for n > D: each n-particle component has norm <= sup |T| over [n m, n omega_max] * sup |G|
  const double wmax = *std::max_element(omega_.begin(), omega_.end());
  const double gsup = transfer_.space_sup();
  double acc = 0;
  for (std::size_t n = degree_ + 1; n < tail_coeffs_.size(); ++n) {
    if (tail_coeffs_[n] == 0.0) continue;
    acc += sq(tail_coeffs_[n] * transfer_.time_sup(n * mass_, n * wmax) * gsup);
  }
  // beyond the extended degree: every component carries energy above (extended degree + 1) m
  const double rest2 = sq(tail_residual_);
  const double tmax = transfer_.time_sup((kTailDegree + 1) * mass_, 1e300);
  acc += rest2 * sq(tmax * gsup);
  return std::sqrt(acc);
}

}  // namespace hrlab::creation
