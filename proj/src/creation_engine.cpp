#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "hrlab/creation.hpp"

namespace hrlab::creation {

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// sqrt(p! / (p - l)!) sqrt(p'! / (p - l)!) of a*^j a^l on sector p.
double wick_norm(int p, int j, int l) {
  const int q = p - l + j;
  return std::sqrt(factorial(p) / factorial(p - l)) * std::sqrt(factorial(q) / factorial(p - l));
}

double sum_norm(const CVec& v) {
  double s = 0;
  for (const cplx& x : v) s += std::norm(x);
  return s;
}

// Shared per-application data: time-translated local amplitudes and the kernel factors.
struct Kernels {
  const SmearedOp& op;
  int n;
  double dk;
  CVec ut;  // u e^{i omega tau}

  explicit Kernels(const SmearedOp& o) : op(o), n(o.n()), dk(o.dk()), ut(o.n()) {
    for (int i = 0; i < n; ++i) ut[i] = o.u()[i] * std::exp(kI * o.omega()[i] * o.transfer().tau());
  }
  double w(int i) const { return op.omega()[i]; }
  cplx tf(double omega) const { return op.transfer().time_fast(omega); }
  cplx g(int m) const { return op.transfer().space(m); }
};

}  // namespace

// ---------------------------------------------------------------------------------------------
// GridState

GridState::GridState(int n, double dk, int max_sector) : n_(n), max_sector_(max_sector), dk_(dk) {
  require(n > 0 && dk > 0, "GridState: n > 0 and dk > 0");
  require(max_sector >= 0 && max_sector <= 3, "GridState: max sector in [0, 3]");
  std::size_t size = 1;
  for (int p = 1; p <= max_sector; ++p) {
    size *= static_cast<std::size_t>(n);
    s_[p].assign(size, 0.0);
  }
}

GridState GridState::vacuum(int n, double dk, int max_sector) {
  GridState s(n, dk, max_sector);
  s.s0_ = 1.0;
  return s;
}

CVec& GridState::sector(int p) {
  require(p >= 1 && p <= max_sector_, "GridState: sector out of range");
  return s_[p];
}

const CVec& GridState::sector(int p) const {
  require(p >= 1 && p <= max_sector_, "GridState: sector out of range");
  return s_[p];
}

double GridState::sector_norm(int p) const {
  if (p == 0) return std::abs(s0_);
  if (p > max_sector_) return 0.0;
  return std::sqrt(std::pow(dk_, p) * sum_norm(s_[p]));
}

double GridState::norm() const {
  double acc = 0;
  for (int p = 0; p <= max_sector_; ++p) acc += sq(sector_norm(p));
  return std::sqrt(acc);
}

GridState& GridState::operator+=(const GridState& o) {
  require(n_ == o.n_ && max_sector_ == o.max_sector_, "GridState: shape mismatch");
  s0_ += o.s0_;
  for (int p = 1; p <= max_sector_; ++p)
    for (std::size_t i = 0; i < s_[p].size(); ++i) s_[p][i] += o.s_[p][i];
  discarded_ += o.discarded_;
  return *this;
}

GridState& GridState::operator-=(const GridState& o) {
  require(n_ == o.n_ && max_sector_ == o.max_sector_, "GridState: shape mismatch");
  s0_ -= o.s0_;
  for (int p = 1; p <= max_sector_; ++p)
    for (std::size_t i = 0; i < s_[p].size(); ++i) s_[p][i] -= o.s_[p][i];
  discarded_ += o.discarded_;
  return *this;
}

GridState& GridState::operator*=(cplx c) {
  s0_ *= c;
  for (int p = 1; p <= max_sector_; ++p)
    for (cplx& x : s_[p]) x *= c;
  discarded_ *= std::abs(c);
  return *this;
}

GridState operator+(GridState a, const GridState& b) { return a += b; }
GridState operator-(GridState a, const GridState& b) { return a -= b; }

cplx grid_inner(const GridState& a, const GridState& b) {
  require(a.n() == b.n(), "grid_inner: lattice mismatch");
  cplx acc = std::conj(a.s0()) * b.s0();
  for (int p = 1; p <= std::min(a.max_sector(), b.max_sector()); ++p) {
    const CVec& x = a.sector(p);
    const CVec& y = b.sector(p);
    cplx s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
    acc += s * std::pow(a.dk(), p);
  }
  return acc;
}

GridState project_out_vacuum(GridState s) {
  s.s0() = 0.0;
  return s;
}

GridState from_single_particle(const spmodel::SPVector& v, int max_sector) {
  const auto& sp = v.space();
  require(sp.dim() == 1 && sp.n_mass() == 1, "from_single_particle: atom-only d = 1 space");
  require(max_sector >= 1, "from_single_particle: max sector >= 1");
  GridState s(sp.grid().n, sp.grid().dk, max_sector);
  std::copy(v.amps().begin(), v.amps().end(), s.sector(1).begin());
  return s;
}

// ---------------------------------------------------------------------------------------------
// apply

GridState apply(const SmearedOp& op, const GridState& s) {
  require(s.n() == op.n() && s.dk() == op.dk(), "apply: state and operator on different lattices");
  const int n = op.n(), P = s.max_sector(), h = n / 2;
  const double dk = op.dk();
  const std::size_t n1 = n, n2 = n1 * n1;
  const Kernels k(op);
  GridState out(n, dk, P);
  if (op.transfer().has_time_profile()) {
    const double wmax = *std::max_element(op.omega().begin(), op.omega().end());
    require(3.0 * wmax < op.transfer().nyquist(), "apply: three-particle energies above the time-node Nyquist energy");
  }

  // everything the engine does not represent
  double disc = s.discarded() * op.norm_bound() + std::abs(s.s0()) * op.vacuum_tail_bound();
  for (int j = 0; j <= op.degree(); ++j)
    for (int l = 0; j + l <= op.degree(); ++l) {
      if (op.b(j, l) == 0.0) continue;
      for (int p = l; p <= P; ++p) {
        const int q = p - l + j;
        const double in = s.sector_norm(p);
        if (in == 0.0 || (q <= P && j + l <= 3)) continue;
        disc += wick_norm(p, j, l) * op.kernel_hs_bound(j, l) * in;
      }
    }
  out.set_discarded(disc);

  // (1, 0) and (0, 1): exact time transfer
  CVec v(n), hv(n);
  const double b10 = op.b(1, 0), b01 = op.b(0, 1);
  for (int i = 0; i < n; ++i) {
    v[i] = b10 * k.ut[i] * op.transfer().time(k.w(i)) * k.g(i - h);
    hv[i] = b01 * std::conj(k.ut[i]) * op.transfer().time(-k.w(i)) * k.g(h - i) * dk;
  }

  if (P >= 1) {
    CVec& o1 = out.sector(1);
    for (std::size_t a = 0; a < n1; ++a) o1[a] += v[a] * s.s0();
    const CVec& s1 = s.sector(1);
    cplx acc = 0;
    for (std::size_t a = 0; a < n1; ++a) acc += hv[a] * s1[a];
    out.s0() += acc;
  }
  if (P >= 2) {
    const CVec& s1 = s.sector(1);
    const CVec& s2 = s.sector(2);
    CVec& o1 = out.sector(1);
    CVec& o2 = out.sector(2);
    const double c1 = std::sqrt(2.0);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) o2[a * n1 + b] += c1 * 0.5 * (v[a] * s1[b] + v[b] * s1[a]);
      cplx acc = 0;
      for (int q = 0; q < n; ++q) acc += hv[q] * s2[q * n1 + a];
      o1[a] += c1 * acc;
    }
  }
  if (P >= 3) {
    const CVec& s2 = s.sector(2);
    const CVec& s3 = s.sector(3);
    CVec& o2 = out.sector(2);
    CVec& o3 = out.sector(3);
    const double c1 = std::sqrt(3.0);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        for (int c = 0; c < n; ++c)
          o3[a * n2 + b * n1 + c] +=
              c1 / 3.0 * (v[a] * s2[b * n1 + c] + v[b] * s2[a * n1 + c] + v[c] * s2[a * n1 + b]);
        cplx acc = 0;
        for (int q = 0; q < n; ++q) acc += hv[q] * s3[q * n2 + a * n1 + b];
        o2[a * n1 + b] += c1 * acc;
      }
  }

  // (3, 0) on the vacuum and (0, 3) on sector 3
  if (P >= 3 && (op.b(3, 0) != 0.0 || op.b(0, 3) != 0.0)) {
    CVec& o3 = out.sector(3);
    const CVec& s3 = s.sector(3);
    const double b30 = op.b(3, 0), b03 = op.b(0, 3);
    const cplx vac = s.s0();
    const bool have3 = s.sector_norm(3) > 0;
    CVec part(n, 0.0);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n; ++a) {
      cplx acc = 0;
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          const double om = k.w(a) + k.w(b) + k.w(c);
          const int m = a + b + c - 3 * h;
          const cplx uu = k.ut[a] * k.ut[b] * k.ut[c];
          if (vac != 0.0) o3[a * n2 + b * n1 + c] += std::sqrt(6.0) * b30 * uu * k.tf(om) * k.g(m) * vac;
          if (have3) acc += b03 * std::conj(uu) * k.tf(-om) * k.g(-m) * s3[a * n2 + b * n1 + c];
        }
      part[a] = acc;
    }
    cplx acc = 0;
    for (const cplx& x : part) acc += x;
    out.s0() += std::sqrt(6.0) * dk * dk * dk * acc;
  }

  // (2, 1) and (1, 2) through the three-index kernels
  const bool have1 = P >= 1 && s.sector_norm(1) > 0;
  const bool have2 = P >= 2 && s.sector_norm(2) > 0;
  const bool have3 = P >= 3 && s.sector_norm(3) > 0;
  const double b21 = op.b(2, 1), b12 = op.b(1, 2);
  if (b21 != 0.0 && ((have1 && P >= 2) || (have2 && P >= 3))) {
    // K21[a, b, q] = b21 ut_a ut_b conj(ut_q) T(w_a + w_b - w_q) G(a + b - q - n/2)
    CVec kt(n2 * n1);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int q = 0; q < n; ++q)
          kt[a * n2 + b * n1 + q] = b21 * k.ut[a] * k.ut[b] * std::conj(k.ut[q]) *
                                    k.tf(k.w(a) + k.w(b) - k.w(q)) * k.g(a + b - q - h);
    if (have1 && P >= 2) {
      const CVec& s1 = s.sector(1);
      CVec& o2 = out.sector(2);
#pragma omp parallel for schedule(static)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          cplx acc = 0;
          for (int q = 0; q < n; ++q) acc += kt[a * n2 + b * n1 + q] * s1[q];
          o2[a * n1 + b] += std::sqrt(2.0) * dk * acc;
        }
    }
    if (have2 && P >= 3) {
      const CVec& s2 = s.sector(2);
      CVec pre(n2 * n1);  // pre[a, b, c] = dk sum_q K21[a, b, q] s2[q, c]
#pragma omp parallel for schedule(static)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) {
            cplx acc = 0;
            for (int q = 0; q < n; ++q) acc += kt[a * n2 + b * n1 + q] * s2[q * n1 + c];
            pre[a * n2 + b * n1 + c] = dk * acc;
          }
      CVec& o3 = out.sector(3);
      const double c12 = std::sqrt(12.0) / 3.0;
#pragma omp parallel for schedule(static)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            o3[a * n2 + b * n1 + c] +=
                c12 * (pre[a * n2 + b * n1 + c] + pre[b * n2 + c * n1 + a] + pre[a * n2 + c * n1 + b]);
    }
  }
  if (b12 != 0.0 && (have2 || have3)) {
    // K12[a, q1, q2] = b12 ut_a conj(ut_q1 ut_q2) T(w_a - w_q1 - w_q2) G(a - q1 - q2 + n/2)
    CVec kt(n2 * n1);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n; ++a)
      for (int q1 = 0; q1 < n; ++q1)
        for (int q2 = 0; q2 < n; ++q2)
          kt[a * n2 + q1 * n1 + q2] = b12 * k.ut[a] * std::conj(k.ut[q1] * k.ut[q2]) *
                                      k.tf(k.w(a) - k.w(q1) - k.w(q2)) * k.g(a - q1 - q2 + h);
    if (have2) {
      const CVec& s2 = s.sector(2);
      CVec& o1 = out.sector(1);
#pragma omp parallel for schedule(static)
      for (int a = 0; a < n; ++a) {
        cplx acc = 0;
        for (std::size_t r = 0; r < n2; ++r) acc += kt[a * n2 + r] * s2[r];
        o1[a] += std::sqrt(2.0) * dk * dk * acc;
      }
    }
    if (have3) {
      const CVec& s3 = s.sector(3);
      CVec pre(n2);  // pre[a, c] = dk^2 sum K12[a, q1, q2] s3[q1, q2, c]
#pragma omp parallel for schedule(static)
      for (int a = 0; a < n; ++a) {
        CVec row(n, 0.0);
        for (std::size_t r = 0; r < n2; ++r) {
          const cplx kv = kt[a * n2 + r];
          const cplx* src = &s3[r * n1];
          for (int c = 0; c < n; ++c) row[c] += kv * src[c];
        }
        for (int c = 0; c < n; ++c) pre[a * n1 + c] = dk * dk * row[c];
      }
      CVec& o2 = out.sector(2);
      const double c12 = std::sqrt(12.0) / 2.0;
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) o2[a * n1 + c] += c12 * (pre[a * n1 + c] + pre[c * n1 + a]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Properties of the smeared operators

double convolution_identity(const rs::RSFamilySpec& rs, double beta, const ChiPtr& chi, const PacketSmear& f) {
  const SmearedOp op = SmearedOp::creation(rs, beta, chi, f);
  const GridState st = apply(op, GridState::vacuum(op.n(), op.dk(), 1));
  const CVec& s1 = st.sector(1);
  // packet first, then chi: one sum over the combined displacement y + x, time t + tau
  const auto yn = f.nodes();
  const auto yw = f.weights();
  const auto xn = chi->x_nodes();
  const auto xw = chi->x_weights();
  const auto tn = chi->t_nodes();
  const auto tw = chi->t_weights();
  const int n = op.n();
  RVec diff(n), ref(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double kk = (i - n / 2) * op.dk();
    const double w = op.omega()[i];
    cplx space = 0;
    for (std::size_t a = 0; a < yn.size(); ++a) {
      if (yw[a] == 0.0) continue;
      cplx inner = 0;
      for (std::size_t b = 0; b < xn.size(); ++b) inner += xw[b] * std::exp(-kI * kk * (yn[a] + xn[b]));
      space += yw[a] * inner;
    }
    cplx time = 0;
    for (std::size_t a = 0; a < tn.size(); ++a) time += tw[a] * std::exp(kI * w * (tn[a] + f.tau()));
    const cplx direct = op.b(1, 0) * op.u()[i] * time * space;
    diff[i] = std::norm(direct - s1[i]);
    ref[i] = std::norm(s1[i]);
  }
  double d = 0, r = 0;
  for (int i = 0; i < n; ++i) {
    d += diff[i];
    r += ref[i];
  }
  return r > 0 ? std::sqrt(d / r) : 0.0;
}

double vacuum_annihilation_residual(const SmearedOp& op) {
  const GridState vac = GridState::vacuum(op.n(), op.dk(), 3);
  const double created = apply(op, vac).norm();
  const double annihilated = apply(op.adjoint(), vac).norm();
  return created > 0 ? annihilated / created : 0.0;
}

TransferResult em_transfer_residual(const SmearedOp& op, const GridState& input, double omega_lo, double omega_hi,
                                    double k_lo, double k_hi, double threshold) {
  TransferResult r;
  if (input.norm() == 0.0) {
    r.empty_input = true;
    return r;
  }
  require(op.transfer().has_time_profile(), "em_transfer_residual: operator without energy smearing");
  const GridState out = apply(op, input);
  const int n = op.n();
  const double dk = op.dk();
  const auto band = op.transfer().band();  // Delta_chi as {omega_lo, omega_hi, k_lo, k_hi}
  const double e_lo = omega_lo + band[0], e_hi = omega_hi + band[1];
  const double q_lo = k_lo + band[2], q_hi = k_hi + band[3];
  const double cell = 0.5 * dk;
  double total = 0, outside = 0, peak = 0;
  struct Comp {
    double w, q, mass;
  };
  std::vector<Comp> comps;
  auto visit = [&](double w, double q, double mass) {
    total += mass;
    if (w < e_lo - cell || w > e_hi + cell || q < q_lo - cell || q > q_hi + cell) outside += mass;
    peak = std::max(peak, mass);
    comps.push_back({w, q, mass});
  };
  visit(0.0, 0.0, std::norm(out.s0()));
  std::size_t size = 1;
  for (int p = 1; p <= out.max_sector(); ++p) {
    size *= static_cast<std::size_t>(n);
    const CVec& s = out.sector(p);
    const double scale = std::pow(dk, p);
    for (std::size_t idx = 0; idx < size; ++idx) {
      if (s[idx] == 0.0) continue;
      double w = 0, q = 0;
      std::size_t rest = idx;
      for (int a = 0; a < p; ++a) {
        const int i = static_cast<int>(rest % n);
        rest /= n;
        w += op.omega()[i];
        q += (i - n / 2) * dk;
      }
      visit(w, q, std::norm(s[idx]) * scale);
    }
  }
  r.outside_fraction = total > 0 ? outside / total : 0.0;
  bool first = true;
  for (const Comp& c : comps) {
    if (c.mass < threshold * peak) continue;
    if (first) {
      r.omega_lo = r.omega_hi = c.w;
      r.k_lo = r.k_hi = c.q;
      first = false;
    }
    r.omega_lo = std::min(r.omega_lo, c.w);
    r.omega_hi = std::max(r.omega_hi, c.w);
    r.k_lo = std::min(r.k_lo, c.q);
    r.k_hi = std::max(r.k_hi, c.q);
  }
  return r;
}

std::vector<SinglePoint> single_particle_limit(const rs::RSFamilySpec& rs, const ChiPtr& chi,
                                               const wavepacket::WavePacket& packet, std::span<const double> taus,
                                               double mu, double coverage) {
  require(mu > 0, "single_particle_limit: mu > 0");
  std::vector<SinglePoint> out;
  const int n = packet.grid().n;
  const double dk = packet.grid().dk;
  for (double tau : taus) {
    require(tau >= 1.0, "single_particle_limit: tau >= 1");
    const double beta = std::pow(tau, -mu);
    const PacketSmear f(packet, tau, coverage);
    const SmearedOp op = SmearedOp::creation(rs, beta, chi, f);
    const GridState st = apply(op, GridState::vacuum(n, dk, 3));
    double err = st.sector_norm(2) * st.sector_norm(2) + st.sector_norm(3) * st.sector_norm(3) + std::norm(st.s0());
    double ref = 0;
    const CVec& s1 = st.sector(1);
    for (int i = 0; i < n; ++i) {
      const double kk = (i - n / 2) * dk;
      const cplx r = chi->target(op.omega()[i], kk) * packet.values()[i] * op.u()[i] / std::sqrt(2.0);
      err += std::norm(s1[i] - r) * dk;
      ref += std::norm(r) * dk;
    }
    out.push_back({tau, beta, std::sqrt(err), std::sqrt(ref), st.discarded()});
  }
  return out;
}

EnergyBound energy_bound_ratio(const SmearedOp& op, double e_max) {
  EnergyBound r;
  r.rs_norm = rs::rs_norm_closed_form(op.beta(), op.gamma());
  r.unfiltered_ratio = op.weight_l1();
  const int n = op.n();
  const double dk = op.dk();
  std::vector<GridState> outs;
  if (e_max >= 0) outs.push_back(apply(op, GridState::vacuum(n, dk, 3)));
  for (int i = 0; i < n; ++i) {
    if (op.omega()[i] > e_max) continue;
    GridState e(n, dk, 2);
    e.sector(1)[i] = 1.0 / std::sqrt(dk);
    outs.push_back(apply(op, e));
  }
  r.range_dim = static_cast<int>(outs.size());
  if (outs.empty()) return r;
  const int m = r.range_dim;
  Eigen::MatrixXcd g(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) {
      const cplx v = grid_inner(outs[a], outs[b]);
      g(a, b) = v;
      g(b, a) = std::conj(v);
    }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
  r.filtered_norm = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  double d2 = 0;
  for (const GridState& o : outs) d2 += sq(o.discarded());
  r.dropped = std::sqrt(d2);
  r.ratio = r.filtered_norm / r.rs_norm;
  return r;
}

}  // namespace hrlab::creation
