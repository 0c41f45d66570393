#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "hrlab/creation.hpp"
#include "hrlab/numerics.hpp"

namespace hrlab::creation {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct GslWorkspaces {
  gsl_integration_workspace* outer = gsl_integration_workspace_alloc(2000);
  gsl_integration_workspace* inner = gsl_integration_workspace_alloc(2000);
  gsl_integration_workspace* cycle = gsl_integration_workspace_alloc(2000);
  gsl_integration_qawo_table* table = gsl_integration_qawo_table_alloc(1.0, 1.0, GSL_INTEG_SINE, 50);
  ~GslWorkspaces() {
    gsl_integration_workspace_free(outer);
    gsl_integration_workspace_free(inner);
    gsl_integration_workspace_free(cycle);
    gsl_integration_qawo_table_free(table);
  }
};

struct MomentParams {
  double gamma = 1, p = 1;
  GslWorkspaces* ws = nullptr;
};

double profile(double y, void* params) {
  const double gamma = static_cast<MomentParams*>(params)->gamma;
  return y * std::exp(-std::pow(y, 1.0 / gamma));
}

// int_0^inf y e^{-y^{1/gamma}} sin(s y) dy
double sine_transform(double s, MomentParams& mp) {
  if (s == 0.0) return 0.0;
  gsl_integration_qawo_table_set(mp.ws->table, s, 1.0, GSL_INTEG_SINE);
  gsl_function f{&profile, &mp};
  double result = 0, err = 0;
  const int status =
      gsl_integration_qawf(&f, 0.0, 1e-14, 2000, mp.ws->inner, mp.ws->cycle, mp.ws->table, &result, &err);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw NumericalError("fourier_moment: oscillatory quadrature failed at s = " + std::to_string(s));
  return result;
}

double moment_integrand(double s, void* params) {
  auto& mp = *static_cast<MomentParams*>(params);
  return std::pow(s, mp.p) * 2.0 * std::abs(sine_transform(s, mp));
}

// Circular correlation out[y] = sum_X a[y + X] b[X] of real arrays through the FFT.
RVec correlate(const RVec& a, const RVec& b) {
  const std::size_t n = a.size();
  CVec fa(a.begin(), a.end()), fb(b.begin(), b.end());
  num::fft(fa, -1);
  num::fft(fb, -1);
  for (std::size_t k = 0; k < n; ++k) fa[k] *= std::conj(fb[k]);
  num::fft(fa, +1);
  RVec out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = fa[k].real() / static_cast<double>(n);
  return out;
}

// |D| of the commutator function on circular indices m = X / step mod 3n.
RVec circular_abs(const RVec& d, double power) {
  const int big = static_cast<int>(d.size());
  RVec out(big);
  for (int j = 0; j < big; ++j) out[((j - big / 2) % big + big) % big] = std::pow(std::abs(d[j]), power);
  return out;
}

// Time weights |w_t| on integer node indices and the spatial profile |f| * |chi_x| of one smeared operator.
struct Profile {
  int first = 0;  // integer index of the first time node (t = index * t_step)
  RVec time;      // |w_t|
  RVec space;     // circular, length 3n
  double tau = 0, t_step = 0, space_l1 = 0, time_l1 = 0;
  const spmodel::SPVector* u = nullptr;
};

Profile make_profile(const SmearedSupport& s) {
  require(s.chi && s.packet && s.u, "commutator bound: incomplete smearing");
  const ChiSmear& chi = *s.chi;
  const PacketSmear& f = *s.packet;
  require(std::abs(chi.spec().x_step - f.step()) <= 1e-9 * f.step(),
          "commutator bound: chi space step must equal the packet quadrature step");
  require(s.u->space().grid().n == f.lattice_n(), "commutator bound: local vector and packet on different lattices");
  Profile p;
  p.u = s.u;
  p.tau = f.tau();
  p.t_step = chi.spec().t_step;
  p.first = static_cast<int>(std::lround(chi.t_nodes().front() / p.t_step));
  for (const cplx& w : chi.t_weights()) p.time.push_back(std::abs(w));
  const int big = 3 * f.lattice_n();
  RVec pf(big), px(big, 0.0);
  for (int j = 0; j < big; ++j) pf[((j - big / 2) % big + big) % big] = std::abs(f.weights()[j]);
  const auto xn = chi.x_nodes();
  const auto xw = chi.x_weights();
  for (std::size_t a = 0; a < xn.size(); ++a) {
    const int m = static_cast<int>(std::lround(xn[a] / f.step()));
    px[((m % big) + big) % big] += std::abs(xw[a]);
  }
  // P(z) = sum_x |chi_x(x)| |f(z - x)|: circular convolution
  RVec rev(big);
  for (int j = 0; j < big; ++j) rev[j] = px[(big - j) % big];
  p.space = correlate(pf, rev);
  for (double& v : p.space) v = std::max(v, 0.0);
  for (double v : p.space) p.space_l1 += v;
  for (double v : p.time) p.time_l1 += v;
  return p;
}

// H_d(y) = sum_X P_b(y + X) |D_ab(T_d, X)|^power for every time lag d = i_b - i_a.
struct LagTable {
  int d_min = 0;
  std::vector<RVec> h;
};

LagTable lag_table(const Profile& a, const Profile& b, double power) {
  require(std::abs(a.t_step - b.t_step) <= 1e-12 * a.t_step, "commutator bound: time steps differ");
  LagTable t;
  const int ia0 = a.first, ia1 = a.first + static_cast<int>(a.time.size()) - 1;
  const int ib0 = b.first, ib1 = b.first + static_cast<int>(b.time.size()) - 1;
  t.d_min = ib0 - ia1;
  const int count = ib1 - ia0 - t.d_min + 1;
  t.h.resize(count);
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < count; ++c) {
    const double T = b.tau - a.tau + (t.d_min + c) * a.t_step;
    const RVec d = commutator_function(*a.u, *b.u, T);
    t.h[c] = correlate(b.space, circular_abs(d, power));
  }
  return t;
}

// C(i, y) = sum_{i'} |w_b(i')| H_{i' - i}(y) for every time node i of a.
std::vector<RVec> lag_sum(const Profile& a, const Profile& b, const LagTable& t) {
  const std::size_t big = a.space.size();
  std::vector<RVec> c(a.time.size(), RVec(big, 0.0));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < static_cast<int>(a.time.size()); ++i) {
    RVec& row = c[i];
    for (std::size_t ib = 0; ib < b.time.size(); ++ib) {
      const int d = (b.first + static_cast<int>(ib)) - (a.first + i);
      const RVec& h = t.h[d - t.d_min];
      const double w = b.time[ib];
      for (std::size_t y = 0; y < big; ++y) row[y] += w * h[y];
    }
  }
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Fourier moments

double fourier_moment_unit(double gamma, double p) {
  require(gamma > 0 && p >= 0, "fourier_moment: gamma > 0 and p >= 0");
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  GslWorkspaces ws;
  MomentParams mp{gamma, p, &ws};
  gsl_function f{&moment_integrand, &mp};
  double result = 0, err = 0;
  const int status = gsl_integration_qagiu(&f, 0.0, 1e-12, 1e-9, 2000, ws.outer, &result, &err);
  gsl_set_error_handler(old);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw NumericalError("fourier_moment: moment integral failed (gamma " + std::to_string(gamma) + ", p " +
                         std::to_string(p) + ")");
  return result / kPi;
}

double fourier_moment(double gamma, double beta, double p) {
  require(beta > 0, "fourier_moment: beta > 0");
  return std::pow(beta, gamma * (p - 1.0)) * fourier_moment_unit(gamma, p);
}

// ---------------------------------------------------------------------------------------------
// Almost-local tail

std::vector<TailPoint> almost_local_tail(const ChiSmear& chi, double region_radius, std::span<const double> radii) {
  std::vector<std::pair<double, double>> pairs;  // (|t| + |x|, |w_t| |w_x|)
  const auto tn = chi.t_nodes();
  const auto tw = chi.t_weights();
  const auto xn = chi.x_nodes();
  const auto xw = chi.x_weights();
  pairs.reserve(tn.size() * xn.size());
  for (std::size_t a = 0; a < tn.size(); ++a)
    for (std::size_t b = 0; b < xn.size(); ++b)
      pairs.emplace_back(std::abs(tn[a]) + std::abs(xn[b]), std::abs(tw[a]) * std::abs(xw[b]));
  std::sort(pairs.begin(), pairs.end());
  RVec suffix(pairs.size() + 1, 0.0);
  for (std::size_t i = pairs.size(); i-- > 0;) suffix[i] = suffix[i + 1] + pairs[i].second;
  const double total = suffix[0];
  std::vector<TailPoint> out;
  for (double r : radii) {
    const double cut = r - region_radius;
    const auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(cut, -1.0));
    out.push_back({r, total > 0 ? suffix[it - pairs.begin()] / total : 0.0});
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Commutator functions and bounds

RVec commutator_function(const spmodel::SPVector& u1, const spmodel::SPVector& u2, double t) {
  const auto& sp = u1.space();
  require(sp.dim() == 1 && sp.n_mass() == 1 && u2.size() == u1.size(), "commutator_function: atom-only d = 1 pair");
  const int n = sp.grid().n, big = 3 * n;
  const double dk = sp.grid().dk;
  CVec a(big, 0.0);
  for (int i = 0; i < n; ++i) {
    const int ip = i - n / 2;
    const double sign = (ip % 2 == 0) ? 1.0 : -1.0;  // e^{i pi ip} from the centered X grid
    a[((ip % big) + big) % big] = std::conj(u1[i]) * u2[i] * std::exp(kI * sp.omega(i) * t) * dk * sign;
  }
  // sum_i a_i e^{-i k_i X_j}, k_i X_j = 2 pi ip j / big - pi ip
  num::fft(a, -1);
  RVec out(big);
  for (int j = 0; j < big; ++j) out[j] = a[j].imag();
  return out;
}

std::vector<CommutatorIntegral> commutator_integral(const rs::RSFamilySpec& rs, std::span<const double> betas,
                                                    const ChiSmear& chi) {
  const auto& sp = rs.psi.space();
  const int n = sp.grid().n, big = 3 * n;
  const double L = 2.0 * kPi / sp.grid().dk, step = L / big;
  const double h = chi.spec().t_step;
  RVec wt;
  for (const cplx& w : chi.t_weights()) wt.push_back(std::abs(w));
  const int nt = static_cast<int>(wt.size());
  const double sx = chi.space_l1();
  // per lag: Q(d), near length, spacelike integral of |D| and the |D| samples for the min variant
  const int lags = 2 * nt - 1;
  RVec q(lags, 0.0), near(lags), far(lags);
  std::vector<RVec> dabs(lags);
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < lags; ++c) {
    const int d = c - (nt - 1);
    double acc = 0;
    for (int i = 0; i < nt; ++i)
      if (i + d >= 0 && i + d < nt) acc += wt[i] * wt[i + d];
    q[c] = acc;
    const double T = d * h;
    const double thr = std::abs(T) + 2.0 * rs.region_radius;
    near[c] = std::min(2.0 * thr, L);
    dabs[c] = commutator_function(rs.psi, rs.psi, T);
    double f = 0;
    for (int j = 0; j < big; ++j) {
      dabs[c][j] = std::abs(dabs[c][j]);
      if (std::abs((j - big / 2) * step) > thr) f += dabs[c][j] * step;
    }
    far[c] = f;
  }
  const double n1 = fourier_moment_unit(rs.gamma, 1.0);
  std::vector<CommutatorIntegral> out;
  for (double beta : betas) {
    const double a2 = sq(rs::rs_norm_closed_form(beta, rs.gamma));
    const double ratio = n1 * n1 / a2;
    double proof = 0, mn = 0;
    for (int c = 0; c < lags; ++c) {
      proof += q[c] * (2.0 * near[c] + ratio * far[c]);
      double m = 0;
      for (int j = 0; j < big; ++j) m += std::min(2.0, ratio * dabs[c][j]) * step;
      mn += q[c] * m;
    }
    out.push_back({beta, proof * sx * sx, mn * sx * sx});
  }
  return out;
}

CommutatorBound commutator_bound(const SmearedSupport& a, const SmearedSupport& b, double n1_a, double n1_b) {
  const Profile pa = make_profile(a), pb = make_profile(b);
  require(pa.space.size() == pb.space.size(), "commutator_bound: lattices differ");
  // R(X) = sum_z P_a(z) P_b(z + X)
  const RVec r = correlate(pb.space, pa.space);
  const LagTable t = lag_table(pa, pb, 1.0);
  const int big = static_cast<int>(r.size());
  // the lag table already holds sum_X P_b(y + X) |D(X)|; pair it with P_a and the time weights
  RVec per_lag(t.h.size(), 0.0), q(t.h.size(), 0.0);
  for (std::size_t ia = 0; ia < pa.time.size(); ++ia)
    for (std::size_t ib = 0; ib < pb.time.size(); ++ib) {
      const int d = (pb.first + static_cast<int>(ib)) - (pa.first + static_cast<int>(ia));
      q[d - t.d_min] += pa.time[ia] * pb.time[ib];
    }
  for (std::size_t c = 0; c < t.h.size(); ++c) {
    if (q[c] == 0.0) continue;
    double s = 0;
    for (int y = 0; y < big; ++y) s += pa.space[y] * t.h[c][y];
    per_lag[c] = q[c] * s;
  }
  CommutatorBound out;
  double total = 0;
  for (double v : per_lag) total += v;
  out.value = n1_a * n1_b * total;
  double rsum = 0;
  for (double v : r) rsum += std::max(v, 0.0);
  const double dfl = 4.0 * kEps * std::log2(static_cast<double>(big)) * pa.u->norm() * pb.u->norm();
  out.floor = n1_a * n1_b * dfl * pa.time_l1 * pb.time_l1 * rsum;
  return out;
}

CommutatorBound double_commutator_bound(const SmearedSupport& b, const SmearedSupport& b1, const SmearedSupport& b2,
                                        const Moments& m, const Moments& m1, const Moments& m2) {
  const Profile p = make_profile(b), p1 = make_profile(b1), p2 = make_profile(b2);
  const std::size_t big = p.space.size();
  require(p1.space.size() == big && p2.space.size() == big, "double_commutator_bound: lattices differ");
  const double dfl = 4.0 * kEps * std::log2(static_cast<double>(big));

  // weighted sum over the nodes of `a` of the product of two lag sums, and the floor partner
  auto pair_sum = [&](const Profile& a, const Profile& one, const Profile& half, double& floor_part) {
    const auto c_one = lag_sum(a, one, lag_table(a, one, 1.0));
    const auto c_half = lag_sum(a, half, lag_table(a, half, 0.5));
    const double noise_half =
        std::sqrt(dfl * a.u->norm() * half.u->norm()) * half.time_l1 * half.space_l1;
    double total = 0, fl = 0;
    for (std::size_t i = 0; i < a.time.size(); ++i) {
      double s = 0, sf = 0;
      for (std::size_t y = 0; y < big; ++y) {
        s += a.space[y] * c_one[i][y] * c_half[i][y];
        sf += a.space[y] * c_one[i][y];
      }
      total += a.time[i] * s;
      fl += a.time[i] * sf * noise_half;
    }
    floor_part = fl;
    return total;
  };
  double f1 = 0, f2 = 0;
  const double t1 = pair_sum(p, p1, p2, f1);   // sum |W| C(x; W_1, |D|) C(x; W_2, |D|^{1/2})
  const double t2 = pair_sum(p1, p, p2, f2);   // sum |W_1| C(x_1; W, |D|) C(x_1; W_2, |D|^{1/2})
  const double a1 = m.n_three_halves * m1.n_one * m2.n_half;
  const double a2 = m.n_one * m1.n_three_halves * m2.n_half;
  CommutatorBound out;
  out.value = std::sqrt(2.0) * (a1 * t1 + a2 * t2);
  out.floor = std::sqrt(2.0) * (a1 * f1 + a2 * f2);
  return out;
}

}  // namespace hrlab::creation
