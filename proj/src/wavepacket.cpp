#include "hrlab/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hrlab/numerics.hpp"

namespace hrlab::wavepacket {

namespace {

constexpr double kSupportThreshold = 1e-12;

double euclid(std::span<const double> v) {
  double s = 0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

cplx omega_c(cplx k, double m) {
  if (m == 0.0) return k.real() >= 0 ? k : -k;
  return std::sqrt(k * k + m * m);
}

// out_j = sum_i in_i exp(i k_i x_j) for k_i = (i - n/2) dk, x_j = (j - n/2) dx, n even.
void centered_transform(CVec& data) {
  const int n = static_cast<int>(data.size());
  for (int i = 1; i < n; i += 2) data[i] = -data[i];
  num::fft(data, +1);
  for (int j = 0; j < n; ++j)
    if ((j - n / 2) % 2) data[j] = -data[j];
}

}  // namespace

double Lattice::cell_volume() const { return std::pow(dk, dim); }

std::size_t Lattice::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

double BumpProfile::operator()(std::span<const double> k) const {
  double r;
  if (shape == ProfileShape::ball) {
    double s = 0;
    for (std::size_t i = 0; i < k.size(); ++i) s += sq(k[i] - center[i]);
    r = std::sqrt(s) / radius;
  } else {
    r = std::abs(euclid(k) - shell) / radius;
  }
  return amplitude * num::poly_bump(r, smoothness);
}

bool BumpProfile::radially_symmetric() const {
  if (shape == ProfileShape::shell) return true;
  return std::all_of(center.begin(), center.end(), [](double c) { return c == 0.0; });
}

std::vector<std::pair<double, double>> BumpProfile::radial_segments() const {
  if (shape == ProfileShape::ball) {
    if (center.size() == 1) return {{center[0] - radius, center[0] + radius}};
    return {{-radius, radius}};
  }
  if (shell > radius) return {{-shell - radius, -shell + radius}, {shell - radius, shell + radius}};
  return {{-shell - radius, shell + radius}};
}

cplx BumpProfile::radial_value(cplx k) const {
  cplx z;
  if (shape == ProfileShape::ball)
    z = (center.size() == 1 ? k - center[0] : k) / radius;
  else
    z = ((k.real() >= 0 ? k : -k) - shell) / radius;
  return amplitude * num::poly_bump(z, smoothness);
}

WavePacket::WavePacket(double mass, Lattice grid, BumpProfile profile, double excluded_radius)
    : mass_(mass), grid_(grid), profile_(std::move(profile)), excluded_radius_(excluded_radius) {
  require(mass >= 0.0 && std::isfinite(mass), "WavePacket: mass must be >= 0");
  require(grid.dim == 1 || grid.dim == 3, "WavePacket: dim must be 1 or 3");
  require(grid.n >= 8 && grid.n % 2 == 0 && grid.dk > 0, "WavePacket: lattice needs even n >= 8 and dk > 0");
  require(profile_.radius > 0, "WavePacket: radius > 0");
  if (profile_.shape == ProfileShape::ball)
    require(static_cast<int>(profile_.center.size()) == grid.dim, "WavePacket: center dimension mismatch");
  if (2.0 * profile_.radius / grid.dk < 8.0)
    throw ConfigError("make_bump_packet: grid too coarse, fewer than 8 points across the support");

  values_.resize(grid_.size());
  RVec k(grid_.dim);
  double boundary_max = 0.0;
  for (std::size_t idx = 0; idx < values_.size(); ++idx) {
    k = k_of(idx);
    values_[idx] = profile_(k);
    bool on_boundary = false;
    std::size_t rest = idx;
    for (int a = 0; a < grid_.dim; ++a) {
      const int i = static_cast<int>(rest % grid_.n);
      rest /= grid_.n;
      if (i == 0 || i == grid_.n - 1) on_boundary = true;
    }
    if (on_boundary) boundary_max = std::max(boundary_max, std::abs(values_[idx]));
    if (mass_ == 0.0 && euclid(k) <= excluded_radius_ && std::abs(values_[idx]) >= kSupportThreshold)
      throw PreconditionError("massless packet: support touches the excluded ball around k = 0");
  }
  if (boundary_max >= kSupportThreshold) throw ConfigError("WavePacket: support reaches the lattice boundary");
}

RVec WavePacket::k_of(std::size_t idx) const {
  RVec k(grid_.dim);
  for (int a = 0; a < grid_.dim; ++a) {
    k[a] = grid_.coord(static_cast<int>(idx % grid_.n));
    idx /= grid_.n;
  }
  return k;
}

double WavePacket::omega(std::span<const double> k) const {
  double s = mass_ * mass_;
  for (double c : k) s += c * c;
  return std::sqrt(s);
}

double WavePacket::l2_norm() const {
  double s = 0;
  for (const cplx& v : values_) s += std::norm(v);
  return std::sqrt(s * grid_.cell_volume());
}

Lattice auto_lattice(int dim, double k_extent, double box_length, int min_n) {
  require(k_extent > 0 && box_length > 0, "auto_lattice: positive extents");
  const double dk = 2.0 * kPi / box_length;
  const auto need = static_cast<std::size_t>(std::ceil(2.0 * k_extent * 1.25 / dk));
  const int n = static_cast<int>(num::next_pow2(std::max<std::size_t>(need, static_cast<std::size_t>(min_n))));
  return {dim, n, dk};
}

WavePacket make_bump_packet(int dim, double mass, RVec center, double radius, int smoothness,
                            std::optional<Lattice> grid) {
  require(radius > 0, "make_bump_packet: radius > 0");
  require(static_cast<int>(center.size()) == dim, "make_bump_packet: center dimension");
  const double c = euclid(center);
  if (mass == 0.0) require(c > radius, "make_bump_packet: massless packet support touches k = 0");
  Lattice g = grid ? *grid : auto_lattice(dim, c + radius, dim == 1 ? 64.0 * 2.0 * kPi / radius : 8.0 * 2.0 * kPi / radius,
                                          dim == 1 ? 256 : 64);
  BumpProfile p{ProfileShape::ball, std::move(center), 0.0, radius, smoothness, 1.0};
  const double excluded = mass == 0.0 ? 0.5 * (c - radius) : 0.0;
  return WavePacket(mass, g, std::move(p), excluded);
}

WavePacket make_shell_packet(int dim, double mass, double shell, double radius, int smoothness,
                             std::optional<Lattice> grid) {
  require(radius > 0 && shell >= 0, "make_shell_packet: radius > 0, shell >= 0");
  if (mass == 0.0) require(shell > radius, "make_shell_packet: massless shell must avoid k = 0");
  Lattice g = grid ? *grid : auto_lattice(dim, shell + radius, 8.0 * 2.0 * kPi / radius, 64);
  BumpProfile p{ProfileShape::shell, RVec(dim, 0.0), shell, radius, smoothness, 1.0};
  const double excluded = mass == 0.0 ? 0.5 * (shell - radius) : 0.0;
  return WavePacket(mass, g, std::move(p), excluded);
}

double KGSnapshot::cell_volume() const { return std::pow(dx, dim); }

KGSnapshot evaluate_snapshot(const WavePacket& wp, double t) {
  require(std::isfinite(t), "evaluate_snapshot: t finite");
  const Lattice& g = wp.grid();
  KGSnapshot s{t, g.dim, g.n, g.dx(), CVec(g.size())};
  auto vals = wp.values();
  RVec k(g.dim);
  for (std::size_t idx = 0; idx < vals.size(); ++idx) {
    k = wp.k_of(idx);
    s.values[idx] = vals[idx] * std::exp(-kI * wp.omega(k) * t);
  }
  const int n = g.n;
  // sign pattern (-1)^{i} before and (-1)^{j - n/2} after the transform implements the centered lattices
  auto sign_of = [n](std::size_t idx, int dim, bool after) {
    int par = 0;
    for (int a = 0; a < dim; ++a) {
      const int i = static_cast<int>(idx % n);
      idx /= n;
      par += after ? (i - n / 2) : i;
    }
    return (par % 2) ? -1.0 : 1.0;
  };
  for (std::size_t idx = 0; idx < s.values.size(); ++idx) s.values[idx] *= sign_of(idx, g.dim, false);
  if (g.dim == 1)
    num::fft(s.values, +1);
  else
    num::fft3(s.values, n, +1);
  const double norm = std::pow(g.dk / (2.0 * kPi), g.dim);
  for (std::size_t idx = 0; idx < s.values.size(); ++idx) s.values[idx] *= sign_of(idx, g.dim, true) * norm;

  // Aliasing guard: energy in the outer band of the periodic box.
  double total = 0, band = 0;
  const double edge = 0.45 * n * s.dx;
  for (std::size_t idx = 0; idx < s.values.size(); ++idx) {
    const double e = std::norm(s.values[idx]);
    total += e;
    std::size_t rest = idx;
    bool outer = false;
    for (int a = 0; a < g.dim; ++a) {
      if (std::abs(s.coord(static_cast<int>(rest % n))) > edge) outer = true;
      rest /= n;
    }
    if (outer) band += e;
  }
  if (total > 0 && band > 1e-6 * total)
    throw NumericalError("evaluate_snapshot: aliasing detected (packet reaches the edge of the position box)");
  return s;
}

RadialSnapshot evaluate_radial(const WavePacket& wp, double t, int n, double dk) {
  require(wp.dim() == 3 && wp.profile().radially_symmetric(), "evaluate_radial: needs a radially symmetric d=3 packet");
  require(n >= 16 && n % 2 == 0 && dk > 0, "evaluate_radial: bad lattice");
  const BumpProfile& prof = wp.profile();
  const double m = wp.mass();
  CVec data(n);
  for (int i = 0; i < n; ++i) {
    const double k = (i - n / 2) * dk;
    const double kk[3] = {std::abs(k), 0.0, 0.0};
    data[i] = k * prof(std::span<const double>(kk, 3)) * std::exp(-kI * std::sqrt(k * k + m * m) * t);
  }
  const double edge = std::abs(data.front()) + std::abs(data.back());
  if (edge > 1e-12) throw ConfigError("evaluate_radial: support reaches the radial lattice boundary");
  centered_transform(data);
  const double dr = 2.0 * kPi / (n * dk);
  RadialSnapshot s{t, dr, CVec(n / 2)};
  // r f(t, r) = (4 pi^2 i)^{-1} int k e^{ikr} e^{-i w t} f~ dk
  for (int j = 1; j < n / 2; ++j) {
    const double r = j * dr;
    s.values[j] = data[j + n / 2] * dk / (4.0 * kPi * kPi * kI * r);
  }
  // r = 0: (2 pi^2)^{-1} int_0^inf k^2 e^{-i w t} f~ dk
  cplx f0 = 0;
  for (int i = n / 2; i < n; ++i) {
    const double k = (i - n / 2) * dk;
    const double kk[3] = {k, 0.0, 0.0};
    f0 += k * k * prof(std::span<const double>(kk, 3)) * std::exp(-kI * std::sqrt(k * k + m * m) * t);
  }
  s.values[0] = f0 * dk / (2.0 * kPi * kPi);
  double total = 0, band = 0;
  for (int j = 0; j < n / 2; ++j) {
    const double r = j * dr;
    const double e = std::norm(s.values[j]) * r * r;
    total += e;
    if (j > static_cast<int>(0.9 * (n / 2))) band += e;
  }
  if (total > 0 && band > 1e-6 * total) throw NumericalError("evaluate_radial: aliasing detected");
  return s;
}

cplx direct_value(const WavePacket& wp, double t, std::span<const double> x) {
  const Lattice& g = wp.grid();
  require(static_cast<int>(x.size()) == g.dim, "direct_value: dimension mismatch");
  auto vals = wp.values();
  cplx acc = 0;
  for (std::size_t idx = 0; idx < vals.size(); ++idx) {
    if (vals[idx] == 0.0) continue;
    const RVec k = wp.k_of(idx);
    double kx = 0;
    for (int a = 0; a < g.dim; ++a) kx += k[a] * x[a];
    acc += vals[idx] * std::exp(kI * (kx - wp.omega(k) * t));
  }
  return acc * std::pow(g.dk / (2.0 * kPi), g.dim);
}

double lp_norm(const KGSnapshot& s, double p) {
  require(p >= 1.0, "lp_norm: p >= 1");
  if (std::isinf(p)) {
    double mx = 0;
    for (const cplx& v : s.values) mx = std::max(mx, std::abs(v));
    return mx;
  }
  double acc = 0;
  for (const cplx& v : s.values) acc += std::pow(std::abs(v), p);
  return std::pow(acc * s.cell_volume(), 1.0 / p);
}

double lp_norm(const RadialSnapshot& s, double p) {
  require(p >= 1.0, "lp_norm: p >= 1");
  if (std::isinf(p)) {
    double mx = 0;
    for (const cplx& v : s.values) mx = std::max(mx, std::abs(v));
    return mx;
  }
  double acc = 0;
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    const double r = j * s.dr;
    acc += 4.0 * kPi * r * r * std::pow(std::abs(s.values[j]), p);
  }
  return std::pow(acc * s.dr, 1.0 / p);
}

double plancherel_norm(const WavePacket& wp) { return std::pow(2.0 * kPi, -0.5 * wp.dim()) * wp.l2_norm(); }

VelocitySupport::VelocitySupport(int dim, std::vector<RVec> samples) : dim_(dim), samples_(std::move(samples)) {
  if (samples_.empty()) return;
  RVec lo(dim, std::numeric_limits<double>::infinity()), hi(dim, -std::numeric_limits<double>::infinity());
  for (const RVec& v : samples_)
    for (int a = 0; a < dim; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  hull_ = minkgeom::VelocityCone({}, {{lo, hi}});
}

double VelocitySupport::distance(const RVec& v) const {
  require(static_cast<int>(v.size()) == dim_, "VelocitySupport::distance: dimension mismatch");
  if (samples_.empty()) return std::numeric_limits<double>::infinity();
  if (dim_ == 1) return hull_.distance(v);
  double best = std::numeric_limits<double>::infinity();
  for (const RVec& s : samples_) {
    double d2 = 0;
    for (int a = 0; a < dim_; ++a) d2 += sq(s[a] - v[a]);
    best = std::min(best, d2);
  }
  return std::sqrt(best);
}

double VelocitySupport::max_speed() const {
  double mx = 0;
  for (const RVec& v : samples_) mx = std::max(mx, euclid(v));
  return mx;
}

VelocitySupport velocity_support(const WavePacket& wp, double threshold) {
  std::vector<RVec> samples;
  auto vals = wp.values();
  for (std::size_t idx = 0; idx < vals.size(); ++idx) {
    if (std::abs(vals[idx]) <= threshold) continue;
    RVec k = wp.k_of(idx);
    const double w = wp.omega(k);
    for (double& c : k) c /= w;
    samples.push_back(std::move(k));
  }
  return VelocitySupport(wp.dim(), std::move(samples));
}

namespace {

// Integrand along the ray x = v t, reduced to one momentum variable.
// d = 1: (2 pi)^{-1} f~(k) e^{i(k s - w t)}, s = v t.
// d = 3 radial: (4 pi^2 i s)^{-1} k f~(|k|) e^{i(k s - w t)}, s = |v| t.
struct RayIntegral {
  const WavePacket& wp;
  double s;
  double t;

  cplx profile(cplx k) const { return wp.profile().radial_value(k); }

  cplx operator()(cplx k) const {
    const cplx phase = std::exp(kI * (k * s - omega_c(k, wp.mass()) * t));
    if (wp.dim() == 1) return profile(k) * phase / (2.0 * kPi);
    return k * profile(k) * phase / (4.0 * kPi * kPi * kI * s);
  }

  double dphase(double k) const {
    const double m = wp.mass();
    const double v = m == 0.0 ? (k >= 0 ? 1.0 : -1.0) : k / std::sqrt(k * k + m * m);
    return s - v * t;
  }
};

std::vector<std::pair<double, double>> ray_segments(const WavePacket& wp) {
  const BumpProfile& p = wp.profile();
  if (wp.dim() == 1 && p.shape == ProfileShape::shell) {
    if (p.shell > p.radius) return {{-p.shell - p.radius, -p.shell + p.radius}, {p.shell - p.radius, p.shell + p.radius}};
    return {{-p.shell - p.radius, p.shell + p.radius}};
  }
  return p.radial_segments();
}

cplx contour_segment(const RayIntegral& f, double a, double b, int nodes) {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  const double sgn = f.dphase(mid) >= 0 ? 1.0 : -1.0;
  double height = 0.3 * half;
  const double m = f.wp.mass();
  if (m > 0) height = std::min(height, 0.5 * m);
  const double dist0 = (a > 0 || b < 0) ? std::min(std::abs(a), std::abs(b)) : 0.0;
  if (m == 0.0) height = std::min(height, 0.5 * dist0);
  const num::Quadrature q = num::gauss_legendre(nodes);
  cplx acc = 0;
  for (int i = 0; i < nodes; ++i) {
    const double u = q.nodes[i];  // in [-1, 1]
    const double x = mid + half * u;
    const cplx k{x, sgn * height * (1.0 - u * u)};
    const cplx dk{half, sgn * height * (-2.0 * u)};
    acc += q.weights[i] * f(k) * dk;
  }
  return acc;
}

}  // namespace

std::vector<SeriesPoint> exterior_decay_probe(const WavePacket& wp, const RVec& v_probe, std::span<const double> times) {
  const VelocitySupport vs = velocity_support(wp);
  const double delta = vs.distance(v_probe);
  if (!(delta > 0)) throw PreconditionError("exterior_decay_probe: probe velocity lies in the velocity support");
  if (wp.dim() == 3)
    require(wp.profile().radially_symmetric(), "exterior_decay_probe: d=3 probes need radially symmetric packets");
  const double speed = euclid(v_probe);
  std::vector<SeriesPoint> out;
  for (double t : times) {
    const double s = wp.dim() == 1 ? v_probe[0] * t : speed * t;
    RayIntegral f{wp, s, t};
    // sign of the phase derivative must be constant on each segment for the deformation
    for (auto [a, b] : ray_segments(wp)) {
      const double da = f.dphase(a), db = f.dphase(b);
      if (da * db <= 0) throw PreconditionError("exterior_decay_probe: stationary point on the contour");
    }
    cplx prev = 0, val = 0;
    int nodes = 64;
    for (int it = 0; it < 8; ++it, nodes *= 2) {
      val = 0;
      for (auto [a, b] : ray_segments(wp)) val += contour_segment(f, a, b, nodes);
      if (it > 0 && std::abs(val - prev) <= 1e-10 * std::abs(val) + 1e-300) break;
      prev = val;
    }
    out.push_back({t, std::abs(val)});
  }
  return out;
}

cplx straight_ray_value(const WavePacket& wp, const RVec& v, double t, int nodes) {
  const double s = wp.dim() == 1 ? v[0] * t : euclid(v) * t;
  RayIntegral f{wp, s, t};
  cplx acc = 0;
  for (auto [a, b] : ray_segments(wp)) {
    const num::Quadrature q = num::gauss_legendre(nodes, a, b);
    for (int i = 0; i < nodes; ++i) acc += q.weights[i] * f(cplx(q.nodes[i], 0.0));
  }
  return acc;
}

double cone_tail_mass(const WavePacket& wp, const minkgeom::VelocityCone& u, double t) {
  const VelocitySupport vs = velocity_support(wp);
  for (const RVec& v : vs.samples())
    if (!u.contains(v)) throw PreconditionError("cone_tail_mass: U does not contain the velocity support");
  const KGSnapshot s = evaluate_snapshot(wp, t);
  double acc = 0;
  RVec x(s.dim);
  for (std::size_t idx = 0; idx < s.values.size(); ++idx) {
    if (t != 0.0) {
      std::size_t rest = idx;
      for (int a = 0; a < s.dim; ++a) {
        x[a] = s.coord(static_cast<int>(rest % s.n)) / t;
        rest /= s.n;
      }
      if (u.contains(x)) continue;
    }
    acc += std::abs(s.values[idx]);
  }
  return acc * s.cell_volume();
}

double cone_tail_mass(const RadialSnapshot& s, double speed) {
  double acc = 0;
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    const double r = j * s.dr;
    if (s.t != 0.0 && r <= speed * std::abs(s.t)) continue;
    acc += 4.0 * kPi * r * r * std::abs(s.values[j]);
  }
  return acc * s.dr;
}

}  // namespace hrlab::wavepacket
