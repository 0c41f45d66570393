#include "hrlab/spmodel.hpp"

#include <algorithm>
#include <cmath>

#include "hrlab/numerics.hpp"

namespace hrlab::spmodel {

namespace {

// Geometric edges 0 = e_0 < min_d = e_1 < ... < e_n = top.
RVec distance_edges(double min_d, double top, int cells) {
  RVec e{0.0};
  if (top <= min_d || cells <= 1) {
    e.push_back(top);
    return e;
  }
  for (int i = 0; i < cells; ++i) e.push_back(min_d * std::pow(top / min_d, static_cast<double>(i) / (cells - 1)));
  return e;
}

}  // namespace

SpectralMeasure::SpectralMeasure(const Options& opt)
    : mass_(opt.mass), eps_(opt.eps), alpha_(opt.alpha), mu_max_(opt.mu_max < 0 ? opt.mass + 4.0 : opt.mu_max) {
  require(mass_ >= 0, "SpectralMeasure: mass >= 0");
  require(eps_ > 0 && eps_ <= 1, "SpectralMeasure: eps in (0, 1]");
  require(alpha_ == 0 || alpha_ == 1, "SpectralMeasure: alpha in {0, 1}");
  nodes_.push_back(mass_);
  weights_.push_back(1.0);
  cells_.push_back({mass_, mass_});
  if (!opt.continuum) return;
  require(opt.cells_per_side >= 1 && opt.min_distance > 0, "SpectralMeasure: bad cell options");
  require(mu_max_ >= mass_ + 1, "SpectralMeasure: mu_max >= m + 1");

  // Gauss rule with one or two nodes per cell for the weight |mu - m|^{eps - 1} + alpha on the
  // distance variable; moments are exact.
  auto add_side = [&](double top, int sign) {
    const RVec e = distance_edges(std::min(opt.min_distance, 0.5 * top), top, opt.cells_per_side);
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      const double a = e[i], b = e[i + 1];
      double mom[4];
      for (int j = 0; j < 4; ++j)
        mom[j] = (std::pow(b, eps_ + j) - std::pow(a, eps_ + j)) / (eps_ + j) +
                 alpha_ * (std::pow(b, j + 1.0) - std::pow(a, j + 1.0)) / (j + 1.0);
      RVec dist, wts;
      if (opt.nodes_per_cell == 1) {
        dist = {mom[1] / mom[0]};
        wts = {mom[0]};
      } else {
        // monic orthogonal quadratic x^2 + p x + q
        const double det = mom[1] * mom[1] - mom[0] * mom[2];
        const double p = (mom[0] * mom[3] - mom[1] * mom[2]) / det;
        const double q = (mom[2] * mom[2] - mom[1] * mom[3]) / det;
        const double disc = std::sqrt(std::max(0.0, p * p / 4 - q));
        const double x1 = -p / 2 - disc, x2 = -p / 2 + disc;
        const double w2 = (mom[1] - x1 * mom[0]) / (x2 - x1);
        dist = {x1, x2};
        wts = {mom[0] - w2, w2};
      }
      for (std::size_t r = 0; r < dist.size(); ++r) {
        nodes_.push_back(mass_ + sign * dist[r]);
        weights_.push_back(wts[r]);
        cells_.push_back(sign > 0 ? std::pair{mass_ + a, mass_ + b} : std::pair{mass_ - b, mass_ - a});
      }
    }
  };
  if (mass_ > 0) add_side(mass_, -1);
  add_side(1.0, +1);
  if (alpha_ == 1) {
    require(opt.tail_cells >= 1, "SpectralMeasure: tail_cells >= 1");
    const double lo = mass_ + 1, h = (mu_max_ - lo) / opt.tail_cells;
    for (int i = 0; i < opt.tail_cells; ++i) {
      const double a = lo + i * h, b = a + h;
      nodes_.push_back(0.5 * (a + b));
      weights_.push_back(b - a);
      cells_.push_back({a, b});
    }
  }
}

SpectralMeasure SpectralMeasure::atom_only(double mass) {
  Options o;
  o.mass = mass;
  o.continuum = false;
  return SpectralMeasure(o);
}

double SpectralMeasure::continuous_mass(double a, double b) const {
  require(a <= b, "continuous_mass: a <= b");
  // singular part on [0, m + 1]
  auto prim = [this](double mu) {
    // antiderivative of |mu - m|^{eps - 1}, odd about m
    const double d = mu - mass_;
    return (d >= 0 ? 1.0 : -1.0) * std::pow(std::abs(d), eps_) / eps_;
  };
  const double lo = std::max(a, 0.0), hi = std::min(b, mass_ + 1);
  double w = hi > lo ? prim(hi) - prim(lo) : 0.0;
  if (alpha_ == 1) {
    const double l2 = std::max(a, 0.0), h2 = std::min(b, mu_max_);
    if (h2 > l2) w += h2 - l2;
  }
  return w;
}

SPSpace::SPSpace(wavepacket::Lattice grid, SpectralMeasure measure, double shift)
    : grid_(grid), measure_(std::move(measure)), shift_(shift) {
  require(grid_.n > 0 && grid_.dk > 0, "SPSpace: bad lattice");
  const std::size_t nk = grid_.size();
  k_.resize(nk * grid_.dim);
  for (std::size_t i = 0; i < nk; ++i) {
    std::size_t rest = i;
    for (int a = 0; a < grid_.dim; ++a) {
      k_[i * grid_.dim + a] = grid_.coord(static_cast<int>(rest % grid_.n)) + shift_ * grid_.dk;
      rest /= grid_.n;
    }
  }
  for (std::size_t j = 0; j < n_mass(); ++j)
    if (j != measure_.atom_index() && shift_ == 0.0 && measure_.nodes()[j] < 2 * grid_.dk)
      throw PreconditionError("SPSpace: mass nodes near 0 need a shifted momentum lattice");
  omega_.resize(size());
  weight_.resize(size());
  const double vol = grid_.cell_volume();
  for (std::size_t j = 0; j < n_mass(); ++j) {
    const double mu = measure_.nodes()[j];
    for (std::size_t i = 0; i < nk; ++i) {
      double k2 = 0;
      for (double c : k(i)) k2 += c * c;
      omega_[index(j, i)] = std::sqrt(k2 + mu * mu);
      weight_[index(j, i)] = vol * measure_.weights()[j];
    }
  }
}

SPVector::SPVector(SpacePtr space, CVec amps) : space_(std::move(space)), amps_(std::move(amps)) {
  require(amps_.size() == space_->size(), "SPVector: amplitude count does not match the space");
}

double SPVector::norm() const { return std::sqrt(std::max(0.0, inner(*this, *this).real())); }

SPVector& SPVector::operator+=(const SPVector& o) {
  require(space_ == o.space_, "SPVector: grid mismatch");
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] += o.amps_[i];
  return *this;
}

SPVector& SPVector::operator-=(const SPVector& o) {
  require(space_ == o.space_, "SPVector: grid mismatch");
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] -= o.amps_[i];
  return *this;
}

SPVector& SPVector::operator*=(cplx c) {
  for (cplx& a : amps_) a *= c;
  return *this;
}

SPVector operator+(SPVector a, const SPVector& b) { return a += b; }
SPVector operator-(SPVector a, const SPVector& b) { return a -= b; }
SPVector operator*(cplx c, SPVector a) { return a *= c; }

cplx inner(const SPVector& a, const SPVector& b) {
  require(a.space_ptr() && a.space_ptr() == b.space_ptr(), "inner: grid mismatch");
  const SPSpace& sp = a.space();
  cplx acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i] * sp.weight(i);
  return acc;
}

double symplectic(const SPVector& a, const SPVector& b) { return inner(a, b).imag(); }

SPVector translate(const SPVector& psi, const minkgeom::CausalPoint& x) {
  const SPSpace& sp = psi.space();
  require(static_cast<int>(x.x.size()) == sp.dim(), "translate: dimension mismatch");
  SPVector out = psi;
  for (std::size_t j = 0; j < sp.n_mass(); ++j)
    for (std::size_t i = 0; i < sp.n_k(); ++i) {
      const std::size_t f = sp.index(j, i);
      double kx = 0;
      const auto k = sp.k(i);
      for (int a = 0; a < sp.dim(); ++a) kx += k[a] * x.x[a];
      out[f] *= std::exp(kI * (sp.omega(f) * x.t - kx));
    }
  return out;
}

Region region_all() {
  return [](double, std::span<const double>) { return true; };
}

Region region_empty() {
  return [](double, std::span<const double>) { return false; };
}

Region region_energy_below(double e_max) {
  return [e_max](double w, std::span<const double>) { return w < e_max; };
}

Region region_box(double w_lo, double w_hi, RVec k_lo, RVec k_hi) {
  require(k_lo.size() == k_hi.size(), "region_box: dimension mismatch");
  return [=](double w, std::span<const double> k) {
    if (w < w_lo || w > w_hi) return false;
    for (std::size_t a = 0; a < k.size(); ++a)
      if (k[a] < k_lo[a] || k[a] > k_hi[a]) return false;
    return true;
  };
}

Region region_mass_band(double lo, double hi) {
  return [lo, hi](double w, std::span<const double> k) {
    double k2 = 0;
    for (double c : k) k2 += c * c;
    const double m = std::sqrt(std::max(0.0, w * w - k2));
    return m >= lo && m <= hi;
  };
}

SPVector spectral_filter(const SPVector& psi, const Region& region) {
  const SPSpace& sp = psi.space();
  SPVector out = psi;
  for (std::size_t j = 0; j < sp.n_mass(); ++j)
    for (std::size_t i = 0; i < sp.n_k(); ++i) {
      const std::size_t f = sp.index(j, i);
      if (!region(sp.omega(f), sp.k(i))) out[f] = 0.0;
    }
  return out;
}

SPVector sharp_mass_component(const SPVector& psi) {
  const SPSpace& sp = psi.space();
  SPVector out(psi.space_ptr());
  const std::size_t j = sp.measure().atom_index();
  for (std::size_t i = 0; i < sp.n_k(); ++i) out[sp.index(j, i)] = psi[sp.index(j, i)];
  return out;
}

double Bump1D::operator()(double u) const { return amplitude * num::poly_bump((u - center) / radius, smoothness); }

cplx Bump1D::transform(double q) const {
  // integrand is a polynomial times e^{iqu}; the node count follows the number of oscillations
  const int n = 16 + smoothness + static_cast<int>(std::ceil(std::abs(q) * radius));
  auto rule = [&](int nodes) {
    const num::Quadrature& g = num::gauss_legendre_ref(nodes);
    cplx acc = 0;
    for (int i = 0; i < nodes; ++i) {
      const double u = g.nodes[i];
      acc += g.weights[i] * std::pow(1.0 - u * u, smoothness) * std::exp(kI * q * radius * u);
    }
    return acc * radius * amplitude * std::exp(kI * q * center);
  };
  const cplx a = rule(n), b = rule(2 * n);
  if (std::abs(a - b) > 1e-6 * std::abs(amplitude) * radius)
    throw NumericalError("Bump1D::transform: quadrature not resolved");
  return b;
}

TestFunction TestFunction::separable(Bump1D time, std::vector<Bump1D> space) {
  require(!space.empty(), "TestFunction: need at least one spatial axis");
  TestFunction f;
  f.dim_ = static_cast<int>(space.size());
  f.time_ = time;
  double rx2 = 0;
  for (const auto& b : space) rx2 += sq(std::abs(b.center) + b.radius);
  f.support_radius_ = std::abs(time.center) + time.radius + std::sqrt(rx2);
  f.space_ = std::move(space);
  return f;
}

TestFunction TestFunction::spectral(int dim, Spectral fhat, double support_radius) {
  TestFunction f;
  f.dim_ = dim;
  f.fhat_ = std::move(fhat);
  f.support_radius_ = support_radius;
  return f;
}

cplx TestFunction::fhat(double w, std::span<const double> k) const {
  if (fhat_) return fhat_(w, k);
  cplx v = time_.transform(w);
  for (int a = 0; a < dim_; ++a) v *= space_[a].transform(-k[a]);
  return v * std::pow(2.0 * kPi, -0.5 * (dim_ + 1));
}

SPVector embed_test_function(const TestFunction& f, const SpacePtr& space) {
  require(f.dim() == space->dim(), "embed_test_function: dimension mismatch");
  SPVector out(space);
  for (std::size_t j = 0; j < space->n_mass(); ++j)
    for (std::size_t i = 0; i < space->n_k(); ++i) {
      const std::size_t idx = space->index(j, i);
      const double w = space->omega(idx);
      if (w == 0.0) continue;  // measure-zero point of the massless shell
      out[idx] = f.fhat(w, space->k(i)) / std::sqrt(w);
    }
  return out;
}

cplx ExtendedFunction::fhat(std::span<const double> k, double mu) const {
  require(k.size() == space.size(), "ExtendedFunction: dimension mismatch");
  cplx v = symmetrize ? s_profile.transform(-mu) + s_profile.transform(mu) : s_profile.transform(-mu);
  for (std::size_t a = 0; a < k.size(); ++a) v *= space[a].transform(-k[a]);
  return v * std::pow(2.0 * kPi, -0.5 * (static_cast<double>(k.size()) + 1));
}

TimeZeroVectors timezero_embed(const ExtendedFunction& g, const SpacePtr& space) {
  TimeZeroVectors out{SPVector(space), SPVector(space)};
  for (std::size_t j = 0; j < space->n_mass(); ++j) {
    const double mu = space->measure().nodes()[j];
    for (std::size_t i = 0; i < space->n_k(); ++i) {
      const std::size_t idx = space->index(j, i);
      const double w = space->omega(idx);
      if (w == 0.0) continue;
      const cplx gh = g.fhat(space->k(i), mu);
      out.phi[idx] = gh / std::sqrt(w);
      out.pi[idx] = kI * std::sqrt(w) * gh;
    }
  }
  return out;
}

double lattice_tail_fraction(const SPVector& psi, double band) {
  const SPSpace& sp = psi.space();
  const double kmax = sp.grid().coord(0);
  double total = 0, outer = 0;
  for (std::size_t j = 0; j < sp.n_mass(); ++j)
    for (std::size_t i = 0; i < sp.n_k(); ++i) {
      const std::size_t f = sp.index(j, i);
      const double e = std::norm(psi[f]) * sp.weight(f);
      total += e;
      double kn = 0;
      for (double c : sp.k(i)) kn = std::max(kn, std::abs(c));
      if (kn > band * std::abs(kmax)) outer += e;
    }
  return total > 0 ? outer / total : 0.0;
}

}  // namespace hrlab::spmodel
