#include "hrlab/rsfamily.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "hrlab/numerics.hpp"

namespace hrlab::rs {

namespace {

constexpr double kGaussCut = 14.0;  // N(0,1) density below 1e-42 beyond this

double gauss_density(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

// h_0 .. h_n at z (orthonormal for N(0, 1)).
void hermite_values(int n, double z, RVec& h) {
  h.assign(n + 1, 0.0);
  h[0] = 1.0;
  if (n >= 1) h[1] = z;
  for (int k = 1; k < n; ++k) h[k + 1] = (z * h[k] - std::sqrt(static_cast<double>(k)) * h[k - 1]) / std::sqrt(k + 1.0);
}

// x (e^{-beta |x|^{1/gamma}} - 1) without cancellation.
double damping_defect(double gamma, double beta, double x) {
  return x * std::expm1(-beta * std::pow(std::abs(x), 1.0 / gamma));
}

}  // namespace

double RSFamilySpec::g(double beta, double x) const {
  if (beta == 0.0) return x;
  return x * std::exp(-beta * std::pow(std::abs(x), 1.0 / gamma));
}

RSFamilySpec make_spec(const spmodel::SPVector& psi, double gamma, int degree, double region_radius) {
  require(gamma > 0, "RSFamilySpec: gamma > 0");
  require(degree >= 1 && degree % 2 == 1, "RSFamilySpec: degree must be odd");
  require(psi.norm() > 0, "RSFamilySpec: zero test vector");
  RSFamilySpec s;
  s.gamma = gamma;
  s.degree = degree;
  s.region_radius = region_radius;
  s.psi = psi;
  return s;
}

double gauss_expectation(const std::function<double(double)>& f, int panels, int per_panel) {
  const num::Quadrature q = num::graded_half_line(panels, per_panel, kGaussCut, 0.5);
  double acc = 0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double z = q.nodes[i];
    acc += q.weights[i] * gauss_density(z) * (f(z) + f(-z));
  }
  return acc;
}

double hermite_series(const RVec& coeffs, double sigma, double x) {
  if (coeffs.empty()) return 0.0;
  RVec h;
  hermite_values(static_cast<int>(coeffs.size()) - 1, x / sigma, h);
  double acc = 0;
  for (std::size_t n = 0; n < coeffs.size(); ++n) acc += coeffs[n] * h[n];
  return acc;
}

HermiteExpansion hermite_truncate(const RSFamilySpec& spec, double beta, bool strict, int panels, int per_panel) {
  require(beta >= 0, "hermite_truncate: beta >= 0");
  const double sigma = spec.sigma();
  require(sigma > 0, "hermite_truncate: sigma > 0");
  const int deg = spec.degree;
  HermiteExpansion out;
  out.coeffs.assign(deg + 1, 0.0);
  // g odd: only odd degrees survive, E[g h_n] = 2 int_0^inf g h_n dN
  const num::Quadrature q = num::graded_half_line(panels, per_panel, kGaussCut, 0.5);
  RVec h;
  double g2 = 0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double z = q.nodes[i];
    const double w = 2.0 * q.weights[i] * gauss_density(z);
    const double gv = spec.g(beta, sigma * z);
    hermite_values(deg, z, h);
    for (int n = 1; n <= deg; n += 2) out.coeffs[n] += w * gv * h[n];
    g2 += w * gv * gv;
  }
  double kept = 0;
  for (double c : out.coeffs) kept += c * c;
  out.residual = g2 > 0 ? std::sqrt(std::max(0.0, g2 - kept) / g2) : 0.0;
  if (strict && out.residual > 0.1)
    throw TruncationError("hermite_truncate: residual above 10% of ||g||", out.residual);
  return out;
}

double rs_norm_closed_form(double beta, double gamma) {
  require(beta > 0 && gamma > 0, "rs_norm_closed_form: beta, gamma > 0");
  // h(x) = x e^{-beta x^{1/gamma}}, h' = 0 at x^{1/gamma} = gamma / beta
  return std::pow(gamma / beta, gamma) * std::exp(-gamma);
}

double vacuum_error(const RSFamilySpec& spec, double beta) {
  require(beta >= 0, "vacuum_error: beta >= 0");
  if (beta == 0.0) return 0.0;
  const double sigma = spec.sigma();
  const double e2 = gauss_expectation([&](double z) { return sq(damping_defect(spec.gamma, beta, sigma * z)); });
  return std::sqrt(std::max(0.0, e2));
}

fock::SectorState rs_apply(const RSFamilySpec& spec, double beta, const fock::SectorState& s) {
  const HermiteExpansion h = hermite_truncate(spec, beta);
  return fock::apply_segal_poly(h.coeffs, std::make_shared<const spmodel::SPVector>(spec.psi), s);
}

fock::CMat rs_dense_single_mode(const RSFamilySpec& spec, double beta, int n_max) {
  fock::FockSpace space(1, n_max);
  fock::CVecE c(1);
  c(0) = spec.psi.norm();
  return fock::hermitian_function(space.segal(c), [&](double x) { return spec.g(beta, x); });
}

double rs_dense_norm(const RSFamilySpec& spec, double beta, int n_max) {
  return fock::op_norm(rs_dense_single_mode(spec, beta, n_max));
}

DegreeFit measure_degree(const RVec& betas, const RVec& errors, const RVec& norms) {
  const std::size_t n = betas.size();
  if (n < 6 || errors.size() != n || norms.size() != n) throw NumericalError("measure_degree: need >= 6 points");
  const auto [lo, hi] = std::minmax_element(betas.begin(), betas.end());
  if (!(*lo > 0) || *hi / *lo < 100.0 * (1 - 1e-12)) throw NumericalError("measure_degree: beta grid spans < 2 decades");
  // sort by beta; the error must increase with beta and the norm must not
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return betas[a] < betas[b]; });
  RVec inv_bp(n), nm(n);
  DegreeFit out;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    if (r > 0) {
      const std::size_t p = order[r - 1];
      if (!(errors[i] > errors[p]) || norms[i] > norms[p] * (1 + 1e-12))
        throw NumericalError("measure_degree: non-monotone series");
    }
    // beta' = error(beta) is the smallest rescaling with ||A Omega - Psi|| <= beta'
    out.beta_prime.push_back(errors[i]);
    inv_bp[r] = 1.0 / errors[i];
    nm[r] = norms[i];
  }
  const num::LogLogFit f = num::fit_loglog(inv_bp, nm);
  out.gamma_hat = f.slope;
  out.ci = f.ci;
  out.residual = f.residual;
  return out;
}

DifferentiabilityResult uniform_differentiability_ratio(const RSFamilySpec& spec, double beta, int order, int n_max) {
  require(order >= 0 && order <= 2, "uniform_differentiability_ratio: order in 0..2");
  const spmodel::SPSpace& sp = spec.psi.space();
  auto times_omega = [&](const spmodel::SPVector& v) {
    spmodel::SPVector o = v;
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= sp.omega(i);
    return o;
  };
  // span{psi, omega psi, ..., omega^order psi} carries every nested commutator of a function of Phi(psi)
  std::vector<spmodel::SPVector> krylov{spec.psi};
  for (int r = 0; r < order; ++r) krylov.push_back(times_omega(krylov.back()));
  const fock::ModeBasis basis(krylov, 1e-12);
  DifferentiabilityResult out;
  out.leakage = basis.max_residual();
  const int m = static_cast<int>(basis.size());
  fock::FockSpace space(m, n_max, 20000);
  fock::CMat a = fock::hermitian_function(space.segal(basis.coefficients(spec.psi)),
                                          [&](double x) { return spec.g(beta, x); });
  const double a_norm = fock::op_norm(a);
  // dGamma of the compressed one-particle energy
  fock::SpMat h(space.dim(), space.dim());
  for (int i = 0; i < m; ++i) {
    const fock::CVecE wi = basis.coefficients(times_omega(basis.modes()[i]));
    for (int j = 0; j < m; ++j) {
      // <e_j, omega e_i> a_j^* a_i
      if (std::abs(wi(j)) == 0.0) continue;
      h += fock::SpMat(wi(j) * fock::SpMat(space.annihilator(j).adjoint()) * space.annihilator(i));
    }
  }
  const fock::CMat hd = fock::CMat(h);
  fock::CMat d = a;
  for (int r = 0; r < order; ++r) d = kI * (hd * d - d * hd);
  out.ratio = fock::op_norm(d) / a_norm;
  return out;
}

SpanProjector::SpanProjector(const std::vector<spmodel::SPVector>& dictionary, double rel_cut) {
  require(!dictionary.empty(), "SpanProjector: empty dictionary");
  const spmodel::SpacePtr& sp = dictionary.front().space_ptr();
  const std::size_t n = sp->size(), k = dictionary.size();
  fock::CMat m(n, k);
  RVec sw(n);
  for (std::size_t i = 0; i < n; ++i) sw[i] = std::sqrt(sp->weight(i));
  for (std::size_t c = 0; c < k; ++c) {
    require(dictionary[c].space_ptr() == sp, "SpanProjector: grid mismatch");
    for (std::size_t i = 0; i < n; ++i) m(i, c) = sw[i] * dictionary[c][i];
  }
  // thin SVD of the weighted matrix: singular values squared are the Gram eigenvalues
  Eigen::BDCSVD<fock::CMat> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  require(smax > 0, "SpanProjector: zero dictionary");
  int keep = 0;
  while (keep < s.size() && sq(s(keep)) > rel_cut * sq(smax)) ++keep;
  regularized_ = keep < s.size();
  condition_ = sq(smax / s(keep - 1));
  const fock::CMat& u = svd.matrixU();
  for (int c = 0; c < keep; ++c) {
    spmodel::SPVector e(sp);
    for (std::size_t i = 0; i < n; ++i) e[i] = u(i, c) / sw[i];
    basis_.push_back(std::move(e));
  }
}

spmodel::SPVector SpanProjector::apply(const spmodel::SPVector& v) const {
  spmodel::SPVector out(v.space_ptr());
  for (const auto& e : basis_) {
    const cplx c = inner(e, v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * e[i];
  }
  return out;
}

std::vector<spmodel::ExtendedFunction> make_dictionary(const DictionarySpec& d, int dim) {
  require(dim >= 1 && d.radius > 0 && d.x_bumps >= 1 && d.s_bumps >= 1, "make_dictionary: bad sizes");
  require(d.bump_fraction > 0 && d.bump_fraction <= 1, "make_dictionary: bump_fraction in (0, 1]");
  const bool cylinder = d.s_extent > 0;
  // half side of the box holding the product support
  const double ax = cylinder ? d.radius / std::sqrt(static_cast<double>(dim)) : d.radius / std::sqrt(dim + 1.0);
  const double s_ext = cylinder ? d.s_extent : ax;
  const double rx = d.bump_fraction * ax;
  auto x_center = [&](int i) {
    return d.x_bumps == 1 ? 0.0 : -(ax - rx) + 2.0 * (ax - rx) * i / (d.x_bumps - 1);
  };
  // symmetrized s-profiles: centers in [0, s_ext - rs]
  const double rs = 2.0 * s_ext / (d.s_bumps + 1);
  auto s_center = [&](int j) { return d.s_bumps == 1 ? 0.0 : (s_ext - rs) * j / (d.s_bumps - 1); };

  std::vector<spmodel::ExtendedFunction> out;
  std::vector<int> idx(dim, 0);
  while (true) {
    std::vector<spmodel::Bump1D> xs;
    for (int a = 0; a < dim; ++a) xs.push_back({x_center(idx[a]), rx, d.smoothness, 1.0});
    for (int j = 0; j < d.s_bumps; ++j) out.push_back({xs, {s_center(j), rs, d.smoothness, 1.0}, true});
    int a = 0;
    while (a < dim && ++idx[a] == d.x_bumps) idx[a++] = 0;
    if (a == dim) break;
  }
  return out;
}

AltProjResult alternating_projection(const spmodel::SPVector& target, const DictionarySpec& dict, int iterations) {
  require(iterations >= 1, "alternating_projection: iterations >= 1");
  const spmodel::SpacePtr& sp = target.space_ptr();
  std::vector<spmodel::SPVector> phis, pis;
  for (const auto& g : make_dictionary(dict, sp->dim())) {
    spmodel::TimeZeroVectors tz = spmodel::timezero_embed(g, sp);
    phis.push_back(std::move(tz.phi));
    pis.push_back(std::move(tz.pi));
  }
  const SpanProjector p_phi(phis), p_pi(pis);
  AltProjResult out;
  out.rank_phi = p_phi.rank();
  out.rank_pi = p_pi.rank();
  out.condition = std::max(p_phi.condition(), p_pi.condition());
  out.regularized = p_phi.regularized() || p_pi.regularized();
  spmodel::SPVector v = target;
  for (int it = 0; it < iterations; ++it) {
    v -= p_phi.apply(v);
    v -= p_pi.apply(v);
    out.residuals.push_back(v.norm());
  }
  return out;
}

SharpMassFamily gff_sharp_mass_family(const spmodel::SPVector& target, double beta, int smoothness) {
  const spmodel::SPSpace& sp = target.space();
  const spmodel::SpectralMeasure& meas = sp.measure();
  if (meas.alpha() != 0) throw PreconditionError("gff_sharp_mass_family: alpha = 1 is unsupported");
  require(beta > 0, "gff_sharp_mass_family: beta > 0");
  const std::size_t atom = meas.atom_index();
  const double m = meas.mass();
  require((target - spmodel::sharp_mass_component(target)).norm() <= 1e-12 * target.norm(),
          "gff_sharp_mass_family: target must live on the atom");
  SharpMassFamily out;
  out.width = beta;
  out.vector = spmodel::SPVector(target.space_ptr());
  for (std::size_t j = 0; j < sp.n_mass(); ++j) {
    const double mol = num::poly_bump((meas.nodes()[j] - m) / beta, smoothness);
    if (mol == 0.0) continue;
    for (std::size_t i = 0; i < sp.n_k(); ++i) {
      // target = g^(omega_m) / sqrt(omega_m) on the atom; the same g^ seen at mass mu_j
      const std::size_t fa = sp.index(atom, i), fj = sp.index(j, i);
      out.vector[fj] = mol * target[fa] * std::sqrt(sp.omega(fa) / sp.omega(fj));
    }
  }
  const double total = sq(out.vector.norm());
  const spmodel::SPVector off = out.vector - spmodel::sharp_mass_component(out.vector);
  out.off_atom_fraction = total > 0 ? sq(off.norm()) / total : 0.0;
  const double tn = target.norm();
  out.sharp_error = tn > 0 ? (out.vector - target).norm() / tn : 0.0;
  return out;
}

}  // namespace hrlab::rs
