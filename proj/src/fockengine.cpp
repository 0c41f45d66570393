#include "hrlab/fockengine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "hrlab/numerics.hpp"

namespace hrlab::fock {

#pragma omp declare reduction(cadd : hrlab::cplx : omp_out += omp_in) initializer(omp_priv = hrlab::cplx(0.0))

cplx perm_enumerate(const CMat& g) {
  const int n = static_cast<int>(g.rows());
  require(g.cols() == n, "perm: square matrix required");
  if (n == 0) return 1.0;
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  cplx acc = 0;
  do {
    cplx t = 1.0;
    for (int i = 0; i < n; ++i) t *= g(i, p[i]);
    acc += t;
  } while (std::next_permutation(p.begin(), p.end()));
  return acc;
}

cplx perm_ryser(const CMat& g) {
  const int n = static_cast<int>(g.rows());
  require(g.cols() == n, "perm: square matrix required");
  if (n == 0) return 1.0;
  // Gray-code walk over column subsets; row sums updated one column at a time.
  std::vector<cplx> rows(n, 0.0);
  cplx acc = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t gray = 0;
  for (std::uint64_t k = 1; k < total; ++k) {
    const std::uint64_t next = k ^ (k >> 1);
    const std::uint64_t changed = next ^ gray;
    const int col = __builtin_ctzll(changed);
    const double sgn = (next & changed) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) rows[i] += sgn * g(i, col);
    gray = next;
    cplx prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= rows[i];
    const int size = __builtin_popcountll(next);
    acc += ((n - size) % 2 ? -1.0 : 1.0) * prod;
  }
  return acc;
}

cplx perm(const CMat& g) {
  const auto n = g.rows();
  if (n > 12) throw SizeError("perm: n > 12");
  return n <= 5 ? perm_enumerate(g) : perm_ryser(g);
}

SectorState SectorState::vacuum(EngineLimits limits) {
  SectorState s(limits);
  s.add_term({1.0, {}});
  return s;
}

int SectorState::max_particles() const {
  int m = 0;
  for (const auto& t : terms_) m = std::max(m, static_cast<int>(t.n()));
  return m;
}

SectorState& SectorState::operator+=(const SectorState& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  discarded_ += o.discarded_;
  return *this;
}

SectorState& SectorState::operator*=(cplx c) {
  for (auto& t : terms_) t.coeff *= c;
  discarded_ *= std::abs(c);
  return *this;
}

SectorState operator+(SectorState a, const SectorState& b) { return a += b; }
SectorState operator-(SectorState a, const SectorState& b) { return a += (-1.0) * b; }
SectorState operator*(cplx c, SectorState a) { return a *= c; }

namespace {

// Distinct factors of a state and per-term index lists into them.
struct FactorTable {
  std::vector<const spmodel::SPVector*> factors;
  std::vector<std::vector<int>> term_idx;
};

FactorTable tabulate(const SectorState& s) {
  FactorTable t;
  std::unordered_map<const spmodel::SPVector*, int> pos;
  for (const auto& term : s.terms()) {
    std::vector<int> idx;
    for (const auto& f : term.factors) {
      auto [it, fresh] = pos.try_emplace(f.get(), static_cast<int>(t.factors.size()));
      if (fresh) t.factors.push_back(f.get());
      idx.push_back(it->second);
    }
    t.term_idx.push_back(std::move(idx));
  }
  return t;
}

CMat cross_gram(const FactorTable& a, const FactorTable& b) {
  CMat g(a.factors.size(), b.factors.size());
#pragma omp parallel for collapse(2) if (a.factors.size() * b.factors.size() > 64)
  for (std::size_t i = 0; i < a.factors.size(); ++i)
    for (std::size_t j = 0; j < b.factors.size(); ++j) g(i, j) = spmodel::inner(*a.factors[i], *b.factors[j]);
  return g;
}

}  // namespace

cplx state_inner(const SectorState& a, const SectorState& b) {
  const FactorTable ta = tabulate(a), tb = tabulate(b);
  const CMat g = cross_gram(ta, tb);
  const auto& at = a.terms();
  const auto& bt = b.terms();
  cplx acc = 0;
#pragma omp parallel for reduction(cadd : acc) schedule(dynamic) if (at.size() * bt.size() > 16)
  for (std::size_t i = 0; i < at.size(); ++i) {
    for (std::size_t j = 0; j < bt.size(); ++j) {
      const std::size_t n = at[i].n();
      if (bt[j].n() != n) continue;
      CMat m(n, n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) m(r, c) = g(ta.term_idx[i][r], tb.term_idx[j][c]);
      acc += std::conj(at[i].coeff) * bt[j].coeff * perm(m);
    }
  }
  return acc;
}

double vec_norm(const SectorState& a) {
  const double v = state_inner(a, a).real();
  return std::sqrt(std::max(0.0, v));
}

namespace {

void maybe_compress(SectorState& s) {
  if (s.terms().size() > s.limits().term_threshold) s = compress(s, s.limits().tol_modes);
}

}  // namespace

SectorState apply_creator(const FactorPtr& psi, const SectorState& s) {
  SectorState out(s.limits());
  out.add_discarded(s.discarded_norm());
  SectorState dropped(s.limits());
  for (const auto& t : s.terms()) {
    ProductTerm nt = t;
    nt.factors.push_back(psi);
    if (static_cast<int>(nt.n()) > s.limits().n_max)
      dropped.add_term(std::move(nt));
    else
      out.add_term(std::move(nt));
  }
  if (!dropped.terms().empty()) out.add_discarded(vec_norm(dropped));
  maybe_compress(out);
  return out;
}

SectorState apply_annihilator(const spmodel::SPVector& psi, const SectorState& s) {
  SectorState out(s.limits());
  out.add_discarded(s.discarded_norm());
  std::unordered_map<const spmodel::SPVector*, cplx> overlap;
  for (const auto& t : s.terms())
    for (std::size_t i = 0; i < t.n(); ++i) {
      const auto* f = t.factors[i].get();
      auto it = overlap.find(f);
      if (it == overlap.end()) it = overlap.emplace(f, spmodel::inner(psi, *f)).first;
      if (it->second == 0.0) continue;
      ProductTerm nt;
      nt.coeff = t.coeff * it->second;
      nt.factors = t.factors;
      nt.factors.erase(nt.factors.begin() + static_cast<std::ptrdiff_t>(i));
      out.add_term(std::move(nt));
    }
  maybe_compress(out);
  return out;
}

double wick_coefficient(const RVec& c, double sigma, int j, int l) {
  const int n = j + l;
  if (n >= static_cast<int>(c.size()) || c[n] == 0.0) return 0.0;
  const double binom = std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(l + 1.0));
  return c[n] * binom / (std::pow(sigma, n) * std::sqrt(std::tgamma(n + 1.0)) * std::pow(2.0, 0.5 * n));
}

SectorState apply_segal_poly(const RVec& coeffs, const FactorPtr& psi, const SectorState& s) {
  require(!coeffs.empty(), "apply_segal_poly: empty coefficient list");
  const int deg = static_cast<int>(coeffs.size()) - 1;
  require(deg <= 12, "apply_segal_poly: degree <= 12");
  const double sigma = psi->norm() / std::sqrt(2.0);
  SectorState out(s.limits());
  if (sigma == 0.0) {
    // Phi_S(0) = 0: only the constant survives
    out = coeffs[0] * s;
    return out;
  }
  SectorState lowered = s;  // a(psi)^l s
  for (int l = 0; l <= deg; ++l) {
    // Horner in a*(psi): sum_j b_{jl} a*^j lowered
    int top = -1;
    for (int j = deg - l; j >= 0; --j)
      if (wick_coefficient(coeffs, sigma, j, l) != 0.0) {
        top = j;
        break;
      }
    if (top >= 0) {
      SectorState acc = wick_coefficient(coeffs, sigma, top, l) * lowered;
      for (int j = top - 1; j >= 0; --j) {
        acc = apply_creator(psi, acc);
        const double b = wick_coefficient(coeffs, sigma, j, l);
        if (b != 0.0) acc += b * lowered;
      }
      out += acc;
    }
    if (l < deg) lowered = apply_annihilator(*psi, lowered);
  }
  maybe_compress(out);
  return out;
}

SectorState project_out_vacuum(const SectorState& s) {
  SectorState out(s.limits());
  out.add_discarded(s.discarded_norm());
  for (const auto& t : s.terms())
    if (t.n() > 0) out.add_term(t);
  return out;
}

SectorState sector(const SectorState& s, std::size_t n) {
  SectorState out(s.limits());
  for (const auto& t : s.terms())
    if (t.n() == n) out.add_term(t);
  return out;
}

ModeBasis::ModeBasis(const std::vector<spmodel::SPVector>& vectors, double tol_modes) {
  require(!vectors.empty(), "build_mode_basis: empty input");
  const auto n = static_cast<Eigen::Index>(vectors.size());
  CMat g(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a; b < n; ++b) {
      g(a, b) = spmodel::inner(vectors[a], vectors[b]);
      g(b, a) = std::conj(g(a, b));
    }
  if ((g - CMat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12) {
    // already orthonormal: keep the inputs as modes
    modes_ = vectors;
    spectrum_.assign(vectors.size(), 1.0);
    return;
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(g);
  const Eigen::VectorXd lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  if (!(top > 0)) throw NumericalError("build_mode_basis: all inputs vanish");
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    spectrum_.push_back(lam(i));
    if (lam(i) <= tol_modes * top) continue;
    spmodel::SPVector e(vectors.front().space_ptr());
    for (Eigen::Index a = 0; a < n; ++a) {
      const cplx c = es.eigenvectors()(a, i) / std::sqrt(lam(i));
      if (c == 0.0) continue;
      for (std::size_t k = 0; k < e.size(); ++k) e[k] += c * vectors[a][k];
    }
    modes_.push_back(std::move(e));
  }
  // two Gram-Schmidt sweeps against the round-off of small eigenvalues
  for (int sweep = 0; sweep < 2; ++sweep)
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) modes_[i] -= spmodel::inner(modes_[j], modes_[i]) * modes_[j];
      modes_[i] *= 1.0 / modes_[i].norm();
    }
  for (const auto& v : vectors) {
    const double nv = v.norm();
    if (nv == 0) continue;
    const spmodel::SPVector r = v - reconstruct(coefficients(v));
    max_residual_ = std::max(max_residual_, r.norm() / nv);
  }
}

CVecE ModeBasis::coefficients(const spmodel::SPVector& v) const {
  CVecE c(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) c(i) = spmodel::inner(modes_[i], v);
  return c;
}

spmodel::SPVector ModeBasis::reconstruct(const CVecE& c) const {
  spmodel::SPVector out(modes_.front().space_ptr());
  for (std::size_t i = 0; i < modes_.size(); ++i) out += c(i) * modes_[i];
  return out;
}

SectorState compress(const SectorState& s, double tol_modes) {
  const FactorTable table = tabulate(s);
  SectorState out(s.limits());
  out.add_discarded(s.discarded_norm());
  if (table.factors.empty()) {
    cplx c0 = 0;
    for (const auto& t : s.terms()) c0 += t.coeff;
    if (c0 != 0.0) out.add_term({c0, {}});
    return out;
  }
  std::vector<spmodel::SPVector> inputs;
  for (const auto* f : table.factors) inputs.push_back(*f);
  const ModeBasis basis(inputs, tol_modes);
  std::vector<CVecE> coef;
  for (const auto* f : table.factors) coef.push_back(basis.coefficients(*f));
  const int m = static_cast<int>(basis.size());
  std::vector<FactorPtr> mode_ptr;
  for (const auto& e : basis.modes()) mode_ptr.push_back(std::make_shared<const spmodel::SPVector>(e));

  std::map<std::vector<int>, cplx> merged;
  for (std::size_t ti = 0; ti < s.terms().size(); ++ti) {
    const auto& idx = table.term_idx[ti];
    const std::size_t n = idx.size();
    std::vector<int> multi(n, 0);
    while (true) {
      cplx w = s.terms()[ti].coeff;
      for (std::size_t r = 0; r < n && w != 0.0; ++r) w *= coef[idx[r]](multi[r]);
      if (w != 0.0) {
        std::vector<int> key = multi;
        std::sort(key.begin(), key.end());
        merged[key] += w;
      }
      std::size_t r = 0;
      while (r < n && ++multi[r] == m) multi[r++] = 0;
      if (r == n) break;
    }
  }
  for (const auto& [key, c] : merged) {
    if (c == 0.0) continue;
    ProductTerm t{c, {}};
    for (int i : key) t.factors.push_back(mode_ptr[i]);
    out.add_term(std::move(t));
  }
  RVec loss(table.factors.size()), fnorm(table.factors.size());
  for (std::size_t f = 0; f < table.factors.size(); ++f) {
    fnorm[f] = table.factors[f]->norm();
    loss[f] = (*table.factors[f] - basis.reconstruct(coef[f])).norm();
  }
  double bound = 0;
  for (std::size_t ti = 0; ti < s.terms().size(); ++ti) {
    const auto& idx = table.term_idx[ti];
    double tb = 0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      double prod = loss[idx[r]];
      for (std::size_t q = 0; q < idx.size(); ++q)
        if (q != r) prod *= fnorm[idx[q]];
      tb += prod;
    }
    bound += std::abs(s.terms()[ti].coeff) * std::sqrt(std::tgamma(idx.size() + 1.0)) * tb;
  }
  out.add_discarded(bound);
  return out;
}

Distance state_distance(const SectorState& a, const SectorState& b, double tol_modes) {
  const SectorState d = compress(a - b, tol_modes);
  return {vec_norm(d), std::max(0.0, d.discarded_norm() - a.discarded_norm() - b.discarded_norm())};
}

FockSpace::FockSpace(int modes, int n_max, std::size_t dim_budget, Truncation kind)
    : modes_(modes), n_max_(n_max), kind_(kind) {
  require(modes >= 1 && n_max >= 0, "FockSpace: modes >= 1, n_max >= 0");
  const double dim = kind == Truncation::total
                         ? std::exp(std::lgamma(modes + n_max + 1.0) - std::lgamma(modes + 1.0) - std::lgamma(n_max + 1.0))
                         : std::pow(n_max + 1.0, modes);
  if (dim > static_cast<double>(dim_budget) + 0.5) throw SizeError("FockSpace: dimension budget exceeded");
  // occupations ordered by total particle number, then lexicographically
  const int top = kind == Truncation::total ? n_max : n_max * modes;
  for (int n = 0; n <= top; ++n) {
    std::vector<int> occ(modes, 0);
    std::function<void(int, int)> fill = [&](int i, int left) {
      if (i == modes - 1) {
        if (kind == Truncation::per_mode && left > n_max) return;
        occ[i] = left;
        states_.push_back(occ);
        return;
      }
      for (int k = std::min(left, kind == Truncation::per_mode ? n_max : left); k >= 0; --k) {
        occ[i] = k;
        fill(i + 1, left - k);
      }
    };
    fill(0, n);
  }
  std::map<std::vector<int>, std::size_t> pos;
  for (std::size_t i = 0; i < states_.size(); ++i) pos[states_[i]] = i;
  const auto d = static_cast<Eigen::Index>(states_.size());
  for (int i = 0; i < modes; ++i) {
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t s = 0; s < states_.size(); ++s) {
      if (states_[s][i] == 0) continue;
      std::vector<int> lower = states_[s];
      lower[i] -= 1;
      trip.emplace_back(static_cast<int>(pos[lower]), static_cast<int>(s), std::sqrt(static_cast<double>(states_[s][i])));
    }
    SpMat a(d, d);
    a.setFromTriplets(trip.begin(), trip.end());
    ann_.push_back(std::move(a));
  }
}

std::size_t FockSpace::index_of(const std::vector<int>& occ) const {
  auto it = std::find(states_.begin(), states_.end(), occ);
  require(it != states_.end(), "FockSpace: occupation not in the truncated space");
  return static_cast<std::size_t>(it - states_.begin());
}

int FockSpace::particles(std::size_t idx) const { return std::accumulate(states_[idx].begin(), states_[idx].end(), 0); }

SpMat FockSpace::annihilator(const CVecE& c) const {
  require(c.size() == modes_, "FockSpace: coefficient count");
  SpMat a(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
  for (int i = 0; i < modes_; ++i)
    if (c(i) != 0.0) a += std::conj(c(i)) * ann_[i];
  return a;
}

SpMat FockSpace::creator(const CVecE& c) const { return SpMat(annihilator(c).adjoint()); }

CMat FockSpace::segal(const CVecE& c) const {
  const SpMat a = annihilator(c);
  const SpMat ad = a.adjoint();
  return CMat(ad + a) / std::sqrt(2.0);
}

CVecE FockSpace::vacuum() const {
  CVecE v = CVecE::Zero(static_cast<Eigen::Index>(dim()));
  v(0) = 1.0;
  return v;
}

CMat FockSpace::identity() const { return CMat::Identity(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim())); }

CMat hermitian_function(const CMat& h, const std::function<double(double)>& g) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  Eigen::VectorXd gl = es.eigenvalues().unaryExpr([&](double x) { return g(x); });
  return es.eigenvectors() * gl.asDiagonal() * es.eigenvectors().adjoint();
}

double op_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<CMat> svd(a);
  return svd.singularValues()(0);
}

double hermiticity_defect(const CMat& a) {
  const double n = op_norm(a);
  return n == 0 ? 0.0 : op_norm(a - a.adjoint()) / n;
}

CVecE to_dense(const SectorState& s, const ModeBasis& basis, const FockSpace& space) {
  require(static_cast<int>(basis.size()) == space.modes(), "to_dense: basis size does not match the Fock space");
  CVecE out = CVecE::Zero(static_cast<Eigen::Index>(space.dim()));
  std::unordered_map<const spmodel::SPVector*, SpMat> creators;
  for (const auto& t : s.terms()) {
    CVecE v = space.vacuum() * t.coeff;
    for (const auto& f : t.factors) {
      auto it = creators.find(f.get());
      if (it == creators.end()) it = creators.emplace(f.get(), space.creator(basis.coefficients(*f))).first;
      v = it->second * v;
    }
    out += v;
  }
  return out;
}

namespace {

struct Density {
  std::vector<std::size_t> idx;  // flat lattice indices where the product is nonzero
  std::vector<cplx> val;
};

Density pair_density(const spmodel::SPVector& a, const spmodel::SPVector& b) {
  Density d;
  const auto& sp = a.space();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const cplx v = std::conj(a[i]) * b[i];
    if (v == 0.0) continue;
    d.idx.push_back(i);
    d.val.push_back(v * sp.weight(i));
  }
  return d;
}

}  // namespace

cplx spectral_pairing(const SectorState& a, const SectorState& b, const EnergyMomentumWeight& w) {
  if (a.max_particles() > 3 || b.max_particles() > 3) throw SizeError("spectral_pairing: sectors above n = 3");
  cplx acc = 0;
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms()) {
      const std::size_t n = ta.n();
      if (tb.n() != n) continue;
      const cplx pref = std::conj(ta.coeff) * tb.coeff;
      if (n == 0) {
        const double* none = nullptr;
        acc += pref * w(0.0, std::span<const double>(none, 0));
        continue;
      }
      const auto& sp = ta.factors.front()->space();
      const int dim = sp.dim();
      std::vector<int> p(n);
      std::iota(p.begin(), p.end(), 0);
      do {
        std::vector<Density> rho;
        for (std::size_t i = 0; i < n; ++i) rho.push_back(pair_density(*ta.factors[i], *tb.factors[p[i]]));
        cplx sum = 0;
        RVec k(dim);
        auto total = [&](std::initializer_list<std::size_t> flats) {
          double om = 0;
          std::fill(k.begin(), k.end(), 0.0);
          for (std::size_t f : flats) {
            om += sp.omega(f);
            const auto kk = sp.k(f % sp.n_k());
            for (int a2 = 0; a2 < dim; ++a2) k[a2] += kk[a2];
          }
          return w(om, k);
        };
        if (n == 1) {
          for (std::size_t i = 0; i < rho[0].idx.size(); ++i) sum += rho[0].val[i] * total({rho[0].idx[i]});
        } else if (n == 2) {
          for (std::size_t i = 0; i < rho[0].idx.size(); ++i)
            for (std::size_t j = 0; j < rho[1].idx.size(); ++j)
              sum += rho[0].val[i] * rho[1].val[j] * total({rho[0].idx[i], rho[1].idx[j]});
        } else {
          for (std::size_t i = 0; i < rho[0].idx.size(); ++i)
            for (std::size_t j = 0; j < rho[1].idx.size(); ++j)
              for (std::size_t l = 0; l < rho[2].idx.size(); ++l)
                sum += rho[0].val[i] * rho[1].val[j] * rho[2].val[l] *
                       total({rho[0].idx[i], rho[1].idx[j], rho[2].idx[l]});
        }
        acc += pref * sum;
      } while (std::next_permutation(p.begin(), p.end()));
    }
  return acc;
}

}  // namespace hrlab::fock
