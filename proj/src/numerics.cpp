#include "hrlab/numerics.hpp"

#include <fftw3.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_cdf.h>
#include <gsl/gsl_fit.h>
#include <gsl/gsl_sf_gamma.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace hrlab::num {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
}  // namespace

Quadrature gauss_legendre(int n, double a, double b) {
  require(n >= 1, "gauss_legendre: n >= 1");
  gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(static_cast<size_t>(n));
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) gsl_integration_glfixed_point(a, b, static_cast<size_t>(i), &q.nodes[i], &q.weights[i], t);
  gsl_integration_glfixed_table_free(t);
  return q;
}

const Quadrature& gauss_legendre_ref(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Quadrature>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Quadrature>(gauss_legendre(n));
  return *slot;
}

Quadrature graded_half_line(int panels, int per_panel, double b, double grading) {
  require(panels >= 1 && b > 0, "graded_half_line: bad arguments");
  RVec edges(panels + 1);
  edges[0] = 0.0;
  for (int i = 1; i <= panels; ++i) edges[i] = b * std::pow(grading, panels - i);
  Quadrature base = gauss_legendre(per_panel);
  Quadrature q;
  for (int p = 0; p < panels; ++p) {
    const double lo = edges[p], hi = edges[p + 1];
    for (int i = 0; i < per_panel; ++i) {
      q.nodes.push_back(0.5 * (lo + hi) + 0.5 * (hi - lo) * base.nodes[i]);
      q.weights.push_back(0.5 * (hi - lo) * base.weights[i]);
    }
  }
  return q;
}

void fft(std::span<cplx> data, int sign) {
  if (data.empty()) return;
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan.reset(fftw_plan_dft_1d(static_cast<int>(data.size()), buf, buf, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                FFTW_ESTIMATE));
  }
  fftw_execute(plan.get());
}

void fft3(std::span<cplx> data, int n, int sign) {
  require(data.size() == static_cast<std::size_t>(n) * n * n, "fft3: size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan.reset(fftw_plan_dft_3d(n, n, n, buf, buf, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE));
  }
  fftw_execute(plan.get());
}

double poly_bump(double r, int s) {
  if (std::abs(r) >= 1.0) return 0.0;
  return std::pow(1.0 - r * r, s);
}

cplx poly_bump(cplx z, int s) { return std::pow(1.0 - z * z, s); }

double smooth_step(double u, int s) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return gsl_sf_beta_inc(s + 1.0, s + 1.0, u);
}

double flat_top(double x, double c, double half_flat, double ramp, int s) {
  const double d = std::abs(x - c) - half_flat;
  if (d <= 0.0) return 1.0;
  return 1.0 - smooth_step(d / ramp, s);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 5) throw NumericalError("fit_loglog: need >= 5 points");
  const std::size_t n = x.size();
  RVec lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw NumericalError("fit_loglog: nonpositive value");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double c0, c1, cov00, cov01, cov11, sumsq;
  gsl_fit_linear(lx.data(), 1, ly.data(), 1, n, &c0, &c1, &cov00, &cov01, &cov11, &sumsq);
  LogLogFit f;
  f.slope = c1;
  f.intercept = c0;
  f.ci = gsl_cdf_tdist_Pinv(0.975, static_cast<double>(n - 2)) * std::sqrt(cov11);
  f.residual = std::sqrt(sumsq / static_cast<double>(n));
  return f;
}

}  // namespace hrlab::num
