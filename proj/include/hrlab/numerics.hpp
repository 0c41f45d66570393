#pragma once

#include <span>
#include <vector>

#include "hrlab/common.hpp"

namespace hrlab::num {

struct Quadrature {
  RVec nodes;
  RVec weights;
};

// n-point Gauss-Legendre rule mapped to [a, b].
Quadrature gauss_legendre(int n, double a = -1.0, double b = 1.0);
// Shared n-point rule on [-1, 1]; safe to call from several threads.
const Quadrature& gauss_legendre_ref(int n);

// Composite Gauss-Legendre on [0, b] with panels graded geometrically toward 0.
Quadrature graded_half_line(int panels, int per_panel, double b, double grading = 0.35);

// Unnormalized DFT in place. sign = -1: sum x_j e^{-2 pi i jk/n}; sign = +1: e^{+...}.
void fft(std::span<cplx> data, int sign);
void fft3(std::span<cplx> data, int n, int sign);

// Compact polynomial bump (1 - r^2)^s for r < 1, else 0; also for complex argument.
double poly_bump(double r, int s);
cplx poly_bump(cplx z, int s);

// C^s smooth step on [0,1]: 0 at u <= 0, 1 at u >= 1 (regularized incomplete beta I_u(s+1, s+1)).
double smooth_step(double u, int s);

// Flat-top window: 1 on |x - c| <= half_flat, smooth falloff to 0 over width `ramp`.
double flat_top(double x, double c, double half_flat, double ramp, int s);

std::size_t next_pow2(std::size_t n);

// Least squares of log y against log x; ci is the 95% Student-t half-width of the slope.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci = 0.0;
  double residual = 0.0;  // rms of log residuals
};
// Needs >= 5 points with x, y > 0; throws NumericalError otherwise.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace hrlab::num
