#include "hrlab/minkgeom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hrlab::minkgeom {

namespace {
double norm(const RVec& v) {
  double s = 0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

RVec diff(const RVec& a, const RVec& b) {
  require(a.size() == b.size(), "dimension mismatch");
  RVec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

double box_distance(const VelocityBox& b, const RVec& v) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double e = std::max({b.lo[i] - v[i], 0.0, v[i] - b.hi[i]});
    s += e * e;
  }
  return std::sqrt(s);
}
}  // namespace

double causal_norm(const CausalPoint& p) { return std::abs(p.t) + norm(p.x); }

double interval(const CausalPoint& p, const CausalPoint& q) {
  const RVec dx = diff(q.x, p.x);
  return sq(q.t - p.t) - sq(norm(dx));
}

Separation spacelike_separated(double dt, double dx_norm, double radius_sum) {
  // The set of differences is a double cone of radius T around (dt, dx); the interval is
  // maximized at one of two vertices of that cone.
  const double adt = std::abs(dt), T = radius_sum;
  const double sup = std::max(adt * adt - sq(dx_norm - T), sq(adt + T) - dx_norm * dx_norm);
  const bool sep = dx_norm > adt + T;
  return {sep, sep ? -sup : std::min(-sup, 0.0)};
}

Separation spacelike_separated(const DoubleCone& a, const DoubleCone& b) {
  return spacelike_separated(b.center.t - a.center.t, norm(diff(b.center.x, a.center.x)), a.radius + b.radius);
}

VelocityCone::VelocityCone(std::vector<VelocityBall> balls, std::vector<VelocityBox> boxes)
    : balls_(std::move(balls)), boxes_(std::move(boxes)) {
  for (const auto& b : balls_) require(b.radius >= 0 && std::isfinite(b.radius), "VelocityCone: bad ball radius");
  for (const auto& b : boxes_) {
    require(b.lo.size() == b.hi.size(), "VelocityCone: box dimension mismatch");
    for (std::size_t i = 0; i < b.lo.size(); ++i)
      require(std::isfinite(b.lo[i]) && std::isfinite(b.hi[i]) && b.lo[i] <= b.hi[i], "VelocityCone: bad box");
  }
}

VelocityCone VelocityCone::ball(RVec center, double radius) { return VelocityCone({{std::move(center), radius}}, {}); }

VelocityCone VelocityCone::interval(double lo, double hi) { return VelocityCone({}, {{{lo}, {hi}}}); }

std::size_t VelocityCone::dim() const {
  if (!balls_.empty()) return balls_.front().center.size();
  if (!boxes_.empty()) return boxes_.front().lo.size();
  return 0;
}

bool VelocityCone::contains(const RVec& v) const { return distance(v) == 0.0; }

double VelocityCone::distance(const RVec& v) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& b : balls_) d = std::min(d, std::max(0.0, norm(diff(v, b.center)) - b.radius));
  for (const auto& b : boxes_) d = std::min(d, box_distance(b, v));
  return d;
}

VelocityBall VelocityCone::bounding_ball() const {
  require(!empty(), "bounding_ball: empty velocity set");
  const std::size_t d = dim();
  RVec c(d, 0.0);
  std::size_t count = 0;
  for (const auto& b : balls_) {
    for (std::size_t i = 0; i < d; ++i) c[i] += b.center[i];
    ++count;
  }
  for (const auto& b : boxes_) {
    for (std::size_t i = 0; i < d; ++i) c[i] += 0.5 * (b.lo[i] + b.hi[i]);
    ++count;
  }
  for (double& ci : c) ci /= static_cast<double>(count);
  double r = 0;
  for (const auto& b : balls_) r = std::max(r, norm(diff(b.center, c)) + b.radius);
  for (const auto& b : boxes_) {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) s += sq(std::max(std::abs(b.lo[i] - c[i]), std::abs(b.hi[i] - c[i])));
    r = std::max(r, std::sqrt(s));
  }
  return {c, r};
}

double VelocityCone::separation(const VelocityCone& other) const {
  // Exact for balls and d = 1 boxes; otherwise uses the corner/center tests, which only
  // ever under-estimate through the bounding geometry of each piece.
  double best = std::numeric_limits<double>::infinity();
  auto piece_balls = [](const VelocityCone& u) {
    std::vector<VelocityBall> out = u.balls_;
    for (const auto& b : u.boxes_) {
      VelocityBall bb;
      bb.center.resize(b.lo.size());
      double r = 0;
      for (std::size_t i = 0; i < b.lo.size(); ++i) {
        bb.center[i] = 0.5 * (b.lo[i] + b.hi[i]);
        r += sq(0.5 * (b.hi[i] - b.lo[i]));
      }
      bb.radius = std::sqrt(r);
      out.push_back(bb);
    }
    return out;
  };
  for (const auto& a : piece_balls(*this))
    for (const auto& b : piece_balls(other))
      best = std::min(best, std::max(0.0, norm(diff(a.center, b.center)) - a.radius - b.radius));
  return best;
}

double admissible_window(double d_sep, double tau_min, double c_geo) {
  require(d_sep >= 0 && tau_min > 0, "admissible_window: d_sep >= 0, tau_min > 0");
  return c_geo * d_sep * d_sep * tau_min;
}

double rho_from_separation(double d_sep, double c_geo) {
  require(d_sep >= 0, "rho_from_separation: d_sep >= 0");
  return std::min(c_geo * d_sep * d_sep / 2.0, 0.99);
}

TimeGrid geometric_time_grid(double tau0, double rho, int n) {
  require(tau0 != 0.0 && std::isfinite(tau0), "geometric_time_grid: tau0 must be nonzero");
  require(rho > 0.0 && rho < 1.0, "geometric_time_grid: rho in (0,1)");
  require(n >= 0, "geometric_time_grid: N >= 0");
  TimeGrid g{tau0, rho, n, {}};
  g.taus.reserve(n + 1);
  double tau = tau0;
  for (int k = 0; k <= n; ++k) {
    g.taus.push_back(tau);
    tau *= (1.0 + rho);
  }
  return g;
}

DoubleCone dominant_support_cone(const DoubleCone& region, const VelocityCone& u, double tau) {
  require(std::isfinite(tau), "dominant_support_cone: tau finite");
  const VelocityBall b = u.bounding_ball();
  require(b.center.size() == region.center.x.size(), "dominant_support_cone: dimension mismatch");
  DoubleCone out = region;
  out.center.t += tau;
  for (std::size_t i = 0; i < b.center.size(); ++i) out.center.x[i] += tau * b.center[i];
  out.radius = region.radius + std::abs(tau) * b.radius;
  return out;
}

double calibrate_c_geo(const VelocityCone& u1, const VelocityCone& u2, double region_radius, double tau_lo,
                       double tau_hi, double c_max) {
  const double d_sep = u1.separation(u2);
  if (d_sep <= 0) return 0.0;
  const std::size_t d = u1.dim();
  const DoubleCone region{{0.0, RVec(d, 0.0)}, region_radius};
  auto holds = [&](double c) {
    const double rho = rho_from_separation(d_sep, c);
    constexpr int kTau = 24, kSub = 8;
    for (int i = 0; i <= kTau; ++i) {
      const double t1 = tau_lo * std::pow(tau_hi / tau_lo, static_cast<double>(i) / kTau);
      for (int j = 0; j <= kSub; ++j) {
        const double t2 = t1 * (1.0 + rho * static_cast<double>(j) / kSub);
        const auto a = dominant_support_cone(region, u1, t1);
        const auto b = dominant_support_cone(region, u2, t2);
        if (!spacelike_separated(a, b).separated) return false;
      }
    }
    return true;
  };
  if (holds(c_max)) return c_max;
  double lo = 0.0, hi = c_max;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace hrlab::minkgeom
