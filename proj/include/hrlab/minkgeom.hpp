#pragma once

#include <vector>

#include "hrlab/common.hpp"

namespace hrlab::minkgeom {

struct CausalPoint {
  double t = 0.0;
  RVec x;  // spatial part, length d
};

double causal_norm(const CausalPoint& p);
// (q - p)^2 with signature (+,-,-,-).
double interval(const CausalPoint& p, const CausalPoint& q);

struct DoubleCone {
  CausalPoint center;
  double radius = 1.0;
};

struct Separation {
  bool separated = false;
  double margin = 0.0;  // minus the sup of the interval over the pair; > 0 iff separated
};

Separation spacelike_separated(const DoubleCone& a, const DoubleCone& b);
// Same test for raw offsets: centers differ by (dt, |dx|), summed radii `radius_sum`.
Separation spacelike_separated(double dt, double dx_norm, double radius_sum);

struct VelocityBall {
  RVec center;
  double radius = 0.0;
};

struct VelocityBox {
  RVec lo, hi;
};

class VelocityCone {
 public:
  VelocityCone() = default;
  VelocityCone(std::vector<VelocityBall> balls, std::vector<VelocityBox> boxes);

  static VelocityCone ball(RVec center, double radius);
  static VelocityCone interval(double lo, double hi);  // d = 1 box

  bool contains(const RVec& v) const;
  // Euclidean distance from v to the set (0 inside).
  double distance(const RVec& v) const;
  // Circumscribed ball: centroid of the pieces and the largest distance from it to any point of U.
  VelocityBall bounding_ball() const;
  // Lower bound on the distance between the two sets.
  double separation(const VelocityCone& other) const;
  std::size_t dim() const;
  bool empty() const { return balls_.empty() && boxes_.empty(); }

  const std::vector<VelocityBall>& balls() const { return balls_; }
  const std::vector<VelocityBox>& boxes() const { return boxes_; }

 private:
  std::vector<VelocityBall> balls_;
  std::vector<VelocityBox> boxes_;
};

struct TimeGrid {
  double tau0 = 1.0;
  double rho = 0.1;
  int count = 0;  // N; the grid holds N + 1 times
  RVec taus;
};

double admissible_window(double d_sep, double tau_min, double c_geo);
double rho_from_separation(double d_sep, double c_geo);
TimeGrid geometric_time_grid(double tau0, double rho, int n);
DoubleCone dominant_support_cone(const DoubleCone& region, const VelocityCone& u, double tau);

// Largest C in (0, c_max] for which the dominant support cones of u1 (at tau1) and u2 (at tau2)
// are separated for every sampled tau1 in [tau_lo, tau_hi] and tau2 in [tau1, (1 + rho) tau1],
// rho = rho_from_separation(d_sep, C). Returns 0 when no C works.
double calibrate_c_geo(const VelocityCone& u1, const VelocityCone& u2, double region_radius, double tau_lo,
                       double tau_hi, double c_max = 4.0);

}  // namespace hrlab::minkgeom
