#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hrlab/common.hpp"
#include "hrlab/minkgeom.hpp"

namespace hrlab::wavepacket {

// Uniform lattice, identical on every axis: k_i = (i - n/2) dk, i = 0..n-1.
struct Lattice {
  int dim = 1;
  int n = 0;
  double dk = 0.0;

  double coord(int i) const { return (i - n / 2) * dk; }
  double dx() const { return 2.0 * kPi / (n * dk); }
  double box_length() const { return n * dx(); }
  double cell_volume() const;
  std::size_t size() const;
};

enum class ProfileShape { ball, shell };

// (amplitude) * (1 - r^2)^s with r = |k - center| / radius (ball) or ||k| - shell| / radius (shell).
struct BumpProfile {
  ProfileShape shape = ProfileShape::ball;
  RVec center;
  double shell = 0.0;
  double radius = 1.0;
  int smoothness = 8;
  double amplitude = 1.0;

  double operator()(std::span<const double> k) const;
  bool radially_symmetric() const;
  // Support of the profile along a line through the origin, as analytic segments.
  std::vector<std::pair<double, double>> radial_segments() const;
  // Analytic continuation of the profile along the line (d = 1, or radially symmetric d = 3).
  cplx radial_value(cplx k) const;
};

class WavePacket {
 public:
  WavePacket(double mass, Lattice grid, BumpProfile profile, double excluded_radius = 0.0);

  int dim() const { return grid_.dim; }
  double mass() const { return mass_; }
  const Lattice& grid() const { return grid_; }
  const BumpProfile& profile() const { return profile_; }
  std::span<const cplx> values() const { return values_; }
  double excluded_radius() const { return excluded_radius_; }

  double omega(std::span<const double> k) const;
  // ||f~||_2 on the lattice.
  double l2_norm() const;
  // Lattice point coordinates of flat index idx.
  RVec k_of(std::size_t idx) const;

 private:
  double mass_;
  Lattice grid_;
  BumpProfile profile_;
  double excluded_radius_;
  CVec values_;
};

// Choose a lattice that holds the support with margin and a position box of at least `box_length`.
Lattice auto_lattice(int dim, double k_extent, double box_length, int min_n = 64);

WavePacket make_bump_packet(int dim, double mass, RVec center, double radius, int smoothness,
                            std::optional<Lattice> grid = std::nullopt);
WavePacket make_shell_packet(int dim, double mass, double shell, double radius, int smoothness,
                             std::optional<Lattice> grid = std::nullopt);

struct KGSnapshot {
  double t = 0.0;
  int dim = 1;
  int n = 0;
  double dx = 0.0;
  CVec values;

  double coord(int i) const { return (i - n / 2) * dx; }
  double cell_volume() const;
};

// Radial profile f(t, r) of a radially symmetric d = 3 packet on r_j = j dr.
struct RadialSnapshot {
  double t = 0.0;
  double dr = 0.0;
  CVec values;
};

KGSnapshot evaluate_snapshot(const WavePacket& wp, double t);
// Radial reduction of the d = 3 transform on its own 1D lattice (n points, spacing dk).
RadialSnapshot evaluate_radial(const WavePacket& wp, double t, int n, double dk);
// Direct quadrature over the packet lattice at one point (oracle for the fast transform).
cplx direct_value(const WavePacket& wp, double t, std::span<const double> x);

double lp_norm(const KGSnapshot& s, double p);
double lp_norm(const RadialSnapshot& s, double p);
// (2 pi)^{-d/2} ||f~||_2.
double plancherel_norm(const WavePacket& wp);

class VelocitySupport {
 public:
  VelocitySupport(int dim, std::vector<RVec> samples);
  const std::vector<RVec>& samples() const { return samples_; }
  const minkgeom::VelocityCone& hull() const { return hull_; }
  double distance(const RVec& v) const;
  double max_speed() const;

 private:
  int dim_;
  std::vector<RVec> samples_;
  minkgeom::VelocityCone hull_;
};

VelocitySupport velocity_support(const WavePacket& wp, double threshold = 1e-12);

struct SeriesPoint {
  double t;
  double value;
};

// |f(t, v t)| along a ray, by quadrature on a complex-deformed momentum contour.
std::vector<SeriesPoint> exterior_decay_probe(const WavePacket& wp, const RVec& v_probe, std::span<const double> times);
// Same integral without deformation (reference for tests).
cplx straight_ray_value(const WavePacket& wp, const RVec& v, double t, int nodes);

// L^1 mass of f(t, .) on {x : x / t not in U}; the full L^1 norm at t = 0.
double cone_tail_mass(const WavePacket& wp, const minkgeom::VelocityCone& u, double t);
double cone_tail_mass(const RadialSnapshot& s, double speed);

}  // namespace hrlab::wavepacket
