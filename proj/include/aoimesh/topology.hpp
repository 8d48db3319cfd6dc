#ifndef AOIMESH_TOPOLOGY_HPP
#define AOIMESH_TOPOLOGY_HPP

#include <cmath>
#include <random>
#include <vector>

#include "aoimesh/config.hpp"
#include "aoimesh/rng.hpp"

namespace aoimesh {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Shortest wrapped displacement on a 1-D torus of circumference L.
inline double torus_delta(double a, double b, double L) {
  double d = std::fabs(a - b);
  return d > 0.5 * L ? L - d : d;
}

inline double torus_dist2(const Point& a, const Point& b, double L) {
  double dx = torus_delta(a.x, b.x, L);
  double dy = torus_delta(a.y, b.y, L);
  return dx * dx + dy * dy;
}

/// Torus (wrap-around) distance; used for all pairwise geometry so the
/// finite window approximates a stationary infinite network.
inline double torus_dist(const Point& a, const Point& b, double L) {
  return std::sqrt(torus_dist2(a, b, L));
}

struct Dipole {
  Point tx;
  Point rx;
};

/// A realized Poisson bipolar point pattern: transmitters i.i.d. uniform on
/// the window, each with a dedicated receiver at torus distance r in a
/// uniformly random direction.
struct Topology {
  std::vector<Dipole> dipoles;
  double window = 0.0;

  std::size_t size() const { return dipoles.size(); }
  bool empty() const { return dipoles.empty(); }
};

/// Samples a topology: N ~ Poisson(lambda * L^2) transmitters, uniform
/// positions, uniform dipole orientations. Deterministic given (cfg, rng
/// state). lambda = 0 yields an empty topology.
inline Topology sample_topology(const ValidatedConfig& cfg, Rng& rng) {
  Topology topo;
  topo.window = cfg.window;
  const double L = cfg.window;
  std::poisson_distribution<long> count(cfg.lambda * L * L);
  const long n = cfg.lambda > 0.0 ? count(rng) : 0;
  topo.dipoles.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Dipole d;
    d.tx.x = uniform01(rng) * L;
    d.tx.y = uniform01(rng) * L;
    double ang = uniform01(rng) * 2.0 * M_PI;
    d.rx.x = std::fmod(d.tx.x + cfg.r * std::cos(ang) + L, L);
    d.rx.y = std::fmod(d.tx.y + cfg.r * std::sin(ang) + L, L);
    topo.dipoles.push_back(d);
  }
  return topo;
}

/// A single dipole placed at the window center; test/limit-case helper for
/// the lambda -> 0 isolated-link regime.
inline Topology single_link_topology(const ValidatedConfig& cfg) {
  Topology topo;
  topo.window = cfg.window;
  Dipole d;
  d.tx = {0.5 * cfg.window, 0.5 * cfg.window};
  d.rx = {0.5 * cfg.window + cfg.r, 0.5 * cfg.window};
  topo.dipoles.push_back(d);
  return topo;
}

} // namespace aoimesh

#endif
