#ifndef AOIMESH_MEANFIELD_HPP
#define AOIMESH_MEANFIELD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoimesh/config.hpp"
#include "aoimesh/topology.hpp"

namespace aoimesh {

/// Stationary probability that a node's buffer is non-empty times the ALOHA
/// probability: a = p*xi / (xi + (1-xi)*p*mu). Strictly decreasing in mu;
/// equals p at xi = 1.
inline double active_prob(double xi, double p, double mu) {
  if (!(xi > 0.0 && xi <= 1.0)) throw std::invalid_argument("xi out of (0,1]");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p out of (0,1]");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("mu out of (0,1]");
  return p * xi / (xi + (1.0 - xi) * p * mu);
}

/// Per-link average AoI conditioned on the topology, for a Geo/Geo/1/2
/// queue with arrival rate xi and service rate p*mu: 1/xi + 1/(p*mu) - 1.
inline double conditional_aoi(double xi, double p, double mu) {
  if (!(xi > 0.0 && xi <= 1.0)) throw std::invalid_argument("xi out of (0,1]");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p out of (0,1]");
  if (!(mu > 0.0 && mu <= 1.0))
    throw std::invalid_argument("mu out of (0,1] (AoI unbounded at mu=0)");
  return 1.0 / xi + 1.0 / (p * mu) - 1.0;
}

/// Conditional success probability of link j given per-link active
/// probabilities a_k: exp(-theta r^a / rho) * prod_{k!=j} (1 - a_k /
/// (1 + d_kj^a / (theta r^a))), distances taken tx_k -> rx_j on the torus.
inline double success_prob_given_activity(const Topology& topo, std::size_t j,
                                          const std::vector<double>& a,
                                          const ValidatedConfig& cfg) {
  const double tra = cfg.theta * std::pow(cfg.r, cfg.alpha);
  double ln_mu = -cfg.noise_exponent;
  for (std::size_t k = 0; k < topo.size(); ++k) {
    if (k == j) continue;
    double d2 = torus_dist2(topo.dipoles[k].tx, topo.dipoles[j].rx, topo.window);
    double dal = std::pow(d2, 0.5 * cfg.alpha);
    ln_mu += std::log1p(-a[k] / (1.0 + dal / tra));
  }
  return std::exp(ln_mu);
}

/// Per-topology fixed point of the coupled success/active probabilities,
/// with the conditional AoI of every link.
struct MeanFieldSolution {
  std::vector<double> mu;       // conditional success probabilities, (0,1]
  std::vector<double> a;        // active probabilities, (0,p]
  std::vector<double> cond_aoi; // slots
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;

  double mean_cond_aoi() const {
    double s = 0.0;
    for (double v : cond_aoi) s += v;
    return cond_aoi.empty() ? 0.0 : s / static_cast<double>(cond_aoi.size());
  }
};

/// Thrown when the Picard iteration does not reach tolerance; carries the
/// last residual so oscillation is visible rather than masked.
class FixedPointError : public std::runtime_error {
public:
  FixedPointError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_;
};

/// Jacobi-style Picard iteration from the interference-free upper bound
/// mu^(0) = exp(-theta r^a/rho). Per-iteration updates are order
/// independent. A 0.5 damping factor engages if the residual fails to
/// shrink for 10 consecutive iterations.
inline MeanFieldSolution solve_fixed_point(const Topology& topo,
                                           const ValidatedConfig& cfg,
                                           double tol = 1e-6,
                                           int max_iter = 200) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  const std::size_t n = topo.size();
  const double mu0 = cfg.mu_upper_bound();
  const double tra = cfg.theta * std::pow(cfg.r, cfg.alpha);

  // Pairwise coupling c[k][j] = 1 / (1 + d_kj^alpha / (theta r^alpha)),
  // cached once; single precision is ample for factors in [0,1].
  std::vector<float> coupling(n * n, 0.0f);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      if (k == j) continue;
      double d2 =
          torus_dist2(topo.dipoles[k].tx, topo.dipoles[j].rx, topo.window);
      double dal = std::pow(d2, 0.5 * cfg.alpha);
      coupling[k * n + j] = static_cast<float>(1.0 / (1.0 + dal / tra));
    }

  MeanFieldSolution sol;
  sol.mu.assign(n, mu0);
  sol.a.assign(n, 0.0);
  std::vector<double> mu_next(n), ln_mu(n);

  double prev_residual = std::numeric_limits<double>::infinity();
  int stall = 0;
  bool damped = false;
  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t k = 0; k < n; ++k)
      sol.a[k] = active_prob(cfg.xi, cfg.p, sol.mu[k]);
    for (std::size_t j = 0; j < n; ++j) ln_mu[j] = -cfg.noise_exponent;
    for (std::size_t k = 0; k < n; ++k) {
      const float* row = &coupling[k * n];
      const double ak = sol.a[k];
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) ln_mu[j] += std::log1p(-ak * static_cast<double>(row[j]));
    }
    double residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double target = std::exp(ln_mu[j]);
      mu_next[j] = damped ? 0.5 * (sol.mu[j] + target) : target;
      residual = std::max(residual, std::fabs(mu_next[j] - sol.mu[j]));
    }
    sol.mu.swap(mu_next);
    sol.iterations = it;
    sol.residual = residual;
    sol.residual_history.push_back(residual);
    if (residual < tol) {
      sol.cond_aoi.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        sol.a[j] = active_prob(cfg.xi, cfg.p, sol.mu[j]);
        sol.cond_aoi[j] = conditional_aoi(cfg.xi, cfg.p, sol.mu[j]);
      }
      return sol;
    }
    stall = residual < prev_residual ? 0 : stall + 1;
    if (stall >= 10) damped = true;
    prev_residual = residual;
  }
  throw FixedPointError("mean-field fixed point did not converge after " +
                            std::to_string(max_iter) + " iterations",
                        sol.residual);
}

} // namespace aoimesh

#endif
