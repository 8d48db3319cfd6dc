#include <algorithm>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "aoimesh/meanfield.hpp"
#include "aoimesh/rng.hpp"

using namespace aoimesh;
using Catch::Approx;

namespace {

ValidatedConfig make_cfg(double xi, double p, double lambda = 1e-2) {
  NetworkConfig c;
  c.xi = xi;
  c.p = p;
  c.lambda = lambda;
  return validate_config(c);
}

/// Two parallel dipoles separated by `dy`; both cross links have the same
/// tx-to-other-rx distance, so the fixed point is symmetric and scalar.
Topology symmetric_pair(const ValidatedConfig& cfg, double dy) {
  Topology topo;
  topo.window = cfg.window;
  topo.dipoles.push_back({{150.0, 150.0}, {150.5, 150.0}});
  topo.dipoles.push_back({{150.0, 150.0 + dy}, {150.5, 150.0 + dy}});
  return topo;
}

} // namespace

TEST_CASE("active probability closed form") {
  CHECK(active_prob(1.0, 0.7, 0.3) == Approx(0.7));   // saturated: always p
  CHECK(active_prob(0.5, 1.0, 1.0) == Approx(0.5));
  CHECK(active_prob(0.25, 0.5, 0.4) == Approx(0.3125));
  CHECK_THROWS_AS(active_prob(0.0, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(active_prob(0.5, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("conditional AoI closed form") {
  CHECK(conditional_aoi(1.0, 1.0, 1.0) == Approx(1.0)); // fresh every slot
  CHECK(conditional_aoi(0.5, 1.0, 0.5) == Approx(3.0));
  CHECK(conditional_aoi(0.5, 0.5, 0.8) == Approx(3.5));
  CHECK_THROWS_AS(conditional_aoi(0.5, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("conditional success probability: structural cases") {
  ValidatedConfig cfg = make_cfg(0.5, 1.0);
  Topology topo = single_link_topology(cfg);

  SECTION("no interferers: the noise-limited bound") {
    std::vector<double> a = {1.0};
    CHECK(success_prob_given_activity(topo, 0, a, cfg) ==
          Approx(cfg.mu_upper_bound()).epsilon(1e-12));
  }
  SECTION("one always-on interferer at distance r halves the product term") {
    // d = r and theta = 1 give the factor 1 - 1/(1 + 1) = 1/2.
    topo.dipoles.push_back(
        {{150.5 + cfg.r, 150.0}, {150.5 + 2.0 * cfg.r, 150.0}});
    std::vector<double> a = {1.0, 1.0};
    CHECK(success_prob_given_activity(topo, 0, a, cfg) ==
          Approx(0.5 * cfg.mu_upper_bound()).epsilon(1e-12));
  }
}

TEST_CASE("Monte Carlo oracle for the conditional success probability") {
  // Five links, fixed activity vector: simulate Rayleigh fades and Bernoulli
  // activity directly and compare the empirical success rate of link 0 with
  // the closed-form product.
  ValidatedConfig cfg = make_cfg(0.5, 1.0);
  Topology topo;
  topo.window = cfg.window;
  topo.dipoles = {
      {{150.0, 150.0}, {150.5, 150.0}}, {{151.3, 150.2}, {151.0, 149.9}},
      {{149.2, 151.1}, {149.7, 151.0}}, {{152.0, 149.0}, {151.6, 149.4}},
      {{148.6, 148.8}, {148.6, 149.3}},
  };
  std::vector<double> a = {1.0, 0.8, 0.6, 0.4, 0.2};
  const double expected = success_prob_given_activity(topo, 0, a, cfg);

  Rng rng = make_rng(11, RngPurpose::fading);
  const long trials = 1000000;
  long wins = 0;
  const Point& rx0 = topo.dipoles[0].rx;
  for (long t = 0; t < trials; ++t) {
    double h0 = -std::log1p(-uniform01(rng));
    double signal = cfg.p_tx * h0 * std::pow(cfg.r, -cfg.alpha);
    double interference = 0.0;
    for (std::size_t k = 1; k < topo.size(); ++k) {
      if (!bernoulli(rng, a[k])) continue;
      double h = -std::log1p(-uniform01(rng));
      double d = torus_dist(topo.dipoles[k].tx, rx0, topo.window);
      interference += cfg.p_tx * h * std::pow(d, -cfg.alpha);
    }
    if (signal / (interference + cfg.noise) > cfg.theta) wins += 1;
  }
  double emp = static_cast<double>(wins) / trials;
  CHECK(std::abs(emp - expected) < 0.005);
}

TEST_CASE("single link solves in one iteration at the noise-limited bound") {
  ValidatedConfig cfg = make_cfg(0.5, 1.0);
  Topology topo = single_link_topology(cfg);
  MeanFieldSolution sol = solve_fixed_point(topo, cfg);
  CHECK(sol.iterations == 1);
  REQUIRE(sol.mu.size() == 1);
  CHECK(sol.mu[0] == Approx(cfg.mu_upper_bound()).epsilon(1e-12));
  CHECK(sol.cond_aoi[0] ==
        Approx(conditional_aoi(cfg.xi, cfg.p, sol.mu[0])).epsilon(1e-12));
}

TEST_CASE("symmetric pair matches a scalar bisection oracle") {
  ValidatedConfig cfg = make_cfg(0.4, 0.8);
  Topology topo = symmetric_pair(cfg, 2.0);
  const double d2 = torus_dist2(topo.dipoles[1].tx, topo.dipoles[0].rx,
                                topo.window); // 0.25 + 4
  const double tra = cfg.theta * std::pow(cfg.r, cfg.alpha);
  const double c = 1.0 / (1.0 + std::pow(d2, 0.5 * cfg.alpha) / tra);
  const double mu0 = cfg.mu_upper_bound();

  // Scalar map g(mu) = mu0 (1 - a(mu) c); g is increasing in mu, so the
  // fixed point is the unique root of g(mu) - mu.
  auto g = [&](double mu) {
    return mu0 * (1.0 - active_prob(cfg.xi, cfg.p, mu) * c) - mu;
  };
  double lo = 1e-12, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  const double oracle = 0.5 * (lo + hi);

  MeanFieldSolution sol = solve_fixed_point(topo, cfg, 1e-12);
  CHECK(sol.mu[0] == Approx(oracle).epsilon(1e-9));
  CHECK(sol.mu[1] == Approx(oracle).epsilon(1e-9));
  CHECK(sol.a[0] ==
        Approx(active_prob(cfg.xi, cfg.p, oracle)).epsilon(1e-9));
}

TEST_CASE("saturated arrivals decouple the activity, converging in two steps") {
  // At xi = 1 every buffer is always full, so a_k = p independently of mu
  // and the first update already lands on the fixed point.
  ValidatedConfig cfg = make_cfg(1.0, 0.6);
  Topology topo = symmetric_pair(cfg, 1.0);
  MeanFieldSolution sol = solve_fixed_point(topo, cfg);
  CHECK(sol.iterations == 2);
}

TEST_CASE("solution is equivariant under relabeling of the links") {
  ValidatedConfig cfg = make_cfg(0.5, 1.0, 5e-2);
  Rng rng = make_rng(cfg.seed, RngPurpose::topology, 5);
  NetworkConfig small = cfg;
  small.window = 30.0; // ~45 links keeps the n^2 solve instant
  ValidatedConfig vsmall = validate_config(small);
  Topology topo = sample_topology(vsmall, rng);
  REQUIRE(topo.size() >= 10);

  MeanFieldSolution ref = solve_fixed_point(topo, vsmall);
  Topology rev = topo;
  std::reverse(rev.dipoles.begin(), rev.dipoles.end());
  MeanFieldSolution per = solve_fixed_point(rev, vsmall);
  const std::size_t n = topo.size();
  for (std::size_t j = 0; j < n; ++j) {
    CHECK(per.mu[n - 1 - j] == Approx(ref.mu[j]).epsilon(1e-9));
    CHECK(per.cond_aoi[n - 1 - j] == Approx(ref.cond_aoi[j]).epsilon(1e-9));
  }
}

TEST_CASE("non-convergence raises with the residual attached") {
  ValidatedConfig cfg = make_cfg(0.5, 1.0);
  Topology topo = symmetric_pair(cfg, 1.0);
  try {
    solve_fixed_point(topo, cfg, 1e-6, 1);
    FAIL("expected FixedPointError");
  } catch (const FixedPointError& e) {
    CHECK(e.residual() > 0.0);
  }
  CHECK_THROWS_AS(solve_fixed_point(topo, cfg, -1.0), std::invalid_argument);
}

TEST_CASE("residuals contract geometrically on a coupled topology") {
  ValidatedConfig cfg = make_cfg(0.5, 1.0);
  Topology topo = symmetric_pair(cfg, 0.8);
  MeanFieldSolution sol = solve_fixed_point(topo, cfg, 1e-10);
  REQUIRE(sol.residual_history.size() >= 3);
  for (std::size_t i = 2; i < sol.residual_history.size(); ++i)
    CHECK(sol.residual_history[i] < sol.residual_history[i - 1]);
}
