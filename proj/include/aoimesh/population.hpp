#ifndef AOIMESH_POPULATION_HPP
#define AOIMESH_POPULATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aoimesh/config.hpp"
#include "aoimesh/meanfield.hpp"
#include "aoimesh/specfun.hpp"

namespace aoimesh {

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, std::vector<double> residuals = {})
      : std::runtime_error(msg), residuals_(std::move(residuals)) {}
  const std::vector<double>& residual_history() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// One Stieltjes atom of a success-probability distribution: probability
/// mass `m` located at success probability `t`.
struct Atom {
  double t;
  double m;
};

/// Piecewise representation of F(t) = P(success prob <= t) on a fixed grid.
/// grid.back() equals the noise-limited upper bound, where values.back()==1.
struct SuccessCdf {
  std::vector<double> grid;
  std::vector<double> values;
  double mass_below_grid = 0.0; // F at the lowest grid point

  /// Quadrature atoms for Stieltjes integrals against F. Cell masses sit at
  /// arithmetic midpoints except the top cell, whose mass sits at the right
  /// endpoint: the distribution piles up against the noise-limited bound, so
  /// midpoint placement there biases every moment low. Mass at or below the
  /// lowest grid point is lumped there (and reported via mass_below_grid).
  std::vector<Atom> atoms() const {
    std::vector<Atom> out;
    const std::size_t n = grid.size();
    if (values[0] > 0.0) out.push_back({grid[0], values[0]});
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double m = values[i + 1] - values[i];
      if (m <= 0.0) continue;
      double loc = (i + 2 == n) ? grid[n - 1] : 0.5 * (grid[i] + grid[i + 1]);
      out.push_back({loc, m});
    }
    return out;
  }
};

namespace detail {

/// Exact integrals of e^(jx u) * {1, u} over u in [0,1], written so that a
/// piecewise-linear integrand is integrated without resolving the
/// oscillation: Int f ~ dz*(f0*e1 + (f1-f0)*e2) with z = jx. Returns e^(jx)
/// so callers can carry the phase as a running product.
inline std::complex<double> filon_coeffs(double x, std::complex<double>& e1,
                                         std::complex<double>& e2) {
  std::complex<double> ez = std::polar(1.0, x);
  std::complex<double> z(0.0, x);
  if (std::abs(x) < 1e-4) { // series avoids 0/0; error O(x^3)
    e1 = 1.0 + z * (0.5 + z / 6.0);
    e2 = 0.5 + z * (1.0 / 3.0 + z / 8.0);
  } else {
    e1 = (ez - 1.0) / z;
    e2 = (ez * (z - 1.0) + 1.0) / (z * z);
  }
  return ez;
}

} // namespace detail

/// Characteristic exponent X(w) of the log success-probability deficit
/// q = -ln(mu) - theta r^a/rho of the typical link, given the marginal
/// distribution of the other links' success probabilities (as atoms).
///
/// Interferers form a Poisson field; each contributes -ln(1 - a/(1+s)) to q,
/// where s is a normalized distance power and a = a(t) the interferer's
/// stationary activity. Campbell's theorem gives
///   X(w) = lambda pi r^2 theta^(2/a) * E_t[ G_{a(t)}(w) ],
///   G_a(w) = d Int_0^inf s^(d-1) (1 - (1 - a/(1+s))^(jw)) ds,  d = 2/alpha.
/// Substituting y = -ln(1 - a/(1+s)) and integrating by parts,
///   G_a(w) = jw Int_0^{y_max} e^(-jwy) (a/(1-e^(-y)) - 1)^d dy,
/// whose integrand is smooth, real and nonnegative -- stable at any w,
/// unlike the alternating binomial series (see exponent_series for the
/// series form, which blows up in finite precision beyond moderate w).
class CharacteristicExponent {
 public:
  CharacteristicExponent(const ValidatedConfig& cfg,
                         const std::vector<Atom>& atoms) {
    scale_ = cfg.lambda * M_PI * cfg.r * cfg.r *
             std::pow(cfg.theta, cfg.delta);
    const double d = cfg.delta;

    // Activity of an interferer whose own success probability is t.
    std::vector<double> a(atoms.size()), m(atoms.size());
    double y_top = 0.0;
    const double y_cap = -std::log(1e-14) / d;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      a[i] = active_prob(cfg.xi, cfg.p, atoms[i].t);
      m[i] = atoms[i].m;
      double ym = a[i] >= 1.0 ? y_cap : std::min(-std::log1p(-a[i]), y_cap);
      y_top = std::max(y_top, ym);
    }

    // Graded grid in y: near 0 the kernel behaves like (a/y)^d, so steps
    // grow geometrically before settling to a fixed pitch.
    const double y_min = 1e-9;
    y_.push_back(y_min);
    while (y_.back() < y_top) {
      double dy = std::min(0.04 * y_.back(), 0.05);
      y_.push_back(std::min(y_.back() + dy, y_top));
    }

    V_.assign(y_.size(), 0.0);
    head_ = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (a[i] <= 0.0 || m[i] <= 0.0) continue;
      for (std::size_t k = 0; k < y_.size(); ++k) {
        double base = a[i] / (-std::expm1(-y_[k])) - 1.0;
        if (base > 0.0) V_[k] += m[i] * std::pow(base, d);
      }
      // Below y_min the kernel is (a/y)^d to high accuracy; the phase
      // e^(-jwy) is 1 there for every w on the inversion grid.
      head_ += m[i] * std::pow(a[i], d) * std::pow(y_min, 1.0 - d) / (1.0 - d);
    }
  }

  std::complex<double> operator()(double omega) const {
    std::complex<double> t(head_, 0.0);
    std::complex<double> phase = std::polar(1.0, -omega * y_.front());
    for (std::size_t k = 0; k + 1 < y_.size(); ++k) {
      double dy = y_[k + 1] - y_[k];
      std::complex<double> e1, e2;
      std::complex<double> step = detail::filon_coeffs(-omega * dy, e1, e2);
      t += dy * phase * (V_[k] * e1 + (V_[k + 1] - V_[k]) * e2);
      phase *= step;
    }
    return scale_ * std::complex<double>(0.0, omega) * t;
  }

 private:
  double scale_ = 0.0;
  double head_ = 0.0;
  std::vector<double> y_, V_;
};

/// Series form of the same exponent,
///   X(w) = lambda pi r^2 theta^(2/a) Sum_{k>=1} (-1)^(k+1) binom(jw,k) C_k E[a^k],
/// truncated at k_max terms. Kept as an independent cross-check: the terms
/// alternate with exponentially growing magnitude in w, so it is only
/// trustworthy where tail_fraction comes back small.
inline std::complex<double> exponent_series(const ValidatedConfig& cfg,
                                            const std::vector<Atom>& atoms,
                                            double omega, int k_max = 30,
                                            double* tail_fraction = nullptr) {
  const std::complex<double> jw(0.0, omega);
  const double scale =
      cfg.lambda * M_PI * cfg.r * cfg.r * std::pow(cfg.theta, cfg.delta);
  std::complex<double> sum(0.0, 0.0);
  std::complex<double> last(0.0, 0.0);
  for (int k = 1; k <= k_max; ++k) {
    double eak = 0.0;
    for (const Atom& at : atoms)
      eak += at.m * std::pow(active_prob(cfg.xi, cfg.p, at.t), k);
    double sign = (k % 2 == 1) ? 1.0 : -1.0;
    last = sign * complex_binomial(jw, k) * inner_integral_ck(cfg.alpha, k) *
           eak;
    sum += last;
  }
  if (tail_fraction) {
    double denom = std::abs(sum);
    *tail_fraction = denom > 0.0 ? std::abs(last) / denom : 0.0;
  }
  return scale * sum;
}

/// Precomputed state for the truncated-series MGF of -ln(mu).
struct MgfContext {
  ValidatedConfig cfg;
  int k_max = 30;
  std::vector<double> ck_cache; // C_1..C_{k_max}
  SuccessCdf F;
};

inline MgfContext make_mgf_context(const ValidatedConfig& cfg,
                                   SuccessCdf F, int k_max = 30) {
  MgfContext ctx{cfg, k_max, {}, std::move(F)};
  ctx.ck_cache.reserve(k_max);
  for (int k = 1; k <= k_max; ++k)
    ctx.ck_cache.push_back(inner_integral_ck(cfg.alpha, k));
  return ctx;
}

/// E[mu^(jw)] via the truncated series exponent. `truncation_tail` is set
/// when the last retained term still carries more than 1e-8 of the partial
/// sum, i.e. the truncation error is not demonstrably negligible.
inline std::complex<double> mgf_eval(const MgfContext& ctx, double omega,
                                     bool* truncation_tail = nullptr) {
  double tail = 0.0;
  std::complex<double> x =
      exponent_series(ctx.cfg, ctx.F.atoms(), omega, ctx.k_max, &tail);
  if (truncation_tail) *truncation_tail = tail > 1e-8;
  return std::exp(-std::complex<double>(0.0, omega) * ctx.cfg.noise_exponent -
                  x);
}

namespace detail {

inline std::vector<double> build_omega_grid(double omega_ext) {
  std::vector<double> w;
  for (int i = 1; i <= 1000; ++i) w.push_back(0.01 * i);
  for (int i = 1; i <= 3800; ++i) w.push_back(10.0 + 0.05 * i);
  while (w.back() < omega_ext) w.push_back(w.back() * 1.02);
  return w;
}

/// Gil-Pelaez inversion: P(q <= x) = 1/2 - (1/pi) Int_0^inf
/// Im[e^(jwx) h(w)] / w dw with h the characteristic function, integrated
/// with a piecewise-linear (Filon) rule so the oscillation is handled
/// exactly, truncated adaptively at ~50/x periods with an
/// integration-by-parts tail correction.
inline double gil_pelaez_cdf(const std::vector<double>& w,
                             const std::vector<std::complex<double>>& h,
                             double q) {
  const double omega_cap = std::clamp(50.0 / q, 200.0, w.back());
  std::complex<double> phase = std::polar(1.0, q * w[0]);
  // (0, w_0]: the integrand tends to a finite limit, rectangle rule.
  double integral = std::imag(phase * h[0]);
  std::size_t last = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    double dw = w[i + 1] - w[i];
    std::complex<double> e1, e2;
    std::complex<double> step = filon_coeffs(q * dw, e1, e2);
    std::complex<double> f0 = h[i] / w[i];
    std::complex<double> f1 = h[i + 1] / w[i + 1];
    integral += std::imag(dw * phase * (f0 * e1 + (f1 - f0) * e2));
    phase *= step;
    last = i + 1;
    if (w[last] >= omega_cap) break;
  }
  // Int_W^inf e^(jwq) h/w dw ~ -e^(jWq) h(W)/(jqW) for slowly varying h/w.
  integral += std::imag(-phase * h[last] /
                        (std::complex<double>(0.0, q) * w[last]));
  return std::clamp(0.5 - integral / M_PI, 0.0, 1.0);
}

} // namespace detail

/// Single-point CDF inversion: P(mu <= u) for the typical link when the
/// other links' success probabilities are distributed per `atoms`.
inline double invert_cdf_at(const ValidatedConfig& cfg,
                            const std::vector<Atom>& atoms, double u) {
  if (u <= 0.0 || u >= 1.0)
    throw std::invalid_argument("u must lie in (0,1)");
  double q = -std::log(u) - cfg.noise_exponent;
  if (q <= 0.0) return 1.0;
  const double omega_ext = std::clamp(50.0 / q, 200.0, 5e4);
  const std::vector<double> w = detail::build_omega_grid(omega_ext);
  CharacteristicExponent X(cfg, atoms);
  std::vector<std::complex<double>> h(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) h[i] = std::exp(-X(w[i]));
  return detail::gil_pelaez_cdf(w, h, q);
}

struct PicardOptions {
  int grid_size = 200;
  double t_min = 1e-4;
  double tol = 1e-6;
  int max_iter = 60;
};

struct PicardResult {
  SuccessCdf cdf;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
};

/// Fixed point of the population self-map: given the marginal CDF F of link
/// success probabilities, the typical link's success probability has the
/// CDF obtained by inverting the characteristic exponent built from F.
/// Plain Picard iteration from the most pessimistic admissible start
/// (all mass at the lowest grid point) with a monotone projection each step.
inline PicardResult picard_solve(const ValidatedConfig& cfg,
                                 const PicardOptions& opt = {}) {
  const int n = opt.grid_size;
  if (n < 8) throw std::invalid_argument("grid_size too small");
  const double mu_max = cfg.mu_upper_bound();
  if (opt.t_min >= mu_max)
    throw std::invalid_argument("t_min must lie below the success bound");

  SuccessCdf F;
  F.grid.resize(n);
  const double ratio = std::pow(mu_max / opt.t_min, 1.0 / (n - 1));
  for (int i = 0; i < n; ++i) F.grid[i] = opt.t_min * std::pow(ratio, i);
  F.grid[n - 1] = mu_max;
  F.values.assign(n, 1.0);

  // Required truncation of the inversion integral is set by the smallest
  // positive argument of the CDF, i.e. the grid point nearest the bound.
  const double q_min = -std::log(F.grid[n - 2]) - cfg.noise_exponent;
  const double omega_ext = std::clamp(50.0 / q_min, 200.0, 5e4);
  const std::vector<double> w = detail::build_omega_grid(omega_ext);

  PicardResult res;
  std::vector<std::complex<double>> h(w.size());
  std::vector<double> next(n);
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    CharacteristicExponent X(cfg, F.atoms());
    for (std::size_t i = 0; i < w.size(); ++i) h[i] = std::exp(-X(w[i]));

    for (int i = 0; i < n; ++i) {
      double q = -std::log(F.grid[i]) - cfg.noise_exponent;
      // At or above the deterministic bound the CDF is exactly 1.
      next[i] = q <= 0.0 ? 1.0 : detail::gil_pelaez_cdf(w, h, q);
    }
    // Monotone projection: running max, clamped, pinned to 1 at the bound.
    for (int i = 1; i < n; ++i) next[i] = std::max(next[i], next[i - 1]);
    next[n - 1] = 1.0;

    double resid = 0.0;
    for (int i = 0; i < n; ++i)
      resid = std::max(resid, std::abs(next[i] - F.values[i]));
    F.values = next;
    res.iterations = iter;
    res.residual = resid;
    res.residual_history.push_back(resid);
    if (resid <= opt.tol) break;
  }
  if (res.residual > opt.tol)
    throw SolverError("population fixed point did not converge: residual " +
                          std::to_string(res.residual) + " after " +
                          std::to_string(res.iterations) + " iterations",
                      res.residual_history);
  F.mass_below_grid = F.values[0];
  res.cdf = F;
  return res;
}

struct NetworkAoiResult {
  double value = 0.0;
  double mass_below_grid = 0.0;
  bool divergence_suspected = false;
  double tail_exponent = 0.0; // local power of F near the lower grid edge
};

/// Network average AoI from the population CDF:
///   1/xi - 1 + E[1/(p mu)],
/// the expectation taken against the quadrature atoms of F. The integrand
/// 1/t is unbounded at 0, so mass pushed below the grid is a red flag: the
/// reported value is then a lower bound at best. mass_below_grid > 0.01
/// sets the flag outright; > 0.1 is treated as unusable. A heavy lower tail
/// (local exponent <= 1, i.e. F(t) ~ t^beta with beta <= 1) makes E[1/mu]
/// genuinely infinite, so even tiny sub-grid mass plus such a tail flags
/// suspected divergence.
inline NetworkAoiResult network_aoi(const SuccessCdf& F,
                                    const ValidatedConfig& cfg) {
  NetworkAoiResult out;
  out.mass_below_grid = F.values[0];
  if (out.mass_below_grid > 0.1)
    throw SolverError("more than 10% of success-probability mass below the "
                      "grid; AoI estimate unusable");

  double inv_mu = 0.0;
  for (const Atom& at : F.atoms()) inv_mu += at.m / at.t;
  out.value = 1.0 / cfg.xi - 1.0 + inv_mu / cfg.p;

  // Least-squares slope of ln F vs ln t over the lowest decade of the grid.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < F.grid.size() && F.grid[i] <= 10.0 * F.grid[0];
       ++i) {
    if (F.values[i] <= 0.0) continue;
    double x = std::log(F.grid[i]), y = std::log(F.values[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++cnt;
  }
  if (cnt >= 3 && sxx * cnt - sx * sx > 0.0) {
    out.tail_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  } else {
    out.tail_exponent = std::numeric_limits<double>::infinity();
  }
  out.divergence_suspected =
      out.mass_below_grid > 0.01 ||
      (out.mass_below_grid > 2e-5 && out.tail_exponent <= 1.0);

  // Structural check the population model cannot see: with p = 1, a pair of
  // dipoles whose transmitters sit near each other's receivers blocks
  // itself. Solving the two-link fixed point near zero separation d gives
  // mu ~ d^alpha when xi > 1/2 (one-sided blocking already suffices at
  // xi = 1), so P(mu < u) has spatial tail index 3/alpha (2/alpha at xi=1)
  // and E[1/mu] -- the integral reported here -- is infinite whenever that
  // index is <= 1. At xi = 1/2 exactly the pair sits at the deadlock
  // threshold (mu ~ d^(alpha/2), prefactor blowing up as xi -> 1/2+), so
  // the boundary is treated as part of the suspect regime; below 1/2 the
  // blocked-pair success probability stays bounded away from zero. The
  // population fixed point assumes interferer activities independent of the
  // typical link and misses this correlation, so the value it yields in the
  // suspect regime is finite but not meaningful. ALOHA thinning (p < 1)
  // breaks the deadlock and restores finiteness.
  if (cfg.p >= 1.0 && cfg.lambda > 0.0 && cfg.xi >= 0.5) {
    double idx = (cfg.xi >= 1.0 ? 2.0 : 3.0) / cfg.alpha;
    if (idx <= 1.0) out.divergence_suspected = true;
  }
  return out;
}

/// Interference-free limit: every attempt succeeds with the noise-only
/// probability, so the network AoI collapses to
/// 1/xi + e^(theta r^a / rho)/p - 1.
inline double noise_limited_aoi(const ValidatedConfig& cfg) {
  return 1.0 / cfg.xi + std::exp(cfg.noise_exponent) / cfg.p - 1.0;
}

} // namespace aoimesh

#endif
