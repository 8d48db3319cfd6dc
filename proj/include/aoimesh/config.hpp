#ifndef AOIMESH_CONFIG_HPP
#define AOIMESH_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

#include "aoimesh/units.hpp"

namespace aoimesh {

/// Raised when a configuration field is out of its legal range.
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// All physical and protocol parameters of a slotted random-access network:
/// a Poisson bipolar dipole field with Bernoulli packet arrivals, a unit
/// LCFS-with-replacement buffer per transmitter, ALOHA channel access and
/// SINR-threshold decoding.
struct NetworkConfig {
  double lambda = 1e-2;                  // transmitter density, per m^2
  double r = 0.5;                        // tx-rx distance, m
  double alpha = 3.8;                    // path-loss exponent, > 2
  double theta = 1.0;                    // SINR threshold, linear
  double p_tx = dbm_to_watts(17.0);      // transmit power, W
  double noise = dbm_to_watts(-90.0);    // thermal noise power, W
  double xi = 0.5;                       // packet arrival probability per slot
  double p = 1.0;                        // ALOHA channel-access probability
  double window = 300.0;                 // side length of the square region, m
  std::uint64_t seed = 12345;
  long warmup_slots = 1000;
  long measure_slots = 4000;
};

/// NetworkConfig that passed validation, with derived quantities populated.
struct ValidatedConfig : NetworkConfig {
  double rho = 0.0;         // p_tx / noise
  double delta = 0.0;       // 2 / alpha
  double noise_exponent = 0.0; // theta * r^alpha / rho
  /// Deterministic upper bound on any link's conditional success
  /// probability (the interference product can only shrink it).
  double mu_upper_bound() const { return std::exp(-noise_exponent); }
};

namespace detail {
inline void require(bool ok, const std::string& field, const std::string& range) {
  if (!ok) throw ConfigError(field + " out of " + range);
}
} // namespace detail

/// Validates ranges and populates derived quantities. Throws ConfigError
/// naming the offending field and its legal range.
inline ValidatedConfig validate_config(const NetworkConfig& cfg) {
  using detail::require;
  require(std::isfinite(cfg.lambda) && cfg.lambda >= 0.0, "lambda", "[0, inf)");
  require(std::isfinite(cfg.r) && cfg.r > 0.0, "r", "(0, inf)");
  if (!(std::isfinite(cfg.alpha) && cfg.alpha > 2.0))
    throw ConfigError("alpha must exceed 2");
  require(std::isfinite(cfg.theta) && cfg.theta > 0.0, "theta", "(0, inf)");
  require(std::isfinite(cfg.p_tx) && cfg.p_tx > 0.0, "p_tx", "(0, inf)");
  require(std::isfinite(cfg.noise) && cfg.noise > 0.0, "noise", "(0, inf)");
  require(cfg.xi > 0.0 && cfg.xi <= 1.0, "xi", "(0,1]");
  require(cfg.p > 0.0 && cfg.p <= 1.0, "p", "(0,1]");
  require(std::isfinite(cfg.window) && cfg.window > 2.0 * cfg.r, "window",
          "(2r, inf)");
  require(cfg.warmup_slots >= 0, "warmup_slots", "[0, inf)");
  require(cfg.measure_slots > 0, "measure_slots", "(0, inf)");

  ValidatedConfig v;
  static_cast<NetworkConfig&>(v) = cfg;
  v.rho = cfg.p_tx / cfg.noise;
  v.delta = 2.0 / cfg.alpha;
  v.noise_exponent = cfg.theta * std::pow(cfg.r, cfg.alpha) / v.rho;
  return v;
}

} // namespace aoimesh

#endif
