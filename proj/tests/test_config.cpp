#include <catch2/catch_amalgamated.hpp>

#include "aoimesh/config.hpp"
#include "aoimesh/units.hpp"

using namespace aoimesh;
using Catch::Approx;

TEST_CASE("dB and dBm conversions") {
  CHECK(dbm_to_watts(0.0) == Approx(1e-3).epsilon(1e-12));
  CHECK(db_to_linear(0.0) == Approx(1.0).epsilon(1e-12));
  // 17 dBm = 10^1.7 mW
  CHECK(dbm_to_watts(17.0) == Approx(0.05011872336272722).epsilon(1e-12));
  CHECK(watts_to_dbm(dbm_to_watts(17.0)) == Approx(17.0).epsilon(1e-12));
  CHECK(linear_to_db(db_to_linear(-3.0)) == Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("validate_config populates derived quantities") {
  NetworkConfig cfg; // defaults: alpha=3.8, theta=1, 17 dBm, -90 dBm
  ValidatedConfig v = validate_config(cfg);
  CHECK(v.rho == Approx(5.011872336272722e10).epsilon(1e-12));
  CHECK(v.delta == Approx(2.0 / 3.8).epsilon(1e-15));
  // theta * r^alpha / rho with r = 0.5
  CHECK(v.noise_exponent ==
        Approx(std::pow(0.5, 3.8) / 5.011872336272722e10).epsilon(1e-12));
  CHECK(v.noise_exponent == Approx(1.4325e-12).epsilon(1e-3));
  CHECK(v.mu_upper_bound() == Approx(1.0).epsilon(1e-9));
  CHECK(v.mu_upper_bound() < 1.0);
}

TEST_CASE("validate_config rejects out-of-range fields") {
  NetworkConfig cfg;

  cfg.xi = 0.0;
  CHECK_THROWS_MATCHES(validate_config(cfg), ConfigError,
                       Catch::Matchers::Message("xi out of (0,1]"));
  cfg.xi = 1.5;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg.xi = 1.0; // boundary included
  CHECK_NOTHROW(validate_config(cfg));

  cfg = NetworkConfig{};
  cfg.alpha = 2.0;
  CHECK_THROWS_MATCHES(validate_config(cfg), ConfigError,
                       Catch::Matchers::Message("alpha must exceed 2"));

  cfg = NetworkConfig{};
  cfg.p = -0.1;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);

  cfg = NetworkConfig{};
  cfg.lambda = -1e-3;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);

  cfg = NetworkConfig{};
  cfg.window = 0.5; // must exceed 2r = 1
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);

  cfg = NetworkConfig{};
  cfg.measure_slots = 0;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);

  cfg = NetworkConfig{};
  cfg.noise = 0.0;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}
