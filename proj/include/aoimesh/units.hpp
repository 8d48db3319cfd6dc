#ifndef AOIMESH_UNITS_HPP
#define AOIMESH_UNITS_HPP

#include <cmath>

namespace aoimesh {

/// Decibel / dBm conversions. All internal computation is in SI units
/// (watts, meters); dB-scale values are accepted at the configuration
/// boundary only.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

inline double dbm_to_watts(double dbm) { return db_to_linear(dbm) * 1e-3; }

inline double watts_to_dbm(double w) { return linear_to_db(w * 1e3); }

} // namespace aoimesh

#endif
