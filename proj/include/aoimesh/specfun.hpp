#ifndef AOIMESH_SPECFUN_HPP
#define AOIMESH_SPECFUN_HPP

#include <cmath>
#include <complex>
#include <stdexcept>

namespace aoimesh {

/// Closed form of the interference moment coefficient
///   C_k(alpha) = integral_0^inf u^(d-1) (1+u)^(-k) du * d,  d = 2/alpha,
/// which reduces to Gamma(1+d) Gamma(k-d) / Gamma(k) for k >= 1.
/// Evaluated in log space so large k stays exact to rounding.
inline double inner_integral_ck(double alpha, int k) {
  if (k < 1) throw std::invalid_argument("inner_integral_ck needs k >= 1");
  if (alpha <= 2.0) throw std::invalid_argument("alpha must exceed 2");
  const double d = 2.0 / alpha;
  return std::exp(std::lgamma(1.0 + d) + std::lgamma(k - d) - std::lgamma(k));
}

/// Generalized binomial coefficient binom(s, k) for complex s, integer k>=0:
/// s(s-1)...(s-k+1)/k!. Accumulated pairwise with the factorial to keep the
/// intermediate magnitudes tame.
inline std::complex<double> complex_binomial(std::complex<double> s, int k) {
  if (k < 0) throw std::invalid_argument("complex_binomial needs k >= 0");
  std::complex<double> acc(1.0, 0.0);
  for (int m = 0; m < k; ++m)
    acc *= (s - static_cast<double>(m)) / static_cast<double>(m + 1);
  return acc;
}

} // namespace aoimesh

#endif
