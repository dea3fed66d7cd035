#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "lrperc/errors.hpp"

namespace lrperc {

/// Two-sided standard normal quantile for a confidence level, e.g. 0.95 -> 1.96.
inline double normal_critical_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + confidence / 2.0);
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for `successes` out of `n` trials. Always contains
/// the point estimate; n = 0 yields [0, 1].
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double confidence = 0.95) {
  if (successes > n) throw InvalidArgument("successes exceed trials");
  if (n == 0) return {0.0, 1.0};
  const double z = normal_critical_value(confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  Interval ci{std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
  ci.lo = std::min(ci.lo, p);
  ci.hi = std::max(ci.hi, p);
  return ci;
}

/// Exact P(Bin(n, p) >= m).
///
/// Mass-function terms are built in log space by the ratio recurrence from
/// the mode, then normalised by their total, so no lgamma rounding leaks
/// into the result.
inline double binomial_tail_at_least(std::int64_t n, std::int64_t m, double p) {
  if (n < 0) throw InvalidArgument("binomial n must be >= 0");
  if (m < 0 || m > n) throw InvalidArgument("binomial tail needs 0 <= m <= n");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("binomial p must lie in [0,1]");
  if (m == 0) return 1.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;

  const auto mode = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((n + 1) * p)), 0, n);
  const double log_odds = std::log(p) - std::log1p(-p);
  std::vector<double> log_terms(static_cast<std::size_t>(n + 1));
  log_terms[static_cast<std::size_t>(mode)] = 0.0;
  for (std::int64_t k = mode; k < n; ++k)
    log_terms[static_cast<std::size_t>(k + 1)] =
        log_terms[static_cast<std::size_t>(k)] + std::log(static_cast<double>(n - k) / static_cast<double>(k + 1)) + log_odds;
  for (std::int64_t k = mode; k > 0; --k)
    log_terms[static_cast<std::size_t>(k - 1)] =
        log_terms[static_cast<std::size_t>(k)] - std::log(static_cast<double>(n - k + 1) / static_cast<double>(k)) - log_odds;

  // Report the smaller side directly and the larger as a complement.
  double total = 0.0, upper = 0.0, lower = 0.0;
  for (std::int64_t k = 0; k < m; ++k) lower += std::exp(log_terms[static_cast<std::size_t>(k)]);
  for (std::int64_t k = n; k >= m; --k) upper += std::exp(log_terms[static_cast<std::size_t>(k)]);
  total = lower + upper;
  if (upper <= lower) return upper / total;
  return 1.0 - lower / total;
}

/// Smallest n >= n_min with predicate(n); throws past n_max.
template <class Pred>
std::int64_t minimal_integer(std::int64_t n_min, std::int64_t n_max, Pred&& predicate) {
  for (std::int64_t n = n_min; n <= n_max; ++n)
    if (predicate(n)) return n;
  throw InvalidArgument("no integer up to " + std::to_string(n_max) + " satisfies the condition");
}

}  // namespace lrperc
