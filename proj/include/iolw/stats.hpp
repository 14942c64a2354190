#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/math/distributions/beta.hpp>

#include "iolw/errors.hpp"

namespace iolw {

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double p) const { return p >= lo && p <= hi; }
};

// Two-sided 99% interval for a binomial proportion. Wald with z = 2.5758
// carries the bulk; with fewer than 10 successes (or failures) the normal
// approximation is off, so the exact Clopper-Pearson bounds take over.
inline ConfidenceInterval binomial_ci99(uint64_t successes, uint64_t trials) {
  if (trials == 0) throw InvalidParams("ci needs at least one trial");
  if (successes > trials) throw InvalidParams("successes exceed trials");
  const double n = double(trials);
  const double k = double(successes);
  const uint64_t failures = trials - successes;

  if (successes >= 10 && failures >= 10) {
    constexpr double z = 2.5758293035489004; // Phi^-1(0.995)
    double p = k / n;
    double half = z * std::sqrt(p * (1.0 - p) / n);
    return {std::max(0.0, p - half), std::min(1.0, p + half)};
  }

  constexpr double alpha = 0.01;
  ConfidenceInterval ci;
  if (successes == 0) {
    ci.lo = 0.0;
  } else {
    boost::math::beta_distribution<double> lo(k, n - k + 1);
    ci.lo = boost::math::quantile(lo, alpha / 2);
  }
  if (successes == trials) {
    ci.hi = 1.0;
  } else {
    boost::math::beta_distribution<double> hi(k + 1, n - k);
    ci.hi = boost::math::quantile(hi, 1.0 - alpha / 2);
  }
  return ci;
}

// |observed - expected| as a multiple of the binomial standard deviation.
inline double binomial_sigma_distance(uint64_t successes, uint64_t trials,
                                      double expected_p) {
  if (trials == 0) throw InvalidParams("sigma distance needs trials");
  double sd = std::sqrt(expected_p * (1.0 - expected_p) / double(trials));
  if (sd == 0.0) return successes == 0 ? 0.0 : HUGE_VAL;
  double observed = double(successes) / double(trials);
  return std::abs(observed - expected_p) / sd;
}

} // namespace iolw
