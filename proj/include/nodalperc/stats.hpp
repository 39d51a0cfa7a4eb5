#ifndef NODALPERC_STATS_HPP
#define NODALPERC_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "nodalperc/errors.hpp"

namespace nodalperc {

/// Two-sided standard normal quantile for the given confidence level.
inline double normal_z(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0,1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + confidence / 2.0);
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for k successes out of n trials.
inline Interval wilson_interval(long long k, long long n, double confidence = 0.95) {
  if (n <= 0 || k < 0 || k > n) throw DomainError("wilson_interval: need 0 <= k <= n and n > 0");
  const double z = normal_z(confidence);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval iv{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  // keep the point estimate inside despite rounding at k = 0 or k = n
  if (k == 0) iv.lo = 0.0;
  if (k == n) iv.hi = 1.0;
  return iv;
}

/// Mean and standard error of the mean.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

template <class Range>
MeanSe mean_se(const Range& xs) {
  MeanSe out;
  double sum = 0.0;
  for (double x : xs) {
    sum += x;
    ++out.n;
  }
  if (out.n == 0) return out;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(out.n - 1));
    out.se = out.sd / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw DomainError("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= xs.size()) return xs.back();
  return xs[i] + (pos - static_cast<double>(i)) * (xs[i + 1] - xs[i]);
}

}  // namespace nodalperc

#endif  // NODALPERC_STATS_HPP
