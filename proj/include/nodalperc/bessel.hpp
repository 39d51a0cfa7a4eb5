#ifndef NODALPERC_BESSEL_HPP
#define NODALPERC_BESSEL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace nodalperc {

namespace detail {

// Power series; cancellation stays below ~1e-15 in extended precision for r < 8.
inline double bessel_j0_series(double r) {
  const long double q = static_cast<long double>(r) * r / 4.0L;
  long double term = 1.0L;
  long double sum = 1.0L;
  for (int k = 1; k < 200; ++k) {
    term *= -q / (static_cast<long double>(k) * k);
    sum += term;
    if (std::fabs(term) < 1e-24L) break;
  }
  return static_cast<double>(sum);
}

// Miller backward recurrence normalised by J0 + 2 sum J_{2k} = 1.
inline double bessel_j0_miller(double r) {
  int n = static_cast<int>(r + 40.0 + 2.0 * std::sqrt(40.0 * r));
  if (n % 2 != 0) ++n;
  long double next = 0.0L;
  long double cur = 1e-300L;
  long double norm = 0.0L;
  const long double x = r;
  for (int k = n; k >= 1; --k) {
    const long double prev = (2.0L * k / x) * cur - next;
    next = cur;
    cur = prev;
    // cur now holds J_{k-1}
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0L * cur;
    if (std::fabs(cur) > 1e300L) {
      cur *= 1e-300L;
      next *= 1e-300L;
      norm *= 1e-300L;
    }
  }
  norm += cur;
  return static_cast<double>(cur / norm);
}

// Hankel asymptotic expansion, summed until terms stop shrinking.
inline double bessel_j0_asymptotic(double r) {
  long double p = 0.0L;
  long double q = 0.0L;
  long double a = 1.0L;  // a_k / r^k
  long double last = 2.0L;
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      const long double odd = 2.0L * k - 1.0L;
      a *= -(odd * odd) / (8.0L * k * r);
    }
    if (std::fabs(a) > last) break;
    last = std::fabs(a);
    // a_k enters with sign (-1)^{floor(k/2)}
    const long double signed_a = ((k / 2) % 2 == 0) ? a : -a;
    if (k % 2 == 0) {
      p += signed_a;
    } else {
      q += signed_a;
    }
    if (last < 1e-20L) break;
  }
  const long double w = static_cast<long double>(r) - std::numbers::pi_v<long double> / 4.0L;
  const long double amp = std::sqrt(2.0L / (std::numbers::pi_v<long double> * r));
  return static_cast<double>(amp * (p * std::cos(w) - q * std::sin(w)));
}

}  // namespace detail

/// Bessel function of the first kind, order zero. Absolute error below 1e-12.
inline double bessel_j0(double r) {
  r = std::abs(r);
  if (r < 8.0) return detail::bessel_j0_series(r);
  if (r < 30.0) return detail::bessel_j0_miller(r);
  return detail::bessel_j0_asymptotic(r);
}

/// J_0(r), ..., J_m(r) by Miller's backward recurrence, normalised by
/// J_0 + 2 sum_k J_{2k} = 1.
inline std::vector<double> bessel_jn_sequence(double r, int max_order) {
  r = std::abs(r);
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1, 0.0);
  if (r == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double top = std::max(static_cast<double>(max_order), r);
  int n = static_cast<int>(top + 40.0 + 2.0 * std::sqrt(40.0 * top));
  if (n % 2 != 0) ++n;
  std::vector<long double> j(static_cast<std::size_t>(n) + 2, 0.0L);
  j[n + 1] = 0.0L;
  j[n] = 1e-300L;
  long double norm = 0.0L;
  const long double x = r;
  for (int k = n; k >= 1; --k) {
    j[k - 1] = (2.0L * k / x) * j[k] - j[k + 1];
    if (k - 1 > 0 && (k - 1) % 2 == 0) norm += 2.0L * j[k - 1];
    if (std::fabs(j[k - 1]) > 1e300L) {
      for (int i = k - 1; i <= n; ++i) j[i] *= 1e-300L;
      norm *= 1e-300L;
    }
  }
  norm += j[0];
  for (int m = 0; m <= max_order; ++m) out[m] = static_cast<double>(j[m] / norm);
  return out;
}

}  // namespace nodalperc

#endif  // NODALPERC_BESSEL_HPP
