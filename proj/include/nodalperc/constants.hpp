#ifndef NODALPERC_CONSTANTS_HPP
#define NODALPERC_CONSTANTS_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "nodalperc/errors.hpp"
#include "nodalperc/tower.hpp"

namespace nodalperc {

// ---------------------------------------------------------------------------
// Universal RSW polynomials (all as natural logarithms).
// ---------------------------------------------------------------------------

/// log Q1(c0) = log(c0 (c0/8)^4)
inline double log_Q1(double c0) { return std::log(c0) + 4.0 * std::log(c0 / 8.0); }

/// log q2(c0) = log((Q1^15 c0^2)^4)
inline double log_q2(double c0) { return 4.0 * (15.0 * log_Q1(c0) + 2.0 * std::log(c0)); }

/// log q~2(c0) = log(((Q1 (c0/4)^2)^9 c0^8)^4)
inline double log_q2_tilde(double c0) {
  return 4.0 * (9.0 * (log_Q1(c0) + 2.0 * std::log(c0 / 4.0)) + 8.0 * std::log(c0));
}

inline double log_Q2(double c0) { return std::min(log_q2(c0), log_q2_tilde(c0)); }

/// log Q3(c0) = log((Q2 (c0/4)^2)^3 c0^2)
inline double log_Q3(double c0) { return 3.0 * (log_Q2(c0) + 2.0 * std::log(c0 / 4.0)) + 2.0 * std::log(c0); }

/// gamma(nu) = 1 + log_{4/(3+2nu)}(3/2 + nu)
inline double gamma_nu(double nu) { return 1.0 + std::log(1.5 + nu) / std::log(4.0 / (3.0 + 2.0 * nu)); }

/// Smallest k >= 0 with s + k divisible by 6.
inline int mod6_shift(long long s) {
  if (s < 1) throw DomainError("mod6_shift: s must be >= 1");
  return static_cast<int>((6 - s % 6) % 6);
}

/// log tau1(c0) = max(log 4, ln5 ln(c0/8) / ln(1 - Q3/2) + ln 5), as a tower since the
/// ratio is of order 1/Q3.
inline Tower log_tau1(double c0) {
  // -ln(1 - Q3/2) is Q3/2 to double precision whenever Q3 underflows log1p's resolution
  const double lq3 = log_Q3(c0);
  double log_neg_log1m;
  if (lq3 > -700.0) {
    log_neg_log1m = std::log(-std::log1p(-0.5 * std::exp(lq3)));
  } else {
    log_neg_log1m = lq3 - std::log(2.0);
  }
  const double log_num = std::log(std::log(5.0) * std::log(8.0 / c0));
  const Tower ratio = Tower(log_num - log_neg_log1m).exp();
  return max(Tower(std::log(4.0)), ratio + Tower(std::log(5.0)));
}

// ---------------------------------------------------------------------------
// Decorrelation budget.
// ---------------------------------------------------------------------------

/// Coupling constant of the total-variation bound.
inline const double kCouplingC = std::exp2(14.0 / 5.0);

struct DecorrBudget {
  double a_T = 2.0;        // lattice vertex density
  double alpha = 325.0;    // kernel decay exponent
  double log_beta = 0.0;   // log of the kernel decay constant
  double C = kCouplingC;
};

/// log of C a^{8/5} area^{8/5} sup|K|^{1/5}, not clamped; -inf when sup|K| = 0.
inline double log_phi_bound(const DecorrBudget& b, double area, double sup_abs_K) {
  if (!(area > 0.0) || !(sup_abs_K >= 0.0 && sup_abs_K <= 1.0))
    throw DomainError("phi_bound: need area > 0 and 0 <= sup|K| <= 1");
  if (sup_abs_K == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(b.C) + 1.6 * std::log(b.a_T) + 1.6 * std::log(area) + 0.2 * std::log(sup_abs_K);
}

/// C a^{8/5} area^{8/5} sup|K|^{1/5}, clamped to 1.
inline double phi_bound(const DecorrBudget& b, double area, double sup_abs_K) {
  const double l = log_phi_bound(b, area, sup_abs_K);
  return l >= 0.0 ? 1.0 : std::exp(l);
}

/// log C' with C' = C 4^{8/5} beta^{1/5}: the union B(s) u A_{2s,4s} u A_{5s, s ln s} has
/// area at most 4 s^2 ln^2 s and the two sets are at distance at least s.
inline double log_C_prime(const DecorrBudget& b) {
  return std::log(b.C) + 1.6 * std::log(4.0) + 0.2 * b.log_beta;
}

/// log of the envelope C' a^{8/5} s^{(16-alpha)/5} ln^{16/5} s at log s = L > 0.
inline double log_phi_envelope(const DecorrBudget& b, double L) {
  if (!(L > 0.0)) throw DomainError("phi envelope needs s > 1");
  return log_C_prime(b) + 1.6 * std::log(b.a_T) + (16.0 - b.alpha) / 5.0 * L + 3.2 * std::log(L);
}

/// Largest L = log s with envelope(L) >= exp(log_level), or nullopt if none. Needs alpha > 16.
inline std::optional<double> largest_log_scale_above(const DecorrBudget& b, double log_level) {
  if (!(b.alpha > 16.0)) throw DomainError("decorrelation scale needs alpha > 16");
  const double k = (16.0 - b.alpha) / 5.0;
  const double l_peak = 3.2 / -k;  // maximiser of k L + 3.2 log L
  auto g = [&](double L) { return log_phi_envelope(b, L) - log_level; };
  if (g(l_peak) < 0.0) return std::nullopt;
  double lo = l_peak, hi = 2.0 * l_peak + 1.0;
  while (g(hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// The pipeline.
// ---------------------------------------------------------------------------

struct PipelineOptions {
  DecorrBudget budget;
  /// Lower bound b on alpha(Omega, s), the lambda/4 of the small-box positivity argument.
  /// Default: lambda = 1/4, a calibrated value for the Gaussian kernel.
  double alpha_lower = 0.0625;
};

struct RswConstants {
  double c0 = 0.5;
  double nu = 0.25;
  double log_Q1 = 0.0;
  double log_q2 = 0.0;
  double log_q2_tilde = 0.0;
  double log_Q2 = 0.0;
  double log_Q3 = 0.0;
  Tower log_tau1;
  double gamma_nu = 0.0;
  std::optional<double> log_scale_envelope;  // largest log s with envelope >= c0 Q3 / 16
  Tower log_s_omega;                         // log s(Omega) = max(tau1, log_scale_envelope)
  long long s_nu_floor = 0;                  // floor(6/nu) + 1
  Tower log_s_nu;
  double alpha_lower = 0.0;
  Tower log_t_nu;
};

/// Evaluates the constant chain for (c0, nu) and the decay/lattice parameters in `opt`.
inline RswConstants pipeline(double c0, double nu, const PipelineOptions& opt = {}) {
  if (!(c0 > 0.0 && c0 < 1.0)) throw DomainError("pipeline: need 0 < c0 < 1");
  if (!(nu > 0.0 && nu < 0.5)) throw DomainError("pipeline: need 0 < nu < 1/2");
  if (!(opt.alpha_lower > 0.0)) throw DomainError("pipeline: alpha_lower must be positive");
  RswConstants r;
  r.c0 = c0;
  r.nu = nu;
  r.log_Q1 = nodalperc::log_Q1(c0);
  r.log_q2 = nodalperc::log_q2(c0);
  r.log_q2_tilde = nodalperc::log_q2_tilde(c0);
  r.log_Q2 = std::min(r.log_q2, r.log_q2_tilde);
  r.log_Q3 = nodalperc::log_Q3(c0);
  r.log_tau1 = nodalperc::log_tau1(c0);
  r.gamma_nu = nodalperc::gamma_nu(nu);
  r.log_scale_envelope = largest_log_scale_above(opt.budget, std::log(c0 / 16.0) + r.log_Q3);
  const Tower tau1 = r.log_tau1.exp();
  r.log_s_omega = r.log_scale_envelope ? max(tau1, Tower(*r.log_scale_envelope)) : tau1;
  r.s_nu_floor = static_cast<long long>(std::floor(6.0 / nu)) + 1;
  r.log_s_nu = max(r.log_s_omega, Tower(std::log(static_cast<double>(r.s_nu_floor))));
  r.alpha_lower = opt.alpha_lower;
  // log t_nu = log(3/2+nu) + gamma log s_nu + (1-gamma) log b
  const Tower scaled = Tower(r.gamma_nu) * r.log_s_nu;
  r.log_t_nu = scaled + Tower(std::log(1.5 + nu) + (1.0 - r.gamma_nu) * std::log(opt.alpha_lower));
  return r;
}

// ---------------------------------------------------------------------------
// Bound on t_nu as a power of the vertex density.
// ---------------------------------------------------------------------------

struct TNuBound {
  double exponent = 0.0;  // 8 gamma(nu) / (alpha - 16 - theta)
  Tower log_C;            // log C_{theta,nu}
  double log_density_term = 0.0;  // exponent * log a_T
  Tower log_bound;        // log C_{theta,nu} + exponent * log a_T
};

/// t_nu <= C_{theta,nu} a_T^{8 gamma/(alpha-16-theta)}, with C_{theta,nu} assembled from
/// the chain below (the bound holds for a_T >= 1):
///   K_theta = (16/(theta e))^{16/5}        bounds ln^{16/5} s / s^{theta/5}
///   C_theta = max(e^{tau1}, (16 C' K_theta / (c0 Q3))^{5/(alpha-16-theta)})
///   C'_theta = max(C_theta, floor(6/nu) + 1)
///   C_{theta,nu} = (3/2 + nu) b^{1-gamma} C'_theta^gamma
/// `log_C_override` replaces log C_{theta,nu} when given.
inline TNuBound t_nu_bound(double a_T, double alpha, double theta, double nu, double c0 = 0.5,
                           double log_beta = 0.0, double alpha_lower = 0.0625,
                           std::optional<Tower> log_C_override = std::nullopt) {
  if (!(theta > 0.0 && theta < alpha - 16.0)) throw DomainError("t_nu_bound: need 0 < theta < alpha - 16");
  if (!(nu > 0.0 && nu < 0.5)) throw DomainError("t_nu_bound: need 0 < nu < 1/2");
  if (!(a_T >= 1.0)) throw DomainError("t_nu_bound: the assembled constant needs a_T >= 1");
  if (!(c0 > 0.0 && c0 < 1.0) || !(alpha_lower > 0.0)) throw DomainError("t_nu_bound: bad c0 or alpha_lower");
  const double g = gamma_nu(nu);
  const double denom = alpha - 16.0 - theta;
  TNuBound out;
  out.exponent = 8.0 * g / denom;
  if (log_C_override) {
    out.log_C = *log_C_override;
  } else {
    DecorrBudget b;
    b.alpha = alpha;
    b.log_beta = log_beta;
    const double log_K = 3.2 * (std::log(16.0 / theta) - 1.0);
    const double log_second = 5.0 / denom * (std::log(16.0) + log_C_prime(b) + log_K - std::log(c0) - log_Q3(c0));
    const Tower log_C_theta = max(log_tau1(c0).exp(), Tower(log_second));
    const Tower log_C_theta_nu_floor = max(log_C_theta, Tower(std::log(std::floor(6.0 / nu) + 1.0)));
    out.log_C = Tower(g) * log_C_theta_nu_floor + Tower(std::log(1.5 + nu) + (1.0 - g) * std::log(alpha_lower));
  }
  out.log_density_term = out.exponent * std::log(a_T);
  out.log_bound = out.log_C + Tower(out.log_density_term);
  return out;
}

// ---------------------------------------------------------------------------
// Estimating alpha(Omega, s) from Monte Carlo curves.
// ---------------------------------------------------------------------------

struct AlphaCurves {
  double s = 0.0;
  std::vector<double> alpha;       // increasing grid covering [0, s/4]
  std::vector<double> p_x;         // P[X_s(alpha)]
  std::vector<double> se_x;
  std::vector<double> h_diff;      // P[H_s(0, alpha)] - P[H_s(alpha, s/2)]
  std::vector<double> se_h_diff;
};

struct AlphaEstimate {
  double alpha_hat = 0.0;       // smallest grid alpha with P[X_s(alpha)] >= Q1(c0_hat)
  bool p1_found = false;        // false: no grid point satisfied (P1); alpha_hat = s/4
  bool p2_holds = false;        // (P2) at alpha_hat, or alpha_hat = s/4
  double alpha_tassion = 0.0;   // smallest grid alpha with h_diff >= c0_hat/4, capped at s/4
  bool tassion_capped = false;
};

inline AlphaEstimate estimate_alpha_s(const AlphaCurves& c, double c0_hat) {
  const std::size_t n = c.alpha.size();
  if (n == 0 || c.p_x.size() != n || c.h_diff.size() != n)
    throw ValidationError("estimate_alpha_s: curves must have matching non-empty lengths");
  if (!(c0_hat > 0.0 && c0_hat < 1.0)) throw DomainError("estimate_alpha_s: need 0 < c0_hat < 1");
  for (std::size_t i = 1; i < n; ++i)
    if (!(c.alpha[i] > c.alpha[i - 1])) throw ValidationError("estimate_alpha_s: alpha grid must increase");
  const double q1 = std::exp(log_Q1(c0_hat));
  const double cap = c.s / 4.0;
  AlphaEstimate e;
  e.alpha_hat = cap;
  for (std::size_t i = 0; i < n; ++i)
    if (c.alpha[i] <= cap && c.p_x[i] >= q1) {
      e.alpha_hat = c.alpha[i];
      e.p1_found = true;
      e.p2_holds = c.alpha[i] >= cap || c.h_diff[i] >= c0_hat / 4.0;
      break;
    }
  if (!e.p1_found) e.p2_holds = true;
  e.alpha_tassion = cap;
  e.tassion_capped = true;
  for (std::size_t i = 0; i < n; ++i)
    if (c.alpha[i] <= cap && c.h_diff[i] >= c0_hat / 4.0) {
      e.alpha_tassion = c.alpha[i];
      e.tassion_capped = false;
      break;
    }
  return e;
}

}  // namespace nodalperc

#endif  // NODALPERC_CONSTANTS_HPP
