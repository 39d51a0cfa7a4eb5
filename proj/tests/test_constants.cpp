#include <gtest/gtest.h>

#include <boost/math/special_functions/log1p.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "nodalperc/constants.hpp"

using namespace nodalperc;
using Big = boost::multiprecision::cpp_bin_float_100;

namespace {

// Independent high-precision evaluation straight from the polynomial definitions.
struct BigConstants {
  Big Q1, q2, q2t, Q2, Q3;
  explicit BigConstants(double c0d) {
    const Big c0 = c0d;
    Q1 = c0 * pow(c0 / 8, 4);
    q2 = pow(pow(Q1, 15) * c0 * c0, 4);
    q2t = pow(pow(Q1 * pow(c0 / 4, 2), 9) * pow(c0, 8), 4);
    Q2 = q2 < q2t ? q2 : q2t;
    Q3 = pow(Q2 * pow(c0 / 4, 2), 3) * c0 * c0;
  }
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Tower, RoundTripsAndOrdering) {
  const Tower a = Tower(1000.0).exp();
  EXPECT_EQ(a.height(), 1);
  EXPECT_EQ(a.log().to_double(), 1000.0);
  EXPECT_EQ(Tower(3.0).exp().to_double(), std::exp(3.0));
  EXPECT_GT(a, Tower(1e308));
  EXPECT_GT(a.exp(), a);
  EXPECT_LT(Tower(-5.0), Tower(2.0));
  const Tower sum = a + a;  // 2 e^1000 = e^{1000 + ln 2}
  EXPECT_NEAR(sum.log().to_double(), 1000.0 + std::log(2.0), 1e-12);
  const Tower prod = a * Tower(1e10);
  EXPECT_NEAR(prod.log().to_double(), 1000.0 + 10.0 * std::log(10.0), 1e-12);
  EXPECT_NEAR(a.pow(0.5).log().to_double(), 500.0, 1e-12);
  EXPECT_EQ(Tower(4.0).pow(0.5).to_double(), 2.0);
  EXPECT_NEAR(Tower(0.25).pow(2.0).to_double(), 0.0625, 1e-17);
  EXPECT_THROW(Tower(-1.0).log(), DomainError);
}

TEST(Constants, Q1AtOneHalfIsTwoToMinus17) {
  EXPECT_EQ(log_Q1(0.5), -17.0 * std::log(2.0));
  EXPECT_NEAR(std::exp(log_Q1(0.5)), 7.62939453125e-06, 1e-18);
  const RswConstants r = pipeline(0.5, 0.25);
  EXPECT_EQ(r.log_Q1, -17.0 * std::log(2.0));
}

TEST(Constants, PolynomialIdentitiesAgainstHighPrecision) {
  for (double c0 = 0.1; c0 < 0.95; c0 += 0.1) {
    const BigConstants big(c0);
    EXPECT_LT(rel(log_Q1(c0), static_cast<double>(log(big.Q1))), 1e-12);
    EXPECT_LT(rel(log_q2(c0), static_cast<double>(log(big.q2))), 1e-12);
    EXPECT_LT(rel(log_q2_tilde(c0), static_cast<double>(log(big.q2t))), 1e-12);
    EXPECT_LT(rel(log_Q2(c0), static_cast<double>(log(big.Q2))), 1e-12);
    EXPECT_LT(rel(log_Q3(c0), static_cast<double>(log(big.Q3))), 1e-12);
  }
  // the documented powers of two at c0 = 1/2
  const double l2 = std::log(2.0);
  EXPECT_LT(rel(log_q2(0.5), -1028 * l2), 1e-14);
  EXPECT_LT(rel(log_q2_tilde(0.5), -860 * l2), 1e-14);
  EXPECT_LT(rel(log_Q2(0.5), -1028 * l2), 1e-14);
  EXPECT_LT(rel(log_Q3(0.5), -3104 * l2), 1e-14);
}

TEST(Constants, Monotone) {
  double prev1 = -1e300, prev2 = -1e300, prev3 = -1e300;
  for (int k = 1; k <= 9; ++k) {
    const double c0 = 0.1 * k;
    EXPECT_GT(log_Q1(c0), prev1);
    EXPECT_GT(log_Q2(c0), prev2);
    EXPECT_GT(log_Q3(c0), prev3);
    prev1 = log_Q1(c0);
    prev2 = log_Q2(c0);
    prev3 = log_Q3(c0);
  }
}

TEST(Constants, Gamma) {
  EXPECT_NEAR(gamma_nu(0.25), 1.0 + std::log(1.75) / std::log(4.0 / 3.5), 1e-15);
  EXPECT_NEAR(gamma_nu(0.25), 5.19089, 1e-5);
  for (double nu : {0.01, 0.1, 0.3, 0.49}) EXPECT_GT(gamma_nu(nu), 1.0);
}

TEST(Constants, Mod6Table) {
  const int expected[12] = {5, 4, 3, 2, 1, 0, 5, 4, 3, 2, 1, 0};
  for (int s = 1; s <= 12; ++s) {
    EXPECT_EQ(mod6_shift(s), expected[s - 1]);
    EXPECT_EQ((s + mod6_shift(s)) % 6, 0);
  }
  EXPECT_THROW(mod6_shift(0), DomainError);
}

TEST(Constants, Tau1AgainstHighPrecision) {
  for (double c0 : {0.2, 0.5, 0.8}) {
    const BigConstants big(c0);
    const Big log1m = boost::math::log1p(-big.Q3 / 2);
    const Big x = log(Big(5)) * log(Big(c0) / 8) / log1m;
    const Tower lt = log_tau1(c0);
    ASSERT_EQ(lt.height(), 1);  // log tau1 itself is beyond double range
    EXPECT_LT(rel(lt.top(), static_cast<double>(log(x + log(Big(5))))), 1e-12);
  }
}

TEST(Constants, PipelineStructure) {
  const RswConstants r = pipeline(0.5, 0.25);
  EXPECT_EQ(r.log_tau1.height(), 1);
  EXPECT_NEAR(r.log_tau1.top(), std::log(std::log(5.0) * std::log(16.0)) + 3105 * std::log(2.0), 1e-9);
  // s(Omega) >= exp(tau1): log s(Omega) = tau1, two exponentials above the top
  EXPECT_EQ(r.log_s_omega, r.log_tau1.exp());
  EXPECT_EQ(r.s_nu_floor, 25);
  EXPECT_EQ(r.log_s_nu, r.log_s_omega);
  EXPECT_GE(r.log_t_nu, r.log_s_nu);
  // pure function
  const RswConstants again = pipeline(0.5, 0.25);
  EXPECT_EQ(again.log_t_nu, r.log_t_nu);
  EXPECT_EQ(again.log_scale_envelope, r.log_scale_envelope);
  EXPECT_THROW(pipeline(1.0, 0.25), DomainError);
  EXPECT_THROW(pipeline(0.5, 0.5), DomainError);
}

TEST(Constants, PhiBound) {
  DecorrBudget b;
  b.a_T = 2.0;
  EXPECT_EQ(phi_bound(b, 100.0, 0.0), 0.0);
  const double raw = std::exp(log_phi_bound(b, 100.0, std::exp(-50.0)));
  EXPECT_NEAR(raw, kCouplingC * std::pow(2.0, 1.6) * std::pow(100.0, 1.6) * std::exp(-10.0), 1e-10);
  EXPECT_NEAR(raw, 1.52, 0.01);
  EXPECT_EQ(phi_bound(b, 100.0, std::exp(-50.0)), 1.0);
  EXPECT_LT(phi_bound(b, 100.0, std::exp(-100.0)), 1.0);
  // monotone in each argument
  double prev = 0.0;
  for (double k : {1e-60, 1e-40, 1e-30}) {
    const double v = phi_bound(b, 10.0, k);
    EXPECT_GE(v, prev);
    prev = v;
  }
  DecorrBudget denser = b;
  denser.a_T = 4.0;
  EXPECT_GE(log_phi_bound(denser, 10.0, 1e-40), log_phi_bound(b, 10.0, 1e-40));
  EXPECT_GE(log_phi_bound(b, 20.0, 1e-40), log_phi_bound(b, 10.0, 1e-40));
}

TEST(Constants, EnvelopeDecreasingForLargeAlpha) {
  for (double alpha : {40.0, 325.0}) {
    DecorrBudget b;
    b.alpha = alpha;
    double prev = std::numeric_limits<double>::infinity();
    for (double s = 10.0; s <= 1e4; s *= 1.25) {
      const double v = log_phi_envelope(b, std::log(s));
      EXPECT_LT(v, prev) << alpha << " " << s;
      prev = v;
    }
  }
  // near alpha = 16 the log factor wins on this range
  DecorrBudget slow;
  slow.alpha = 17.0;
  EXPECT_GT(log_phi_envelope(slow, std::log(100.0)), log_phi_envelope(slow, std::log(10.0)));
}

TEST(Constants, LargestScaleSolvesEnvelopeEquation) {
  DecorrBudget b;
  b.alpha = 40.0;
  const double level = std::log(1e-6);
  const auto L = largest_log_scale_above(b, level);
  ASSERT_TRUE(L.has_value());
  EXPECT_NEAR(log_phi_envelope(b, *L), level, 1e-9);
  EXPECT_LT(log_phi_envelope(b, *L * 1.001), level);
  b.alpha = 16.0;
  EXPECT_THROW(largest_log_scale_above(b, level), DomainError);
}

TEST(Constants, TNuExponentIdentities) {
  const TNuBound t = t_nu_bound(2.0, 325.0, 1.0, 0.1);
  EXPECT_EQ(t.exponent, 8.0 * gamma_nu(0.1) / 308.0);
  EXPECT_THROW(t_nu_bound(2.0, 325.0, 309.0, 0.1), DomainError);
  EXPECT_THROW(t_nu_bound(2.0, 325.0, 0.0, 0.1), DomainError);
  const TNuBound near = t_nu_bound(2.0, 325.0, 309.0 - 1e-9, 0.1);
  EXPECT_GT(near.exponent, 1e9);
  // doubling the density adds exponent * ln 2 to the log bound
  const TNuBound a = t_nu_bound(3.0, 325.0, 1.0, 0.1, 0.5, 0.0, 0.0625, Tower(4.0));
  const TNuBound b = t_nu_bound(6.0, 325.0, 1.0, 0.1, 0.5, 0.0, 0.0625, Tower(4.0));
  EXPECT_NEAR(b.log_density_term - a.log_density_term, a.exponent * std::log(2.0), 1e-14);
  EXPECT_NEAR(b.log_bound.to_double() - a.log_bound.to_double(), a.exponent * std::log(2.0), 1e-13);
  // the assembled constant dominates t_nu from the pipeline at the same parameters
  PipelineOptions opt;
  opt.budget.a_T = 2.0;
  opt.budget.alpha = 325.0;
  const RswConstants r = pipeline(0.5, 0.1, opt);
  EXPECT_GE(t.log_bound, r.log_t_nu);
}

TEST(AlphaEstimate, DegenerateAndSynthetic) {
  AlphaCurves all_black{8.0, {0.0, 0.5, 1.0, 1.5, 2.0}, {1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {}};
  const AlphaEstimate e0 = estimate_alpha_s(all_black, 0.5);
  EXPECT_EQ(e0.alpha_hat, 0.0);
  EXPECT_TRUE(e0.p1_found);

  // P[X_s] below Q1 until alpha = s/8 = 1
  const double q1 = std::exp(log_Q1(0.5));
  AlphaCurves synth{8.0, {0.0, 0.5, 1.0, 1.5, 2.0}, {0, q1 / 2, q1 * 1.01, 0.1, 0.2}, {}, {0, 0.1, 0.2, 0.3, 0.4}, {}};
  const AlphaEstimate e1 = estimate_alpha_s(synth, 0.5);
  EXPECT_EQ(e1.alpha_hat, 1.0);
  EXPECT_TRUE(e1.p2_holds);         // 0.2 >= c0/4 = 0.125
  EXPECT_EQ(e1.alpha_tassion, 1.0);

  AlphaCurves none{8.0, {0.0, 1.0, 2.0}, {0, 0, 0}, {}, {0, 0, 0}, {}};
  const AlphaEstimate e2 = estimate_alpha_s(none, 0.5);
  EXPECT_FALSE(e2.p1_found);
  EXPECT_EQ(e2.alpha_hat, 2.0);
  EXPECT_TRUE(e2.tassion_capped);
}
