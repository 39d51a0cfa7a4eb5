#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nodalperc/kernels.hpp"

using namespace nodalperc;

TEST(Kernels, NormalisedAtOrigin) {
  EXPECT_EQ(kernel_eval(Kernel::bargmann_fock(), {0, 0}), 1.0);
  EXPECT_EQ(kernel_eval(Kernel::bessel_wave(), {0, 0}), 1.0);
  EXPECT_EQ(kernel_eval(Kernel::kostlan(5), {0, 0}), 1.0);
}

TEST(Kernels, GaussianHalfCorrelationDistance) {
  const double r = std::sqrt(2.0 * std::log(2.0));
  EXPECT_NEAR(kernel_eval(Kernel::bargmann_fock(), {r, 0}), 0.5, 1e-15);
  EXPECT_NEAR(kernel_eval(Kernel::bargmann_fock(), {r / std::sqrt(2.0), r / std::sqrt(2.0)}), 0.5, 1e-15);
}

TEST(Kernels, BesselAgreesWithBoostToTwelveDigits) {
  double worst = 0.0;
  for (double r = 0.0; r < 400.0; r += 0.01937) {
    worst = std::max(worst, std::abs(bessel_j0(r) - boost::math::cyl_bessel_j(0, r)));
  }
  EXPECT_LT(worst, 1e-12);
  EXPECT_NEAR(bessel_j0(2.404825557695773), 0.0, 1e-13);
}

TEST(Kernels, SymmetriesHoldExactly) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const Kernel table = Kernel::tabulated({0.0, 1.0, 3.0}, {1.0, 0.4, -0.2});
  for (const Kernel& k : {Kernel::bargmann_fock(), Kernel::bessel_wave(), Kernel::kostlan(7), table}) {
    for (int i = 0; i < 1000; ++i) {
      const Vec2 d{u(eng), u(eng)};
      const double v = kernel_eval(k, d);
      EXPECT_EQ(v, kernel_eval(k, -d));
      EXPECT_EQ(v, kernel_eval(k, Vec2{d.x, -d.y}));
      EXPECT_LE(std::abs(v), 1.0);
    }
  }
}

TEST(Kernels, KostlanFlagsLimitApproximation) {
  const Kernel k = Kernel::kostlan(10);
  EXPECT_TRUE(k.approximate());
  EXPECT_FALSE(k.stationary());
  EXPECT_FALSE(Kernel::bargmann_fock().approximate());
  EXPECT_THROW(Kernel::kostlan(0), ValidationError);
}

TEST(Kernels, TabulatedValidation) {
  EXPECT_THROW(Kernel::tabulated({0.0, 2.0, 1.0}, {1.0, 0.5, 0.2}), ValidationError);
  EXPECT_THROW(Kernel::tabulated({0.0, 1.0, 1.0}, {1.0, 0.5, 0.2}), ValidationError);
  EXPECT_THROW(Kernel::tabulated({0.0, 1.0}, {0.9, 0.5}), ValidationError);
  EXPECT_THROW(Kernel::tabulated({0.0, 1.0}, {1.0}), ValidationError);
  const Kernel k = Kernel::tabulated({0.0, 1.0, 2.0}, {1.0, 0.5, 0.0});
  EXPECT_DOUBLE_EQ(k.radial(0.5), 0.75);
  EXPECT_EQ(k.radial(5.0), 0.0);
}

TEST(Kernels, TabulatedCsvRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "nodalperc_kernel_table.csv";
  {
    std::ofstream out(path);
    out << "radius,value\n# comment\n0,1\n0.5,0.6\n1.5,0.1\n";
  }
  const Kernel k = parse_kernel("table:" + path.string());
  EXPECT_EQ(k.family(), KernelFamily::Tabulated);
  EXPECT_DOUBLE_EQ(k.radial(0.25), 0.8);
  {
    std::ofstream out(path);
    out << "0,1\n1,0.5\n0.5,0.2\n";
  }
  EXPECT_THROW(load_tabulated_kernel(path.string()), ValidationError);
  std::filesystem::remove(path);
  EXPECT_THROW(parse_kernel("gauss"), ValidationError);
  EXPECT_EQ(parse_kernel("kostlan:12").degree(), 12);
}

TEST(Kernels, GaussianDecayEnvelopeNeedsLogBeta) {
  // max_r r^325 exp(-r^2/2) sits at r = sqrt(325), where the log is about 777.4.
  const double r_star = std::sqrt(325.0);
  const double log_peak = 325.0 * std::log(r_star) - 0.5 * 325.0;
  std::vector<double> radii;
  for (int r = 1; r <= 60; ++r) radii.push_back(r);

  Kernel generous = Kernel::bargmann_fock();
  generous.with_decay(325.0, log_peak + 1.0);
  const DecayReport ok = decay_check(generous, radii);
  EXPECT_LE(ok.max_ratio, 1.0);
  EXPECT_EQ(ok.worst_radius, 18.0);

  Kernel tight = Kernel::bargmann_fock();
  tight.with_decay(325.0, 300.0 * std::log(10.0));
  EXPECT_GT(decay_check(tight, radii).max_ratio, 1.0);
}

TEST(Kernels, BesselEnvelopeHalfPower) {
  Kernel k = Kernel::bessel_wave();
  k.with_decay(0.5, 0.0);
  std::vector<double> radii;
  for (int r = 1; r <= 100; ++r) radii.push_back(r);
  const DecayReport rep = decay_check(k, radii);
  EXPECT_LE(rep.max_ratio, 1.0);
  EXPECT_EQ(rep.ratios.size(), radii.size());
}

TEST(Kernels, ZeroTailTableHasZeroRatio) {
  Kernel k = Kernel::tabulated({0.0, 0.5}, {1.0, 0.0});
  k.with_decay(3.0, 0.0);
  EXPECT_EQ(decay_check(k, {1.0, 2.0, 10.0}).max_ratio, 0.0);
}

TEST(Kernels, DecayCheckErrors) {
  EXPECT_THROW(decay_check(Kernel::bargmann_fock(), {1.0}), UnsupportedError);
  Kernel k = Kernel::bargmann_fock();
  k.with_decay(2.0, 0.0);
  EXPECT_THROW(decay_check(k, {0.5}), DomainError);
}
