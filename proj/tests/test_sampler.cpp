#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "nodalperc/circulant.hpp"
#include "nodalperc/sampler.hpp"

using namespace nodalperc;

namespace {

// Accumulates E[X_i X_j] over replicates of a centred vector.
struct SecondMoments {
  explicit SecondMoments(std::size_t n) : n(n), sum(n * n, 0.0) {}
  void add(const std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sum[i * n + j] += v[i] * v[j];
    ++count;
  }
  double at(std::size_t i, std::size_t j) const { return sum[i * n + j] / count; }
  double max_deviation(const Kernel& k, const std::vector<Vec2>& pts) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(at(i, j) - k(pts[i] - pts[j])));
    return worst;
  }
  std::size_t n;
  std::vector<double> sum;
  std::size_t count = 0;
};

std::vector<Vec2> sixteen_points(double spread) {
  std::vector<Vec2> pts;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pts.push_back({spread * (i - 1.5) / 1.5 * 0.7, spread * (j - 1.5) / 1.5 * 0.7});
  return pts;
}

}  // namespace

TEST(Cholesky, SinglePointVariance) {
  const CholeskySampler s(Kernel::bargmann_fock(), {{0.3, -1.0}});
  double sum2 = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double v = s.sample(k).values[0];
    sum2 += v * v;
  }
  EXPECT_GT(sum2 / n, 0.98);
  EXPECT_LT(sum2 / n, 1.02);
}

TEST(Cholesky, CoincidentPointsAreDegenerate) {
  EXPECT_THROW(sample_cholesky(Kernel::bargmann_fock(), {{1, 1}, {1, 1}}, 1), DegenerateError);
}

TEST(Cholesky, HalfCorrelationPair) {
  const double r = std::sqrt(2.0 * std::log(2.0));
  const CholeskySampler s(Kernel::bargmann_fock(), {{0, 0}, {r, 0}});
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto v = s.sample(k).values;
    sxy += v[0] * v[1];
    sxx += v[0] * v[0];
    syy += v[1] * v[1];
  }
  EXPECT_NEAR(sxy / std::sqrt(sxx * syy), 0.5, 0.01);
}

TEST(Cholesky, SizeCap) {
  std::vector<Vec2> pts(4097);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {static_cast<double>(i), 0.0};
  EXPECT_THROW(CholeskySampler(Kernel::bargmann_fock(), pts), SizeError);
}

TEST(Sampler, Determinism) {
  const auto pts = sixteen_points(1.5);
  const auto a = sample_cholesky(Kernel::bargmann_fock(), pts, 11);
  const auto b = sample_cholesky(Kernel::bargmann_fock(), pts, 11);
  EXPECT_EQ(a.values, b.values);
  const auto budget = choose_truncation(2.0, 0.05, 0.01);
  EXPECT_EQ(sample_bf_series(budget, pts, 5).values, sample_bf_series(budget, pts, 5).values);
  EXPECT_EQ(sample_kostlan(30, pts, 5).values, sample_kostlan(30, pts, 5).values);
  EXPECT_EQ(sample_wave(50, pts, 5).values, sample_wave(50, pts, 5).values);
  EXPECT_NE(sample_wave(50, pts, 5).values, sample_wave(50, pts, 6).values);
}

TEST(Truncation, DocumentedDegrees) {
  EXPECT_EQ(choose_truncation(1.0, 0.1, 0.01).degree, 19);
  EXPECT_EQ(choose_truncation(0.0, 1.0, 1.0).degree, 0);
  EXPECT_EQ(choose_truncation(2.0, 0.05, 0.01).degree, 54);
  const int gap = choose_truncation(2.0, 0.1, 0.01).degree - choose_truncation(1.0, 0.1, 0.01).degree;
  EXPECT_LE(std::abs(gap - static_cast<int>(std::ceil(48.0 / std::log(4.0)))), 1);
  EXPECT_THROW(choose_truncation(1.0, 0.0, 0.5), DomainError);
}

TEST(Truncation, MinimalAndValid) {
  for (double r : {0.0, 0.5, 1.0, 2.0, 3.0})
    for (double eps : {0.5, 0.1, 0.01})
      for (double delta : {0.5, 0.1, 1e-4}) {
        const auto b = choose_truncation(r, eps, delta);
        EXPECT_LE(b.log_tail_bound(), std::log(delta) + 1e-12);
        if (b.degree > 0) {
          auto lower = b;
          --lower.degree;
          EXPECT_GT(lower.log_tail_bound(), std::log(delta) + 1e-12);
        }
      }
}

TEST(Series, OriginIsConstantCoefficient) {
  const auto budget = choose_truncation(1.0, 0.1, 0.01);
  const auto s = sample_bf_series(budget, {{0, 0}}, 42);
  Engine eng = make_engine(42, 0);
  std::normal_distribution<double> normal;
  EXPECT_EQ(s.values[0], normal(eng));
}

TEST(Series, SkippedColumnsDoNotShiftOthers) {
  const auto budget = choose_truncation(2.0, 0.05, 0.01);
  const auto alone = sample_bf_series(budget, {{1.0, 0.0}}, 9);
  const auto joint = sample_bf_series(budget, {{1.0, 0.0}, {0.5, 0.5}}, 9);
  EXPECT_EQ(alone.values[0], joint.values[0]);
}

TEST(Series, OutsideDiscIsDomainError) {
  EXPECT_THROW(sample_bf_series(choose_truncation(1.0, 0.1, 0.1), {{0.9, 0.9}}, 1), DomainError);
}

TEST(Series, HugeRadiusStaysFinite) {
  const auto budget = choose_truncation(12.0, 0.1, 0.1);
  const auto s = sample_bf_series(budget, {{11.0, 4.0}, {-7.0, 9.0}}, 3);
  for (double v : s.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Series, CovarianceMatchesGaussianKernel) {
  const auto budget = choose_truncation(2.0, 0.05, 0.01);
  const std::vector<Vec2> pts{{0, 0}, {1, 0}, {-1, 1}, {0.5, -1.5}, {1.2, 1.2}, {-1.9, 0.1}, {0.3, 0.4}, {-0.7, -1.1}};
  const SeriesSampler s(budget, pts);
  SecondMoments m(pts.size());
  const int n = 20000;
  std::vector<double> v(pts.size());
  for (int k = 0; k < n; ++k) {
    s.draw(k, v);
    m.add(v);
  }
  EXPECT_LT(m.max_deviation(Kernel::bargmann_fock(), pts), std::max(2 * 0.05, 5.0 / std::sqrt(n)));
}

TEST(Kostlan, OriginIsConstantCoefficientWithUnitVariance) {
  const auto s = sample_kostlan(1, {{0, 0}}, 77);
  Engine eng = make_engine(77, 0);
  std::normal_distribution<double> normal;
  EXPECT_EQ(s.values[0], normal(eng));
}

TEST(Kostlan, UnitVarianceAwayFromOrigin) {
  const KostlanSampler s(10, {{2.0, -1.0}});
  double sum2 = 0.0;
  const int n = 40000;
  std::vector<double> v(1);
  for (int k = 0; k < n; ++k) {
    s.draw(k, v);
    sum2 += v[0] * v[0];
  }
  EXPECT_NEAR(sum2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Kostlan, Degree200ApproachesGaussianKernel) {
  const KostlanSampler s(200, {{0.0, 0.0}, {1.0, 0.0}});
  double sxy = 0.0;
  const int n = 40000;
  std::vector<double> v(2);
  for (int k = 0; k < n; ++k) {
    s.draw(k, v);
    sxy += v[0] * v[1];
  }
  EXPECT_NEAR(sxy / n, std::exp(-0.5), 0.02);
}

TEST(Wave, UnitVarianceAndFirstZero) {
  const int n = 100000;
  double s00 = 0.0, s01 = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto v = sample_wave(500, {{0.0, 0.0}, {2.404825557695773, 0.0}}, k).values;
    s00 += v[0] * v[0];
    s01 += v[0] * v[1];
  }
  EXPECT_GT(s00 / n, 0.97);
  EXPECT_LT(s00 / n, 1.03);
  EXPECT_NEAR(s01 / n, 0.0, 0.02);
}

TEST(Wave, SingleCosineHasUnitVariance) {
  const int n = 100000;
  double s00 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = sample_wave(1, {{0.4, 0.2}}, k).values[0];
    s00 += v * v;
  }
  EXPECT_NEAR(s00 / n, 1.0, 0.02);
}

TEST(Circulant, GoodSizes) {
  EXPECT_EQ(good_fft_size(1), 1);
  EXPECT_EQ(good_fft_size(11), 12);
  EXPECT_EQ(good_fft_size(1026), 1029);
  EXPECT_EQ(good_fft_size(97), 98);
}

TEST(Circulant, GaussianKernelNeedsNoClipping) {
  const auto grid = square_grid({0, 0}, 0.25, 64, 64);
  const CirculantSampler s(Kernel::bargmann_fock(), grid, 2.0);
  EXPECT_EQ(s.report().clipped_mass, 0.0);
  EXPECT_GE(s.report().m1, 128);
}

TEST(Circulant, CovarianceMatchesOracleOnSubset) {
  const auto grid = square_grid({0, 0}, 0.25, 64, 64);
  const CirculantSampler s(Kernel::bargmann_fock(), grid, 2.0);
  std::vector<std::size_t> idx;
  std::vector<Vec2> pts;
  for (int a : {0, 5, 17, 63})
    for (int b : {0, 2, 31, 60}) {
      idx.push_back(grid.index(a, b));
      pts.push_back(grid.point(a, b));
    }
  auto ws = s.make_workspace();
  std::vector<double> f1(grid.size()), f2(grid.size()), v(pts.size());
  SecondMoments m(pts.size());
  const int pairs = 5000;
  for (int k = 0; k < pairs; ++k) {
    s.sample_pair(3, k, ws, f1, f2);
    for (const auto* f : {&f1, &f2}) {
      for (std::size_t i = 0; i < idx.size(); ++i) v[i] = (*f)[idx[i]];
      m.add(v);
    }
  }
  EXPECT_LT(m.max_deviation(Kernel::bargmann_fock(), pts), 4.0 / std::sqrt(2.0 * pairs));
}

TEST(Circulant, PairHalvesAreUncorrelated) {
  const auto grid = square_grid({0, 0}, 0.5, 16, 16);
  const CirculantSampler s(Kernel::bargmann_fock(), grid, 2.0);
  auto ws = s.make_workspace();
  std::vector<double> f1(grid.size()), f2(grid.size());
  double c = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    s.sample_pair(1, k, ws, f1, f2);
    c += f1[7] * f2[7];
  }
  EXPECT_NEAR(c / n, 0.0, 5.0 / std::sqrt(n));
}

TEST(Circulant, DeltaTableGivesIndependentValues) {
  const Kernel delta = Kernel::tabulated({0.0, 0.01}, {1.0, 0.0});
  const auto grid = square_grid({0, 0}, 1.0, 8, 8);
  const CirculantSampler s(delta, grid, 2.0);
  EXPECT_EQ(s.report().clipped_mass, 0.0);
  auto ws = s.make_workspace();
  std::vector<double> f1(grid.size()), f2(grid.size());
  double c01 = 0.0, c00 = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    s.sample_pair(1, k, ws, f1, f2);
    c01 += f1[0] * f1[1];
    c00 += f1[0] * f1[0];
  }
  EXPECT_NEAR(c01 / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(c00 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Circulant, BesselEmbeddingClipsTooMuch) {
  // The J0 spectrum is a ring; the periodised kernel rings with large negative lobes.
  const auto grid = square_grid({0, 0}, 0.5, 64, 64);
  const EmbeddingReport rep = CirculantSampler::probe(Kernel::bessel_wave(), grid, 4.0);
  EXPECT_GT(rep.clipped_mass, kMaxClippedMass);
  EXPECT_LT(rep.min_eigenvalue, 0.0);
  EXPECT_THROW(make_circulant(Kernel::bessel_wave(), grid, 4.0), EmbeddingError);
}

TEST(BesselSeries, SequenceAgreesWithBoost) {
  double worst = 0.0;
  for (double r : {0.0, 1e-3, 0.7, 5.0, 12.5, 31.0, 64.0, 90.0}) {
    const auto j = bessel_jn_sequence(r, 150);
    for (int m = 0; m <= 150; ++m) worst = std::max(worst, std::abs(j[m] - boost::math::cyl_bessel_j(m, r)));
  }
  EXPECT_LT(worst, 1e-13);
}

TEST(BesselSeries, CovarianceMatchesOracle) {
  const auto grid = square_grid({0, 0}, 0.5, 64, 64);
  std::vector<Vec2> pts;
  for (int a : {0, 3, 30, 63})
    for (int b : {0, 4, 41, 63}) pts.push_back(grid.point(a, b));
  const BesselSeriesSampler s(pts);
  EXPECT_GT(s.order(), 20);
  SecondMoments m(pts.size());
  std::vector<double> v(pts.size());
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    s.draw(k, v);
    m.add(v);
  }
  EXPECT_LT(m.max_deviation(Kernel::bessel_wave(), pts), 5.0 / std::sqrt(n));
}

TEST(Circulant, ShearedGridMatchesOracle) {
  const AffineGrid grid{{-2, -2}, {0.5, 0.0}, {0.25, 0.5 * std::numbers::sqrt3 / 2}, 12, 10};
  const CirculantSampler s(Kernel::bargmann_fock(), grid, 2.0);
  auto ws = s.make_workspace();
  std::vector<double> f1(grid.size()), f2(grid.size());
  const std::vector<std::pair<int, int>> sel{{0, 0}, {1, 0}, {0, 1}, {3, 7}, {11, 9}};
  std::vector<Vec2> pts;
  for (auto [a, b] : sel) pts.push_back(grid.point(a, b));
  SecondMoments m(pts.size());
  std::vector<double> v(pts.size());
  const int pairs = 10000;
  for (int k = 0; k < pairs; ++k) {
    s.sample_pair(2, k, ws, f1, f2);
    for (std::size_t i = 0; i < sel.size(); ++i) v[i] = f1[grid.index(sel[i].first, sel[i].second)];
    m.add(v);
  }
  EXPECT_LT(m.max_deviation(Kernel::bargmann_fock(), pts), 5.0 / std::sqrt(pairs));
}

TEST(Circulant, RejectsNonStationaryKernel) {
  EXPECT_THROW(CirculantSampler(Kernel::kostlan(10), square_grid({0, 0}, 1.0, 4, 4)), UnsupportedError);
}

TEST(Circulant, SmallBoxEmbeddingIsGrownUntilExact) {
  // Width-4 box with padding 2 wraps at lag 4, where the Gaussian kernel is still 3e-4.
  const auto grid = square_grid({-2, -2}, 0.0625, 65, 65);
  EXPECT_GT(CirculantSampler::probe(Kernel::bargmann_fock(), grid, 2.0).clipped_mass, 0.0);
  const auto s = make_circulant(Kernel::bargmann_fock(), grid);
  EXPECT_EQ(s.report().clipped_mass, 0.0);
  EXPECT_GE(s.report().padding, 4.0);
}
