#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nodalperc/nodal.hpp"

using namespace nodalperc;

namespace {

// A deterministic smooth function: a sum of plane waves with fixed random data.
struct WaveSum {
  std::vector<Vec2> k;
  std::vector<double> phase;
  explicit WaveSum(std::uint64_t seed, int n = 30) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 2 * std::numbers::pi);
    for (int i = 0; i < n; ++i) {
      k.push_back({2.0 * normal(eng), 2.0 * normal(eng)});
      phase.push_back(unif(eng));
    }
  }
  double operator()(Vec2 x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) v += std::cos(dot(k[i], x) + phase[i]);
    return v;
  }
};

}  // namespace

TEST(MeshCalculator, GoldenValues) {
  NodalConstants c;
  c.C1 = 2.0;
  c.mu_param = 0.5;
  c.beta_param = 1.5;
  c.mu_T = 1.0;
  c.N = 4;
  const MeshBudget b = mesh_calculator(4.0, 0.1, 1.0, c);
  const double share = 0.1 / 12.0;
  EXPECT_DOUBLE_EQ(b.lambda_s, 0.5 * std::pow(8.0, -2.0 - 1.0 / 6.0));
  EXPECT_DOUBLE_EQ(b.kbar_s, 2.0 / share * std::sqrt(std::log(8.0)));
  EXPECT_DOUBLE_EQ(b.psi_s, b.kbar_s / b.lambda_s);
  EXPECT_DOUBLE_EQ(b.eps1_s, 1.0 / (16.0 * b.psi_s * b.psi_s));
  EXPECT_DOUBLE_EQ(b.eps2_s, share / (50.0 * 1.5 * 16.0 * std::pow(b.psi_s, 3)));
  EXPECT_DOUBLE_EQ(b.admissibility_threshold, std::pow(4.0, -9.0));
  EXPECT_FALSE(b.below_threshold);
  EXPECT_EQ(b.eps_admissible, std::min(b.eps1_s, b.eps2_s));
}

TEST(MeshCalculator, Identities) {
  EXPECT_EQ(eps_sigma(1.0, 2.0, 32.0), 1.0 / 513.0);
  const MeshBudget b = mesh_calculator(3.0, 0.05, 0.5);
  EXPECT_DOUBLE_EQ(b.theta(0.2) / b.theta(0.1), 4.0);
  double ref = 0.0;
  for (double s : {2.0, 5.0, 17.0, 60.0}) {
    const MeshBudget m = mesh_calculator(s, 0.05, 0.5);
    const double r = m.kbar_s / std::sqrt(std::log(2 * s));
    if (ref == 0.0) ref = r;
    EXPECT_NEAR(r, ref, 1e-12 * ref);
  }
  NodalConstants big;
  big.mu_param = 1e12;
  big.C1 = 1e-6;
  EXPECT_TRUE(mesh_calculator(2.0, 0.5, 0.5, big).below_threshold);
  EXPECT_THROW(mesh_calculator(1.0, 0.1, 1.0), DomainError);
  NodalConstants bad;
  bad.beta_param = 0.0;
  EXPECT_THROW(mesh_calculator(3.0, 0.1, 1.0, bad), DomainError);
}

TEST(IftBox, Values) {
  const IftBox a = ift_box(1.0, 1.0);
  EXPECT_EQ(a.eps, 1.0 / 16.0);
  EXPECT_EQ(a.phi_second_bound, 100.0);
  const IftBox b = ift_box(2.0, 1.0);
  EXPECT_EQ(b.eps, 1.0 / 64.0);
  EXPECT_EQ(b.phi_second_bound, 800.0);
  for (double k : {1.0, 1.7, 3.0, 10.0}) {
    const IftBox c = ift_box(k, 0.8);
    EXPECT_NEAR(c.eps * std::pow(c.phi_second_bound, 2.0 / 3.0), std::pow(100.0, 2.0 / 3.0) / 16.0, 1e-12);
  }
  EXPECT_THROW(ift_box(0.5, 1.0), DomainError);
}

TEST(SpectralMoments, KnownKernels) {
  const auto bf = spectral_moments(Kernel::bargmann_fock());
  EXPECT_NEAR(bf.lambda2, 1.0, 1e-6);
  EXPECT_NEAR(bf.lambda4, 3.0, 1e-3);
  const auto bw = spectral_moments(Kernel::bessel_wave());
  EXPECT_NEAR(bw.lambda2, 0.5, 1e-6);
  EXPECT_NEAR(bw.lambda4, 0.375, 1e-3);
  EXPECT_NEAR(tangency_density(bf), std::sqrt(2.0) / (std::numbers::pi * std::numbers::pi), 1e-4);
  EXPECT_NEAR(tangency_density(bf), 0.1433, 1e-4);
}

TEST(PhiMoment, ClosedForm) {
  // E|Z|^{-1/2} E|grad|^{-1} for unit gradient variance
  const double absz = std::pow(2.0, -0.25) * std::tgamma(0.25) / std::sqrt(std::numbers::pi);
  EXPECT_NEAR(phi_moment_exact(0.5, 1.0), absz * std::sqrt(std::numbers::pi / 2.0), 1e-12);
  EXPECT_NEAR(phi_moment_exact(0.5, 1.0), 2.1558, 1e-3);
  EXPECT_THROW(phi_moment_exact(1.0, 1.0), DomainError);
}

TEST(DoubleCrossing, ConstantFieldHasNone) {
  const auto lat = Lattice::face_centered_square(0.5);
  EXPECT_EQ(double_crossings_of(lat, 3.0, 8, [](Vec2) { return 1.0; }), 0u);
  EXPECT_EQ(double_crossings_of(lat, 3.0, 8, [](Vec2) { return -1.0; }), 0u);
}

TEST(DoubleCrossing, FullPeriodOnHorizontalEdges) {
  const double eps = 0.5;
  const auto lat = Lattice::face_centered_square(eps);
  const Patch p = enumerate(lat, centered_box(3.0));
  std::size_t horizontal = 0;
  for (const auto& [u, v] : p.edges())
    horizontal += p.coords[u][1] == p.coords[v][1];
  const auto f = [eps](Vec2 x) { return std::cos(2 * std::numbers::pi * x.x / eps); };
  EXPECT_EQ(double_crossings_of(lat, 3.0, 8, f), horizontal);
  const auto g = [eps](Vec2 x) { return std::sin(2 * std::numbers::pi * x.x / eps + 0.3); };
  EXPECT_EQ(double_crossings_of(lat, 3.0, 8, g), horizontal);
}

TEST(DoubleCrossing, RefinementOnlyAddsSignChanges) {
  const auto lat = Lattice::face_centered_square(0.5);
  for (std::uint64_t seed : {1, 2, 3}) {
    const WaveSum w(seed);
    const Patch p5 = enumerate(lat, centered_box(3.0), 5);
    const Patch p10 = enumerate(lat, centered_box(3.0), 10);
    const Patch p20 = enumerate(lat, centered_box(3.0), 20);
    auto values = [&](const Patch& p) {
      std::vector<double> v(p.grid.size());
      for (int i = 0; i < p.grid.n1; ++i)
        for (int j = 0; j < p.grid.n2; ++j) v[p.grid.index(i, j)] = w(p.grid.point(i, j));
      return v;
    };
    const auto v5 = values(p5), v10 = values(p10), v20 = values(p20);
    const EdgeSubsampler s5(p5), s10(p10), s20(p20);
    ASSERT_EQ(s5.num_edges(), s20.num_edges());
    for (std::size_t e = 0; e < s5.num_edges(); ++e) {
      EXPECT_LE(s5.sign_changes(v5, e), s10.sign_changes(v10, e));
      EXPECT_LE(s10.sign_changes(v10, e), s20.sign_changes(v20, e));
    }
    EXPECT_LE(s5.flagged(v5), s20.flagged(v20));
  }
}

TEST(DoubleCrossing, CensusBasics) {
  const auto K = Kernel::bargmann_fock();
  const auto lat = Lattice::face_centered_square(0.5);
  EXPECT_THROW(double_crossing_census(K, lat, 2.0, 3, 10, 1), DomainError);
  EXPECT_THROW(double_crossing_census(K, lat, 2.0, 8, 10, 1, 0.95, 1 << 20), SizeError);
  const auto a = double_crossing_census(K, lat, 2.0, 8, 21, 5);
  const auto b = double_crossing_census(K, lat, 2.0, 8, 21, 5);
  EXPECT_EQ(a.flagged, b.flagged);
  EXPECT_EQ(a.replicates, 21);
  EXPECT_TRUE(a.lower_bound);
  EXPECT_LE(a.p_clean_interval.lo, a.p_clean);
  EXPECT_GE(a.p_clean_interval.hi, a.p_clean);
  EXPECT_EQ(a.edges_total, enumerate(lat, centered_box(2.0)).num_edges());
}

TEST(DoubleCrossing, FractionFallsWithMesh) {
  const auto K = Kernel::bargmann_fock();
  const auto coarse = double_crossing_census(K, Lattice::face_centered_square(0.5), 3.0, 8, 60, 2);
  const auto fine = double_crossing_census(K, Lattice::face_centered_square(0.25), 3.0, 8, 60, 3);
  EXPECT_GT(coarse.flagged_fraction - fine.flagged_fraction,
            3 * std::hypot(coarse.fraction_se, fine.fraction_se));
}

TEST(Supnorm, NestedAndBounded) {
  const auto t = supnorm_statistic(Kernel::bargmann_fock(), {2.0, 4.0, 8.0}, 0.1, 20, 4);
  ASSERT_EQ(t.maxima.size(), 20u);
  for (const auto& m : t.maxima) {
    EXPECT_LE(m[0], m[1]);
    EXPECT_LE(m[1], m[2]);
  }
  for (const auto& r : t.rows) EXPECT_GT(r.ratio, 0.5);
  EXPECT_LT(t.resolution_error, 0.02);
  EXPECT_THROW(supnorm_statistic(Kernel::bargmann_fock(), {4.0}, 0.5, 4, 1), DomainError);
  EXPECT_THROW(supnorm_statistic(Kernel::bargmann_fock(), {1.0, 4.0}, 0.1, 4, 1), DomainError);
  EXPECT_THROW(supnorm_statistic(Kernel::bargmann_fock(), {4.0, 4.0}, 0.1, 4, 1), DomainError);
}

TEST(Supnorm, NestedMaximaHelper) {
  const AffineGrid g = square_grid({-2.0, -2.0}, 1.0, 5, 5);
  std::vector<double> v(g.size(), 0.0);
  v[g.index(2, 2)] = -3.0;  // origin
  v[g.index(0, 0)] = 5.0;   // corner of B_2
  const auto m = nested_box_maxima(g, v, {1.0, 2.0});
  EXPECT_EQ(m[0], 3.0);
  EXPECT_EQ(m[1], 5.0);
}

TEST(Transversality, PhiMomentAndMonotonicity) {
  const auto K = Kernel::bargmann_fock();
  const auto r = transversality_statistic(K, {1.0, 2.0, 4.0}, 0.05, 10, 8);
  EXPECT_GE(r.evaluations, 100000);
  for (const auto& m : r.minmax) {
    EXPECT_GE(m[0], m[1]);
    EXPECT_GE(m[1], m[2]);
  }
  for (std::size_t k = 0; k < r.q05.size(); ++k) {
    EXPECT_LE(r.q05[k], r.q50[k]);
    EXPECT_LE(r.q50[k], r.q95[k]);
  }
  EXPECT_LT(r.gradient_error, 1e-2);
  // Phi^a has heavy tails; compare within 3 se plus 5% for the finite-difference gradient
  const double exact = phi_moment_exact(0.5, 1.0);
  EXPECT_NEAR(r.phi_moment, exact, 3 * r.phi_moment_se + 0.05 * exact);
  EXPECT_GT(r.mu_calibrated, 0.0);
}

TEST(NearEdge, CommonZerosOfLinearFunctions) {
  const AffineGrid g = square_grid({-1.0, -1.0}, 0.1, 21, 21);
  std::vector<double> f(g.size()), q(g.size());
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const Vec2 x = g.point(i, j);
      f[g.index(i, j)] = x.x - 0.33;
      q[g.index(i, j)] = x.y + 0.27;
    }
  const auto z = common_zeros(g, f, q);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_NEAR(z[0].x, 0.33, 1e-12);
  EXPECT_NEAR(z[0].y, -0.27, 1e-12);
}

TEST(NearEdge, EdgeDirectionDistances) {
  const Patch p = enumerate(Lattice::face_centered_square(0.5), centered_box(2.0));
  const EdgeDirectionIndex h(p, {1.0, 0.0});
  EXPECT_NEAR(h.distance({0.1, 0.2}), 0.2, 1e-12);
  EXPECT_NEAR(h.distance({0.1, 0.3}), 0.2, 1e-12);
  const EdgeDirectionIndex d(p, {1.0, 1.0});
  EXPECT_NEAR(d.distance({0.25, 0.0}), 0.25 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(EdgeDirectionIndex(p, {0.0, 0.0}), DomainError);
}

TEST(NearEdge, ZeroThetaAndResolution) {
  const auto K = Kernel::bargmann_fock();
  const auto lat = Lattice::face_centered_square(0.5);
  const auto c = near_edge_critical_census(K, lat, 0.0, 2.0, {1, 0}, 0.05, 4, 1);
  EXPECT_EQ(c.mean, 0.0);
  EXPECT_THROW(near_edge_critical_census(K, lat, 0.1, 2.0, {1, 0}, 0.05, 4, 1), DomainError);
}

TEST(NearEdge, MatchesKacRice) {
  const auto K = Kernel::bargmann_fock();
  const auto c = near_edge_critical_census(K, Lattice::face_centered_square(0.5), 0.1, 3.0, {1, 0}, 0.025, 120, 9);
  EXPECT_NEAR(c.strip_fraction, 0.4, 2e-3);
  EXPECT_NEAR(c.kac_rice_mean, 0.1433 * 36 * 0.4, 0.01);
  EXPECT_NEAR(c.mean, c.kac_rice_mean, 3 * c.se + 0.05 * c.kac_rice_mean);
  EXPECT_NEAR(c.beta_hat, c.mean * 0.5 / (9.0 * 0.1), 1e-12);
}
