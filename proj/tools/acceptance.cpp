// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nodalperc/circulant.hpp"
#include "nodalperc/constants.hpp"
#include "nodalperc/coupling.hpp"
#include "nodalperc/experiments.hpp"
#include "nodalperc/nodal.hpp"
#include "nodalperc/sampler.hpp"

using namespace nodalperc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------------
Verdict square_crossing() {
  Experiment ex;
  ex.eps = 0.5;
  ex.scales = {4.0, 8.0, 16.0};
  ex.replicates = 4000;
  ex.seed = 101;
  const auto t = run(ex);
  const double z = normal_z(0.99);
  Verdict v{true, ""};
  for (const auto& r : t.rows) {
    const double band = z * std::sqrt(0.25 / r.replicates);
    const bool ok = std::abs(r.p_hat - 0.5) <= band;
    v.pass = v.pass && ok;
    v.detail += fmt("s=%g p=%.4f (band 0.5+-%.4f) ", r.scale, r.p_hat, band);
  }
  return v;
}

// 2 ---------------------------------------------------------------------------
Verdict duality() {
  long long samples = 0, exceptions = 0;
  for (double s : {4.0, 8.0}) {
    const Patch p = enumerate(Lattice::face_centered_square(0.5), centered_box(s));
    const Rect r = centered_box(s).rect();
    SamplingOptions opt;
    opt.seed = 202 + static_cast<std::uint64_t>(s);
    const auto out = replicate_outcomes(Kernel::bargmann_fock(), p, 5000, opt, [&](const Coloring& c, PercWorkspace& ws) {
      const bool a = crosses(c, Quad(r, SidePair::LeftRight), Color::Black, false, &ws).occurred;
      const bool b = crosses(c, Quad(r, SidePair::TopBottom), Color::White, false, &ws).occurred;
      return std::uint64_t{a != b};
    });
    for (auto o : out) exceptions += o == 0;
    samples += static_cast<long long>(out.size());
  }
  long long exhaustive = 0, ex_exceptions = 0;
  for (const Rect& r : {Rect{-1, 1, -1, 1}, Rect{0, 3, 0, 1}, Rect{0, 2, 0, 3}, Rect{0, 4, 0, 1}}) {
    const Patch p = enumerate(Lattice::face_centered_square(1.0), r);
    if (p.num_vertices() > 20) return {false, "exhaustive patch larger than 20 vertices"};
    PercWorkspace ws;
    std::vector<std::uint8_t> bits(p.num_vertices());
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << p.num_vertices()); ++m) {
      for (std::size_t v = 0; v < bits.size(); ++v) bits[v] = (m >> v) & 1U;
      const Coloring c(p, bits);
      const bool a = crosses(c, Quad(r, SidePair::LeftRight), Color::Black, false, &ws).occurred;
      const bool b = crosses(c, Quad(r, SidePair::TopBottom), Color::White, false, &ws).occurred;
      ex_exceptions += a == b;
      ++exhaustive;
    }
  }
  return {exceptions == 0 && ex_exceptions == 0,
          fmt("%lld sampled colourings, %lld exceptions; %lld exhaustive colourings, %lld exceptions", samples,
              exceptions, exhaustive, ex_exceptions)};
}

// 3 ---------------------------------------------------------------------------
Verdict bakounine() {
  int cases = 0, violations = 0;
  double worst_ratio = 0.0, worst_arcsine = 0.0;
  for (int d = 2; d <= 8; ++d)
    for (int m = 1; m < d; ++m)
      for (double eta : {0.05, 0.1, 0.3, 0.6}) {
        const auto bg = BlockGaussian::equicorrelated(m, d - m, 0.5, eta);
        const auto tv = tv_exact(bg, 1e-3);
        const double bound = bakounine_bound(m, d - m, eta);
        ++cases;
        violations += tv.tv > bound;
        worst_ratio = std::max(worst_ratio, tv.tv / bound);
      }
  for (double eta : {0.05, 0.1, 0.3, 0.6}) {
    const auto tv = tv_exact(BlockGaussian::equicorrelated(1, 1, 0.0, eta));
    worst_arcsine = std::max(worst_arcsine, std::abs(tv.tv - std::asin(eta) / std::numbers::pi));
  }
  return {violations == 0 && worst_arcsine < 1e-3,
          fmt("%d cases, %d above the bound (max tv/bound %.3f); max |tv - asin(eta)/pi| = %.2e", cases, violations,
              worst_ratio, worst_arcsine)};
}

// 4 ---------------------------------------------------------------------------
Verdict constants_regression() {
  const double l2 = std::numbers::ln2;
  const RswConstants r = pipeline(0.5, 0.25);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  double worst = 0.0;
  const double q1_ulps = std::abs(r.log_Q1 - (-17 * l2)) / std::numeric_limits<double>::epsilon() / (17 * l2);
  worst = std::max({worst, rel(r.log_q2, -1028 * l2), rel(r.log_q2_tilde, -860 * l2), rel(r.log_Q2, -1028 * l2),
                    rel(r.log_Q3, -3104 * l2),
                    rel(r.gamma_nu, 1.0 + std::log(1.75) / std::log(4.0 / 3.5))});
  bool mod6_ok = true;
  for (long long s = 1; s <= 12; ++s) {
    const int k = mod6_shift(s);
    mod6_ok = mod6_ok && k >= 0 && k < 6 && (s + k) % 6 == 0;
  }
  const TNuBound t = t_nu_bound(2.0, 325.0, 1.0, 0.1);
  const bool exponent_ok = t.exponent == 8.0 * gamma_nu(0.1) / 308.0;
  const TNuBound a = t_nu_bound(3.0, 325.0, 1.0, 0.1, 0.5, 0.0, 0.0625, Tower(4.0));
  const TNuBound b = t_nu_bound(6.0, 325.0, 1.0, 0.1, 0.5, 0.0, 0.0625, Tower(4.0));
  const double doubling_err =
      std::abs((b.log_bound.to_double() - a.log_bound.to_double()) - a.exponent * std::log(2.0));
  const bool log_space_ok = a.log_density_term == a.exponent * std::log(3.0) && doubling_err < 1e-13;
  return {q1_ulps <= 2.0 && worst < 1e-12 && mod6_ok && exponent_ok && log_space_ok,
          fmt("logQ1 = %.17g (%.1f ulp from -17 ln2); max rel err %.1e; mod6 table %s; t_nu exponent %s, "
              "doubling residual %.1e",
              r.log_Q1, q1_ulps, worst, mod6_ok ? "ok" : "wrong", exponent_ok ? "exact" : "inexact", doubling_err)};
}

// 5 ---------------------------------------------------------------------------
struct Moments {
  explicit Moments(std::size_t n) : n(n), sum(n * n, 0.0) {}
  void add(std::span<const double> v) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sum[i * n + j] += v[i] * v[j];
    ++count;
  }
  double max_dev(const Eigen::MatrixXd& cov) const {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        w = std::max(w, std::abs(sum[i * n + j] / count - cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    return w;
  }
  std::size_t n;
  std::vector<double> sum;
  long long count = 0;
};

Eigen::MatrixXd oracle_covariance(const Kernel& k, const std::vector<Vec2>& pts) {
  const CholeskySampler chol(k, pts);
  const Eigen::MatrixXd& L = chol.factor_matrix();
  return L * L.transpose();
}

Verdict sampler_fidelity() {
  const int n = 100000;
  const double tol = 5.0 / std::sqrt(static_cast<double>(n));
  const AffineGrid grid = square_grid({-0.9375, -0.9375}, 0.125, 16, 16);
  std::vector<std::size_t> idx;
  std::vector<Vec2> pts;
  for (int a : {0, 5, 10, 15})
    for (int b : {0, 5, 10, 15}) {
      idx.push_back(grid.index(a, b));
      pts.push_back(grid.point(a, b));
    }
  const Eigen::MatrixXd bf = oracle_covariance(Kernel::bargmann_fock(), pts);
  const Eigen::MatrixXd j0 = oracle_covariance(Kernel::bessel_wave(), pts);

  Moments mc(16), ms(16), mw(16);
  const CirculantSampler circ = make_circulant(Kernel::bargmann_fock(), grid);
  auto ws = circ.make_workspace();
  std::vector<double> f1(grid.size()), f2(grid.size()), v(16);
  for (int k = 0; k < n / 2; ++k) {
    circ.sample_pair(505, static_cast<std::uint64_t>(k), ws, f1, f2);
    for (const auto* f : {&f1, &f2}) {
      for (std::size_t i = 0; i < 16; ++i) v[i] = (*f)[idx[i]];
      mc.add(v);
    }
  }
  const TruncationBudget budget = choose_truncation(2.0, 0.05, 0.01);
  const SeriesSampler series(budget, pts);
  for (int k = 0; k < n; ++k) {
    series.draw(stream_seed(506, static_cast<std::uint64_t>(k)), v);
    ms.add(v);
  }
  for (int k = 0; k < n; ++k) mw.add(sample_wave(500, pts, stream_seed(507, static_cast<std::uint64_t>(k))).values);

  const double dc = mc.max_dev(bf), ds = ms.max_dev(bf), dw = mw.max_dev(j0);
  const double tol_s = tol + 2 * 0.05;
  return {dc <= tol && ds <= tol_s && dw <= tol,
          fmt("max |cov - oracle|: circulant %.4f (tol %.4f), series N=%d %.4f (tol %.4f), wave %.4f (tol %.4f)", dc,
              tol, budget.degree, ds, tol_s, dw, tol)};
}

// 6 ---------------------------------------------------------------------------
Verdict one_arm_decay() {
  SamplingOptions opt;
  opt.seed = 606;
  const auto t = one_arm_table(Kernel::bargmann_fock(), 0.25, 2.0, {4.0, 8.0, 16.0, 32.0}, 4000, opt);
  const auto fit = fit_one_arm(arm_points(t, 2.0), 4000, 607);
  std::string probs;
  for (const auto& r : t.rows) probs += fmt("%.4f ", r.p_hat);
  return {fit.eta_hat > 0.0 && fit.ci.lo > 0.0,
          fmt("pi(2,t) for t=4,8,16,32: %seta_hat=%.4f 95%% CI [%.4f, %.4f]", probs.c_str(), fit.eta_hat, fit.ci.lo,
              fit.ci.hi)};
}

// 7 ---------------------------------------------------------------------------
Verdict rsw_floor() {
  Experiment ex;
  ex.eps = 0.25;
  ex.scales = {4.0, 8.0, 16.0, 32.0};
  ex.replicates = 1000;
  ex.seed = 707;
  ex.event.rho = 2.0;
  const auto t = run(ex);
  double min_lo = 1.0;
  std::string rows;
  for (const auto& r : t.rows) {
    min_lo = std::min(min_lo, r.wilson.lo);
    rows += fmt("s=%g p=%.4f [%.4f,%.4f] ", r.scale, r.p_hat, r.wilson.lo, r.wilson.hi);
  }
  const bool no_collapse = t.rows.back().p_hat >= 0.5 * t.rows.front().p_hat;
  return {min_lo >= 0.05 && no_collapse, rows + fmt("min wilson_lo=%.4f", min_lo)};
}

// 8 ---------------------------------------------------------------------------
Verdict discretization_trend() {
  const std::vector<double> eps = {0.5, 0.25, 0.125};
  const std::vector<int> reps = {200, 200, 100};
  std::vector<EdgeCrossingReport> r;
  for (std::size_t i = 0; i < eps.size(); ++i)
    r.push_back(double_crossing_census(Kernel::bargmann_fock(), Lattice::face_centered_square(eps[i]), 5.0, 8, reps[i],
                                       stream_seed(808, i)));
  bool decreasing = true;
  std::string rows;
  for (std::size_t i = 0; i < r.size(); ++i) {
    rows += fmt("eps=%g frac=%.3g+-%.2g P0=%.3f [%.3f,%.3f]; ", eps[i], r[i].flagged_fraction, r[i].fraction_se,
                r[i].p_clean, r[i].p_clean_interval.lo, r[i].p_clean_interval.hi);
    if (i > 0) {
      const double gap = r[i - 1].flagged_fraction - r[i].flagged_fraction;
      decreasing = decreasing && gap > 3.0 * std::hypot(r[i - 1].fraction_se, r[i].fraction_se);
    }
  }
  const bool clean = r.back().p_clean_interval.lo >= 0.95;
  return {decreasing && clean, rows + fmt("trend %s, zero-flag lower bound %s", decreasing ? "ok" : "broken",
                                          clean ? ">= 0.95" : "< 0.95")};
}

// 9 ---------------------------------------------------------------------------
Verdict fkg_margin() {
  const Quad a({-8, 8, -8, -0.5}), b({-8, 8, 0.5, 8});
  bool ok = true;
  std::string rows;
  for (int run = 0; run < 5; ++run) {
    SamplingOptions opt;
    opt.seed = stream_seed(909, static_cast<std::uint64_t>(run));
    const auto f = fkg_check(Kernel::bargmann_fock(), 0.5, crossing_event(a), crossing_event(b), 2000, opt);
    ok = ok && f.margin >= -3.0 * f.se;
    rows += fmt("%+.2f ", f.margin_in_se);
  }
  return {ok, "margins in standard errors: " + rows};
}

// 10 --------------------------------------------------------------------------
Verdict field_scalings() {
  const Kernel bf = Kernel::bargmann_fock();
  const auto sup = supnorm_statistic(bf, {4.0, 8.0, 16.0, 32.0}, 0.1, 200, 1001);
  double lo = 1e300, hi = 0.0;
  std::string ratios;
  for (const auto& r : sup.rows) {
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
    ratios += fmt("%.3f ", r.ratio);
  }
  const bool sup_ok = hi / lo < 2.0;

  const Lattice coarse = Lattice::face_centered_square(0.5), fine = Lattice::face_centered_square(0.25);
  const auto c1 = near_edge_critical_census(bf, coarse, 0.05, 4.0, {1, 0}, 0.0125, 200, 1002);
  const auto c2 = near_edge_critical_census(bf, coarse, 0.10, 4.0, {1, 0}, 0.0125, 200, 1003);
  const auto c3 = near_edge_critical_census(bf, fine, 0.05, 4.0, {1, 0}, 0.0125, 200, 1004);
  const double theta_dev = std::abs(c2.mean - 2 * c1.mean) / std::hypot(c2.se, 2 * c1.se);
  const double eps_dev = std::abs(c3.mean - 2 * c1.mean) / std::hypot(c3.se, 2 * c1.se);
  return {sup_ok && theta_dev <= 3.0 && eps_dev <= 3.0,
          fmt("sup/sqrt(ln s) over s=4..32: %s(max/min %.3f); near-edge means %.3f (theta .05), %.3f (theta .1), "
              "%.3f (eps .25): theta-linearity %.2f sigma, 1/eps-linearity %.2f sigma",
              ratios.c_str(), hi / lo, c1.mean, c2.mean, c3.mean, theta_dev, eps_dev)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nodalperc acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria (1-10)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"square crossing = 1/2", square_crossing},
      {"exact duality", duality},
      {"decorrelation TV bound", bakounine},
      {"constants regression", constants_regression},
      {"sampler fidelity", sampler_fidelity},
      {"one-arm decay", one_arm_decay},
      {"RSW floor", rsw_floor},
      {"discretization validity trend", discretization_trend},
      {"FKG margin", fkg_margin},
      {"field-statistics scalings", field_scalings},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::printf("%s %2d %s: %s (%.0f s)\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), v.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
