#ifndef NODALPERC_COUPLING_HPP
#define NODALPERC_COUPLING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/erf.hpp>

#include "nodalperc/errors.hpp"
#include "nodalperc/rng.hpp"
#include "nodalperc/stats.hpp"

namespace nodalperc {

/// Centred Gaussian vector (X1, X2) with unit-variance blocks of sizes m and n.
/// The companion law Y has the same blocks but makes them independent.
class BlockGaussian {
 public:
  BlockGaussian(Eigen::MatrixXd sigma1, Eigen::MatrixXd sigma2, Eigen::MatrixXd sigma12)
      : s1_(std::move(sigma1)), s2_(std::move(sigma2)), s12_(std::move(sigma12)) {
    if (s1_.rows() < 1 || s2_.rows() < 1 || s1_.rows() != s1_.cols() || s2_.rows() != s2_.cols())
      throw ValidationError("block gaussian: blocks must be nonempty square matrices");
    if (s12_.rows() != s1_.rows() || s12_.cols() != s2_.rows())
      throw ValidationError("block gaussian: cross block must be m x n");
    check_block(s1_, "sigma1");
    check_block(s2_, "sigma2");
    const Eigen::MatrixXd full = joint();
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(full, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
    if (lmin < -1e-10)
      throw DomainError("block gaussian: joint covariance is not positive semidefinite (min eigenvalue " +
                        std::to_string(lmin) + ")");
  }

  /// Within-block correlation `within` everywhere off the diagonal, cross
  /// correlation `eta` in every entry of the cross block.
  static BlockGaussian equicorrelated(int m, int n, double within, double eta) {
    auto block = [within](int k) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Constant(k, k, within);
      b.diagonal().setOnes();
      return b;
    };
    return BlockGaussian(block(m), block(n), Eigen::MatrixXd::Constant(m, n, eta));
  }

  int m() const { return static_cast<int>(s1_.rows()); }
  int n() const { return static_cast<int>(s2_.rows()); }
  int dim() const { return m() + n(); }
  const Eigen::MatrixXd& sigma1() const { return s1_; }
  const Eigen::MatrixXd& sigma2() const { return s2_; }
  const Eigen::MatrixXd& sigma12() const { return s12_; }
  double eta() const { return s12_.size() == 0 ? 0.0 : s12_.cwiseAbs().maxCoeff(); }

  Eigen::MatrixXd joint() const {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dim(), dim());
    full.topLeftCorner(m(), m()) = s1_;
    full.bottomRightCorner(n(), n()) = s2_;
    full.topRightCorner(m(), n()) = s12_;
    full.bottomLeftCorner(n(), m()) = s12_.transpose();
    return full;
  }

  /// Same law with coordinate `i` negated.
  BlockGaussian flipped(int i) const {
    Eigen::MatrixXd full = joint();
    full.row(i) *= -1.0;
    full.col(i) *= -1.0;
    return BlockGaussian(full.topLeftCorner(m(), m()), full.bottomRightCorner(n(), n()),
                         full.topRightCorner(m(), n()));
  }

 private:
  static void check_block(const Eigen::MatrixXd& b, const char* name) {
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      if (std::abs(b(i, i) - 1.0) > 1e-12) throw ValidationError(std::string("block gaussian: diagonal of ") + name + " must be 1");
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ValidationError(std::string("block gaussian: ") + name + " must be symmetric");
  }

  Eigen::MatrixXd s1_, s2_, s12_;
};

// ---------------------------------------------------------------------------
// Orthant probabilities
// ---------------------------------------------------------------------------

struct OrthantValue {
  double value = 0.0;
  double error = 0.0;  // three standard errors over random shifts; 0 for closed forms
};

struct OrthantOptions {
  int shifts = 12;
  int initial_points = 256;     // lattice points per shift, doubled until converged
  int max_points = 1 << 15;
  double tolerance = 1e-4;      // target error per orthant
  std::uint64_t seed = 0x5eedULL;
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
inline double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p, FastPolicy());
}

/// Separation-of-variables integrand for P[X > 0 componentwise], X ~ N(0, L L^T),
/// evaluated at w in [0,1)^{d-1}.
inline double sov_integrand(const Eigen::MatrixXd& L, const double* w, double* y) {
  const auto d = L.rows();
  double f = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) sum += L(i, j) * y[j];
    double lo;  // P[component i <= 0 | previous]
    if (L(i, i) > 1e-12) {
      lo = normal_cdf(-sum / L(i, i));
    } else {
      lo = sum > 0.0 ? 0.0 : 1.0;
    }
    f *= 1.0 - lo;
    if (f <= 0.0) return 0.0;
    if (i + 1 < d) {
      const double u = std::clamp(lo + w[i] * (1.0 - lo), 1e-300, 1.0 - 1e-16);
      y[i] = normal_quantile(u);
    }
  }
  return f;
}

/// Lower Cholesky factor that tolerates semidefinite input (zero pivots are kept at 0).
inline Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& c) {
  const auto d = c.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double diag = c(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (diag <= 1e-12) continue;  // column stays zero
    L(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double v = c(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / L(j, j);
    }
  }
  return L;
}

/// Cholesky factor of the correlation matrix after reordering the variables so
/// that, at each step, the coordinate least likely to be positive given the
/// earlier ones (at their conditional truncated means) comes first.
inline Eigen::MatrixXd prioritized_cholesky(Eigen::MatrixXd c) {
  const auto d = c.rows();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> y(d, 0.0);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index best = i;
    double best_p = 2.0;
    for (Eigen::Index j = i; j < d; ++j) {
      double var = c(j, j), mu = 0.0;
      for (Eigen::Index k = 0; k < i; ++k) {
        var -= L(j, k) * L(j, k);
        mu += L(j, k) * y[k];
      }
      const double p = var > 1e-12 ? normal_cdf(mu / std::sqrt(var)) : (mu > 0.0 ? 1.0 : 0.0);
      if (p < best_p) {
        best_p = p;
        best = j;
      }
    }
    if (best != i) {
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      L.row(i).swap(L.row(best));
    }
    double diag = c(i, i), mu = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) {
      diag -= L(i, k) * L(i, k);
      mu += L(i, k) * y[k];
    }
    if (diag > 1e-12) {
      L(i, i) = std::sqrt(diag);
      for (Eigen::Index r = i + 1; r < d; ++r) {
        double v = c(r, i);
        for (Eigen::Index k = 0; k < i; ++k) v -= L(r, k) * L(i, k);
        L(r, i) = v / L(i, i);
      }
      // mean of a standard normal truncated to (alpha, infinity)
      const double alpha = -mu / L(i, i);
      const double tail = std::max(1.0 - normal_cdf(alpha), 1e-300);
      y[i] = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * std::numbers::pi) / tail;
    } else {
      y[i] = 0.0;
    }
  }
  return L;
}

}  // namespace detail

/// Randomized lattice rule for P[X_i > 0 for all i], X centred Gaussian with
/// correlation matrix `corr`. Closed forms up to dimension 3 (every shift then
/// reports the exact value). Points are added incrementally, so refining from
/// N to 2N points costs N integrand evaluations per shift.
class OrthantRule {
 public:
  OrthantRule(const Eigen::MatrixXd& corr, int shifts, std::uint64_t seed) : d_(corr.rows()), sums_(shifts, 0.0) {
    if (shifts < 2) throw DomainError("orthant rule: need at least 2 shifts");
    constexpr double pi = std::numbers::pi;
    auto as = [&](int i, int j) { return std::asin(std::clamp(corr(i, j), -1.0, 1.0)); };
    if (d_ <= 3) {
      exact_ = d_ == 0 ? 1.0 : d_ == 1 ? 0.5 : d_ == 2 ? 0.25 + as(0, 1) / (2 * pi)
                                                      : std::max(0.0, 0.125 + (as(0, 1) + as(0, 2) + as(1, 2)) / (4 * pi));
      return;
    }
    // Richtmyer generators: square roots of the first primes.
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (d_ - 1 > static_cast<Eigen::Index>(std::size(primes)))
      throw SizeError("orthant_probability: dimension too large");
    L_ = detail::prioritized_cholesky(corr);
    gen_.resize(d_ - 1);
    for (Eigen::Index k = 0; k + 1 < d_; ++k) gen_[k] = std::sqrt(static_cast<double>(primes[k]));
    Engine eng = make_engine(seed, static_cast<std::uint64_t>(d_));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    shifts_.assign(shifts, std::vector<double>(d_ - 1));
    for (auto& sh : shifts_)
      for (auto& v : sh) v = unif(eng);
  }

  bool exact() const { return d_ <= 3; }
  long long points() const { return done_; }

  /// Extends every shift to `target` lattice points.
  void refine(long long target) {
    if (exact() || target <= done_) return;
    std::vector<double> w(d_ - 1), y(d_);
    for (std::size_t r = 0; r < shifts_.size(); ++r) {
      for (long long k = done_ + 1; k <= target; ++k) {
        for (Eigen::Index i = 0; i + 1 < d_; ++i) {
          double t = static_cast<double>(k) * gen_[i] + shifts_[r][i];
          w[i] = t - std::floor(t);
        }
        const double a = detail::sov_integrand(L_, w.data(), y.data());
        for (auto& t : w) t = 1.0 - t;
        sums_[r] += 0.5 * (a + detail::sov_integrand(L_, w.data(), y.data()));
      }
    }
    done_ = target;
  }

  /// Estimate from shift r alone.
  double shift_value(std::size_t r) const { return exact() ? exact_ : sums_[r] / static_cast<double>(done_); }
  std::size_t shifts() const { return sums_.size(); }

  OrthantValue value() const {
    if (exact()) return {exact_, 0.0};
    const double n = static_cast<double>(shifts());
    double mean = 0.0;
    for (std::size_t r = 0; r < shifts(); ++r) mean += shift_value(r) / n;
    double var = 0.0;
    for (std::size_t r = 0; r < shifts(); ++r) var += std::pow(shift_value(r) - mean, 2);
    var /= n * (n - 1.0);
    return {mean, 3.0 * std::sqrt(var)};
  }

 private:
  Eigen::Index d_;
  double exact_ = 0.0;
  Eigen::MatrixXd L_;
  std::vector<double> gen_;
  std::vector<std::vector<double>> shifts_;
  std::vector<double> sums_;
  long long done_ = 0;
};

/// P[X_i > 0 for all i] for a centred Gaussian with correlation matrix `corr`.
/// Closed forms up to dimension 3, randomized lattice rule beyond.
inline OrthantValue orthant_probability(const Eigen::MatrixXd& corr, const OrthantOptions& opt = {}) {
  OrthantRule rule(corr, opt.shifts, opt.seed);
  if (rule.exact()) return rule.value();
  OrthantValue out;
  for (long long target = opt.initial_points;; target *= 2) {
    rule.refine(target);
    out = rule.value();
    if (out.error <= opt.tolerance || target * 2 > opt.max_points) break;
  }
  return out;
}

/// P[sign(X) = pattern] where bit i of `pattern` set means X_i > 0.
inline OrthantValue sign_pattern_probability(const Eigen::MatrixXd& corr, unsigned pattern,
                                             const OrthantOptions& opt = {}) {
  const auto d = corr.rows();
  Eigen::VectorXd s(d);
  for (Eigen::Index i = 0; i < d; ++i) s(i) = (pattern >> i) & 1U ? 1.0 : -1.0;
  return orthant_probability(s.asDiagonal() * corr * s.asDiagonal(), opt);
}

/// Full table of sign-pattern probabilities, using the symmetry p(s) = p(-s).
inline std::vector<OrthantValue> sign_law(const Eigen::MatrixXd& corr, const OrthantOptions& opt = {}) {
  const auto d = static_cast<unsigned>(corr.rows());
  const unsigned count = 1U << d;
  const unsigned mask = count - 1U;
  std::vector<OrthantValue> law(count);
  for (unsigned p = 0; p < count; ++p) {
    if (p > (p ^ mask)) {
      law[p] = law[p ^ mask];
      continue;
    }
    law[p] = sign_pattern_probability(corr, p, opt);
  }
  return law;
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

inline constexpr int kTvExactMaxDim = 12;

struct TvExact {
  double tv = 0.0;
  double error = 0.0;     // bound on |tv - true value| from the quadrature errors
  bool converged = true;  // false if the point cap was hit before reaching the tolerance
  int points = 0;         // lattice points per shift in the last pass
};

/// d_TV between the sign laws of X and of the independent-blocks vector Y.
/// Pattern bits: the low m bits belong to block 1, the high n bits to block 2.
/// Every orthant keeps its own lattice rule; all rules are doubled together
/// until the error of the TV estimate fits. The error is three standard errors,
/// over the random shifts, of the per-shift sum of (pX - pY) signed like the
/// pooled differences, i.e. of the TV functional linearised at the estimate.
inline TvExact tv_exact(const BlockGaussian& bg, double tolerance = 1e-3, int max_points = 1 << 14) {
  if (bg.dim() > kTvExactMaxDim)
    throw SizeError("tv_exact: m+n = " + std::to_string(bg.dim()) + " exceeds 12; use tv_monte_carlo");
  if (!(tolerance > 0.0)) throw DomainError("tv_exact: tolerance must be positive");
  if (bg.sigma12().isZero(0.0)) return {};

  const OrthantOptions base;
  // Rules for half of the patterns; p(s) = p(-s) gives the rest.
  auto make_rules = [&](const Eigen::MatrixXd& corr) {
    const auto d = static_cast<unsigned>(corr.rows());
    const unsigned mask = (1U << d) - 1U;
    std::vector<OrthantRule> rules;
    for (unsigned p = 0; p <= mask; ++p) {
      const unsigned q = std::min(p, p ^ mask);
      Eigen::VectorXd sg(d);
      for (unsigned i = 0; i < d; ++i) sg(i) = (q >> i) & 1U ? 1.0 : -1.0;
      if (q == p) rules.emplace_back(sg.asDiagonal() * corr * sg.asDiagonal(), base.shifts, base.seed);
    }
    return rules;
  };
  auto rule_index = [](unsigned p, unsigned d) {
    const unsigned mask = (1U << d) - 1U;
    return std::min(p, p ^ mask);  // rules are stored for q with q <= q ^ mask, in increasing order
  };
  const unsigned m = static_cast<unsigned>(bg.m()), n = static_cast<unsigned>(bg.n()), d = m + n;
  auto rx = make_rules(bg.joint());
  auto r1 = make_rules(bg.sigma1());
  auto r2 = make_rules(bg.sigma2());
  // Map each pattern to the position of its rule.
  auto positions = [&](unsigned dim) {
    const unsigned mask = (1U << dim) - 1U;
    std::vector<int> pos(mask + 1, -1);
    int next = 0;
    for (unsigned p = 0; p <= mask; ++p)
      if (rule_index(p, dim) == p) pos[p] = next++;
    for (unsigned p = 0; p <= mask; ++p) pos[p] = pos[rule_index(p, dim)];
    return pos;
  };
  const auto px = positions(d), p1 = positions(m), p2 = positions(n);
  const std::size_t shifts = static_cast<std::size_t>(base.shifts);
  const unsigned count = 1U << d;

  TvExact out;
  for (int points = 256;; points *= 2) {
    for (auto* rs : {&rx, &r1, &r2})
      for (auto& r : *rs) r.refine(points);
    std::vector<double> diff(count);
    out = {};
    out.points = points;
    for (unsigned p = 0; p < count; ++p) {
      const double py = r1[p1[p & ((1U << m) - 1U)]].value().value * r2[p2[p >> m]].value().value;
      diff[p] = rx[px[p]].value().value - py;
      out.tv += std::abs(diff[p]);
    }
    out.tv = std::clamp(0.5 * out.tv, 0.0, 1.0);
    std::vector<double> per_shift(shifts, 0.0);
    for (std::size_t r = 0; r < shifts; ++r)
      for (unsigned p = 0; p < count; ++p) {
        const double dx = rx[px[p]].shift_value(r) -
                          r1[p1[p & ((1U << m) - 1U)]].shift_value(r) * r2[p2[p >> m]].shift_value(r);
        per_shift[r] += 0.5 * (diff[p] >= 0.0 ? dx : -dx);
      }
    const MeanSe ms = mean_se(per_shift);
    out.error = 3.0 * ms.se;
    if (out.error <= tolerance) break;
    if (points * 2 > max_points) {
      out.converged = false;
      break;
    }
  }
  return out;
}

struct TvEstimate {
  double estimate = 0.0;
  // Sum over patterns of the standard deviations of the frequency differences,
  // halved. The plug-in estimator has an upward bias of this order, so it is
  // the scale used for "within 3 standard errors" comparisons.
  double std_error = 0.0;
  long long samples = 0;
};

/// Plug-in TV from empirical sign-pattern frequencies. X is drawn jointly; Y
/// reuses the first block of X and pairs it with an independent second block.
inline TvEstimate tv_monte_carlo(const BlockGaussian& bg, long long samples, std::uint64_t seed) {
  if (samples < 1) throw DomainError("tv_monte_carlo: samples must be positive");
  if (bg.dim() > 24) throw SizeError("tv_monte_carlo: m+n > 24 makes the pattern table too large");
  const int d = bg.dim(), m = bg.m(), n = bg.n();
  const Eigen::MatrixXd L = detail::semidefinite_cholesky(bg.joint());
  const Eigen::MatrixXd L2 = detail::semidefinite_cholesky(bg.sigma2());
  const std::size_t count = std::size_t{1} << d;
  std::vector<long long> cx(count, 0), cy(count, 0);

  Engine eng = make_engine(seed, 0);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(d), x(d), z2(n), x2(n);
  for (long long s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) z(i) = normal(eng);
    for (int i = 0; i < n; ++i) z2(i) = normal(eng);
    x.noalias() = L.triangularView<Eigen::Lower>() * z;
    x2.noalias() = L2.triangularView<Eigen::Lower>() * z2;
    std::size_t px = 0, py = 0;
    for (int i = 0; i < d; ++i)
      if (x(i) > 0.0) px |= std::size_t{1} << i;
    py = px & ((std::size_t{1} << m) - 1);
    for (int i = 0; i < n; ++i)
      if (x2(i) > 0.0) py |= std::size_t{1} << (m + i);
    ++cx[px];
    ++cy[py];
  }
  TvEstimate out;
  out.samples = samples;
  const double N = static_cast<double>(samples);
  for (std::size_t p = 0; p < count; ++p) {
    const double a = static_cast<double>(cx[p]) / N, b = static_cast<double>(cy[p]) / N;
    out.estimate += std::abs(a - b);
    out.std_error += std::sqrt((a * (1 - a) + b * (1 - b)) / N);
  }
  out.estimate *= 0.5;
  out.std_error *= 0.5;
  return out;
}

inline constexpr double kBakounineC = 6.964404506368993;  // 2^{14/5}

/// C (m+n)^{8/5} eta^{1/5}, clamped to 1.
inline double bakounine_bound(int m, int n, double eta) {
  if (m < 1 || n < 1) throw DomainError("bakounine_bound: block sizes must be positive");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("bakounine_bound: eta must lie in [0,1]");
  if (eta == 0.0) return 0.0;
  return std::min(1.0, kBakounineC * std::pow(m + n, 1.6) * std::pow(eta, 0.2));
}

/// Same quantity without the clamp.
inline double bakounine_bound_raw(int m, int n, double eta) {
  if (eta <= 0.0) return 0.0;
  return kBakounineC * std::pow(m + n, 1.6) * std::pow(eta, 0.2);
}

}  // namespace nodalperc

#endif  // NODALPERC_COUPLING_HPP
