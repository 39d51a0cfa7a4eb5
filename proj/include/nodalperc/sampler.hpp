#ifndef NODALPERC_SAMPLER_HPP
#define NODALPERC_SAMPLER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "nodalperc/bessel.hpp"
#include "nodalperc/errors.hpp"
#include "nodalperc/field_sample.hpp"
#include "nodalperc/kernels.hpp"
#include "nodalperc/rng.hpp"

namespace nodalperc {

// ---------------------------------------------------------------------------
// Exact oracle: Cholesky factor of the full covariance matrix.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCholeskyMaxPoints = 4096;
inline constexpr double kCholeskyJitter = 1e-10;

/// Factors K(x_i - x_j) once and draws any number of exact samples.
class CholeskySampler {
 public:
  CholeskySampler(const Kernel& kernel, std::vector<Vec2> points) : points_(std::move(points)) {
    const auto n = static_cast<Eigen::Index>(points_.size());
    if (points_.size() > kCholeskyMaxPoints)
      throw SizeError("cholesky sampler: " + std::to_string(points_.size()) + " points exceeds 4096");
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) cov(i, j) = cov(j, i) = kernel(points_[i] - points_[j]);
    factor_ = factor(cov);
  }

  /// Factors an explicit covariance matrix (no kernel, no points).
  explicit CholeskySampler(const Eigen::MatrixXd& cov) : factor_(factor(cov)) {}

  std::size_t size() const { return static_cast<std::size_t>(factor_.rows()); }
  const Eigen::MatrixXd& factor_matrix() const { return factor_; }
  const std::vector<Vec2>& points() const { return points_; }

  /// Writes L z for fresh standard normals z drawn from `eng`.
  void draw(Engine& eng, std::span<double> out) const {
    const auto n = factor_.rows();
    Eigen::VectorXd z(n);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(eng);
    Eigen::Map<Eigen::VectorXd>(out.data(), n).noalias() = factor_.triangularView<Eigen::Lower>() * z;
  }

  FieldSample sample(std::uint64_t seed) const {
    FieldSample s;
    s.points = points_;
    s.values.resize(size());
    s.seed = seed;
    s.method = SampleMethod::Cholesky;
    Engine eng = make_engine(seed);
    draw(eng, s.values);
    return s;
  }

 private:
  static Eigen::MatrixXd factor(Eigen::MatrixXd cov) {
    const auto n = cov.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      cov.diagonal().array() += kCholeskyJitter;
      llt.compute(cov);
      if (llt.info() != Eigen::Success)
        throw DegenerateError("covariance matrix is not positive definite within jitter 1e-10");
    }
    Eigen::MatrixXd l = llt.matrixL();
    // Pivots at the jitter scale mean the configuration is rank deficient
    // (duplicated points and the like), not merely ill-conditioned.
    for (Eigen::Index i = 0; i < n; ++i)
      if (l(i, i) * l(i, i) < 10.0 * kCholeskyJitter)
        throw DegenerateError("degenerate configuration: covariance pivot " + std::to_string(i) +
                              " vanishes (duplicated or collinear-limit points?)");
    return l;
  }

  std::vector<Vec2> points_;
  Eigen::MatrixXd factor_;
};

inline FieldSample sample_cholesky(const Kernel& kernel, const std::vector<Vec2>& points, std::uint64_t seed) {
  return CholeskySampler(kernel, points).sample(seed);
}

// ---------------------------------------------------------------------------
// Truncated Bargmann-Fock series.
// ---------------------------------------------------------------------------

/// Degree N such that P[sup-norm of the discarded tail on the disc of radius R > eps] <= delta.
struct TruncationBudget {
  double radius = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  int degree = 0;

  /// log of e^{16R^2} / (eps^2 4^N)
  double log_tail_bound() const {
    return 16.0 * radius * radius - 2.0 * std::log(eps) - degree * std::log(4.0);
  }
};

inline TruncationBudget choose_truncation(double radius, double eps, double delta) {
  if (!(radius >= 0.0) || !(eps > 0.0) || !(delta > 0.0 && delta <= 1.0))
    throw DomainError("choose_truncation: need R >= 0, eps > 0, 0 < delta <= 1");
  const double need = 16.0 * radius * radius - 2.0 * std::log(eps) - std::log(delta);
  int n = std::max(0, static_cast<int>(std::ceil(need / std::log(4.0))));
  TruncationBudget b{radius, eps, delta, n};
  // guard against ceil landing one short through rounding
  while (b.log_tail_bound() > std::log(delta) + 1e-12) b.degree = ++n;
  while (n > 0) {
    TruncationBudget lower = b;
    lower.degree = n - 1;
    if (lower.log_tail_bound() > std::log(delta) + 1e-12) break;
    b = lower;
    --n;
  }
  return b;
}

namespace detail {

/// Weighted sum over a triangular coefficient array a_ij (i + j <= n), where column j
/// is drawn from stream j of the seed. Columns whose weights vanish at every point
/// are not drawn, which leaves the other columns unchanged.
class TriangularSeries {
 public:
  TriangularSeries() = default;
  TriangularSeries(int n, std::size_t points) : n_(n), points_(points), col_used_(n + 1, 0) {
    col_offset_.resize(n + 2);
    col_offset_[0] = 0;
    for (int j = 0; j <= n; ++j) col_offset_[j + 1] = col_offset_[j] + static_cast<std::size_t>(n - j + 1);
    weights_.assign(points * col_offset_[n + 1], 0.0);
  }

  double& weight(std::size_t p, int i, int j) { return weights_[p * col_offset_[n_ + 1] + col_offset_[j] + i]; }
  void mark_column(int j) { col_used_[j] = 1; }
  int degree() const { return n_; }

  void draw(std::uint64_t seed, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> coef;
    std::normal_distribution<double> normal;
    const std::size_t stride = col_offset_[n_ + 1];
    for (int j = 0; j <= n_; ++j) {
      if (!col_used_[j]) continue;
      Engine eng = make_engine(seed, static_cast<std::uint64_t>(j));
      coef.resize(n_ - j + 1);
      for (double& c : coef) c = normal(eng);
      for (std::size_t p = 0; p < points_; ++p) {
        const double* w = weights_.data() + p * stride + col_offset_[j];
        double acc = 0.0;
        for (std::size_t i = 0; i < coef.size(); ++i) acc += coef[i] * w[i];
        out[p] += acc;
      }
    }
  }

 private:
  int n_ = 0;
  std::size_t points_ = 0;
  std::vector<std::size_t> col_offset_;
  std::vector<std::uint8_t> col_used_;
  std::vector<double> weights_;
};

/// (log |t|^k / sqrt(k!), sign) for k = 0..n; sign 0 marks an exact zero.
inline void log_monomials(double t, int n, std::vector<double>& log_mag, std::vector<int>& sign) {
  log_mag.assign(n + 1, 0.0);
  sign.assign(n + 1, 1);
  const double lt = std::log(std::abs(t));
  for (int k = 1; k <= n; ++k) {
    if (t == 0.0) {
      sign[k] = 0;
      continue;
    }
    log_mag[k] = k * lt - 0.5 * std::lgamma(k + 1.0);
    sign[k] = (t < 0.0 && k % 2 == 1) ? -1 : 1;
  }
}

}  // namespace detail

/// exp(-|x|^2/2) sum_{i+j<=N} a_ij x1^i x2^j / sqrt(i! j!) at fixed points. Each
/// weight is formed in log space together with the Gaussian factor, so every weight
/// has magnitude <= 1 whatever N and R are.
class SeriesSampler {
 public:
  SeriesSampler(const TruncationBudget& budget, std::vector<Vec2> points)
      : budget_(budget), points_(std::move(points)), series_(budget.degree, points_.size()) {
    for (const Vec2& p : points_)
      if (norm(p) > budget.radius * (1.0 + 1e-12))
        throw DomainError("sample_bf_series: point outside the disc of radius " + std::to_string(budget.radius));
    const int n = budget.degree;
    std::vector<double> lx, ly;
    std::vector<int> sx, sy;
    for (std::size_t p = 0; p < points_.size(); ++p) {
      detail::log_monomials(points_[p].x, n, lx, sx);
      detail::log_monomials(points_[p].y, n, ly, sy);
      const double gauss = -0.5 * dot(points_[p], points_[p]);
      for (int j = 0; j <= n; ++j) {
        if (sy[j] == 0) continue;
        series_.mark_column(j);
        for (int i = 0; i <= n - j; ++i)
          if (sx[i] != 0) series_.weight(p, i, j) = sx[i] * sy[j] * std::exp(lx[i] + ly[j] + gauss);
      }
    }
  }

  const std::vector<Vec2>& points() const { return points_; }
  void draw(std::uint64_t seed, std::span<double> out) const { series_.draw(seed, out); }

  FieldSample sample(std::uint64_t seed) const {
    FieldSample s{points_, std::vector<double>(points_.size()), seed, SampleMethod::Series, budget_.degree};
    draw(seed, s.values);
    return s;
  }

 private:
  TruncationBudget budget_;
  std::vector<Vec2> points_;
  detail::TriangularSeries series_;
};

inline FieldSample sample_bf_series(const TruncationBudget& budget, const std::vector<Vec2>& points,
                                    std::uint64_t seed) {
  return SeriesSampler(budget, points).sample(seed);
}

// ---------------------------------------------------------------------------
// Rescaled Kostlan polynomials.
// ---------------------------------------------------------------------------

/// Degree-d Kostlan polynomial sum a_ij sqrt(d!/((d-i-j)! i! j!)) y1^i y2^j at y = x/sqrt(d),
/// divided by its standard deviation (1 + |x|^2/d)^{d/2}. The variance is then 1 at every
/// point and the correlation tends to exp(-|x-y|^2/2) as d grows. At x = 0 the value is a_00.
class KostlanSampler {
 public:
  KostlanSampler(int degree, std::vector<Vec2> points) : degree_(degree), points_(std::move(points)) {
    if (degree < 1) throw DomainError("sample_kostlan: degree must be >= 1");
    const int d = degree;
    series_ = detail::TriangularSeries(d, points_.size());
    const double sd = std::sqrt(static_cast<double>(d));
    std::vector<double> log_falling(d + 1);
    for (int k = 0; k <= d; ++k) log_falling[k] = 0.5 * (std::lgamma(d + 1.0) - std::lgamma(d - k + 1.0));
    std::vector<double> lx, ly;
    std::vector<int> sx, sy;
    for (std::size_t p = 0; p < points_.size(); ++p) {
      detail::log_monomials(points_[p].x / sd, d, lx, sx);
      detail::log_monomials(points_[p].y / sd, d, ly, sy);
      const double lw = -0.5 * d * std::log1p(dot(points_[p], points_[p]) / d);
      for (int j = 0; j <= d; ++j) {
        if (sy[j] == 0) continue;
        series_.mark_column(j);
        for (int i = 0; i <= d - j; ++i)
          if (sx[i] != 0) series_.weight(p, i, j) = sx[i] * sy[j] * std::exp(log_falling[i + j] + lx[i] + ly[j] + lw);
      }
    }
  }

  const std::vector<Vec2>& points() const { return points_; }
  void draw(std::uint64_t seed, std::span<double> out) const { series_.draw(seed, out); }

  FieldSample sample(std::uint64_t seed) const {
    FieldSample s{points_, std::vector<double>(points_.size()), seed, SampleMethod::Kostlan, degree_};
    draw(seed, s.values);
    return s;
  }

 private:
  int degree_;
  std::vector<Vec2> points_;
  detail::TriangularSeries series_;
};

inline FieldSample sample_kostlan(int degree, const std::vector<Vec2>& points, std::uint64_t seed) {
  return KostlanSampler(degree, points).sample(seed);
}

// ---------------------------------------------------------------------------
// Random plane-wave superposition.
// ---------------------------------------------------------------------------

/// sqrt(2/M) sum_k cos(<x,u_k> + phi_k), u_k uniform on the circle, phi_k uniform.
/// Covariance is J0(|x-y|) for every M; the law is Gaussian only as M grows.
inline FieldSample sample_wave(int count, const std::vector<Vec2>& points, std::uint64_t seed) {
  if (count < 1) throw DomainError("sample_wave: count must be >= 1");
  Engine eng = make_engine(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<Vec2> dirs(count);
  std::vector<double> phases(count);
  for (int k = 0; k < count; ++k) {
    const double t = angle(eng);
    dirs[k] = {std::cos(t), std::sin(t)};
    phases[k] = angle(eng);
  }
  FieldSample s;
  s.points = points;
  s.values.resize(points.size());
  s.seed = seed;
  s.method = SampleMethod::WaveSuperposition;
  s.method_parameter = count;
  const double amp = std::sqrt(2.0 / count);
  for (std::size_t p = 0; p < points.size(); ++p) {
    double acc = 0.0;
    for (int k = 0; k < count; ++k) acc += std::cos(dot(points[p], dirs[k]) + phases[k]);
    s.values[p] = amp * acc;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Fourier-Bessel expansion of the J0 field.
// ---------------------------------------------------------------------------

/// a_0 J_0(r) + sqrt(2) sum_{m=1..M} J_m(r) (b_m cos m phi + c_m sin m phi) in polar
/// coordinates about `center`. By Graf's addition theorem the covariance is exactly
/// J0(|x - y|) up to the neglected orders, whose variance is below `tail` at every point.
class BesselSeriesSampler {
 public:
  BesselSeriesSampler(std::vector<Vec2> points, double tail = 1e-12) : points_(std::move(points)) {
    if (!(tail > 0.0)) throw DomainError("bessel series: tail tolerance must be positive");
    Vec2 c{0.0, 0.0};
    for (const Vec2& p : points_) c = c + p;
    if (!points_.empty()) c = (1.0 / static_cast<double>(points_.size())) * c;
    center_ = c;
    double rmax = 0.0;
    for (const Vec2& p : points_) rmax = std::max(rmax, norm(p - c));
    // Orders beyond r + O(r^{1/3}) are negligible; search a generous range.
    const int cap = static_cast<int>(rmax + 20.0 * std::cbrt(rmax + 1.0) + 40.0);
    const std::vector<double> jr = bessel_jn_sequence(rmax, cap);
    double captured = jr[0] * jr[0];
    order_ = 0;
    while (order_ < cap && 1.0 - captured > tail) {
      ++order_;
      captured += 2.0 * jr[order_] * jr[order_];
    }
    const std::size_t stride = 2 * static_cast<std::size_t>(order_) + 1;
    weights_.resize(points_.size() * stride);
    for (std::size_t p = 0; p < points_.size(); ++p) {
      const Vec2 d = points_[p] - c;
      const double r = norm(d), phi = std::atan2(d.y, d.x);
      const std::vector<double> j = bessel_jn_sequence(r, order_);
      double* w = weights_.data() + p * stride;
      w[0] = j[0];
      for (int m = 1; m <= order_; ++m) {
        w[2 * m - 1] = std::numbers::sqrt2 * j[m] * std::cos(m * phi);
        w[2 * m] = std::numbers::sqrt2 * j[m] * std::sin(m * phi);
      }
    }
  }

  int order() const { return order_; }
  Vec2 center() const { return center_; }
  const std::vector<Vec2>& points() const { return points_; }

  void draw(std::uint64_t seed, std::span<double> out) const {
    const std::size_t stride = 2 * static_cast<std::size_t>(order_) + 1;
    std::vector<double> coef(stride);
    Engine eng = make_engine(seed);
    std::normal_distribution<double> normal;
    for (double& a : coef) a = normal(eng);
    for (std::size_t p = 0; p < points_.size(); ++p) {
      const double* w = weights_.data() + p * stride;
      double acc = 0.0;
      for (std::size_t k = 0; k < stride; ++k) acc += coef[k] * w[k];
      out[p] = acc;
    }
  }

  FieldSample sample(std::uint64_t seed) const {
    FieldSample s{points_, std::vector<double>(points_.size()), seed, SampleMethod::BesselSeries, order_};
    draw(seed, s.values);
    return s;
  }

 private:
  std::vector<Vec2> points_;
  Vec2 center_;
  int order_ = 0;
  std::vector<double> weights_;
};

inline FieldSample sample_bessel_series(const std::vector<Vec2>& points, std::uint64_t seed) {
  return BesselSeriesSampler(points).sample(seed);
}

}  // namespace nodalperc

#endif  // NODALPERC_SAMPLER_HPP
