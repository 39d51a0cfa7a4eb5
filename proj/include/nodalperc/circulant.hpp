#ifndef NODALPERC_CIRCULANT_HPP
#define NODALPERC_CIRCULANT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "nodalperc/errors.hpp"
#include "nodalperc/field_sample.hpp"
#include "nodalperc/kernels.hpp"
#include "nodalperc/rng.hpp"

namespace nodalperc {

/// Points origin + i*a + j*b for 0 <= i < n1, 0 <= j < n2, stored row-major (i outer).
struct AffineGrid {
  Vec2 origin;
  Vec2 a;
  Vec2 b;
  int n1 = 0;
  int n2 = 0;

  Vec2 point(int i, int j) const { return origin + static_cast<double>(i) * a + static_cast<double>(j) * b; }
  std::size_t size() const { return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n2 + j; }

  std::vector<Vec2> points() const {
    std::vector<Vec2> out;
    out.reserve(size());
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) out.push_back(point(i, j));
    return out;
  }
};

/// Square grid of mesh h covering [x0, x0 + (n-1)h] x [y0, y0 + (m-1)h].
inline AffineGrid square_grid(Vec2 origin, double h, int n1, int n2) {
  return AffineGrid{origin, {h, 0.0}, {0.0, h}, n1, n2};
}

/// Smallest integer >= n whose only prime factors are 2, 3, 5 and 7.
inline int good_fft_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

struct EmbeddingReport {
  int m1 = 0;
  int m2 = 0;
  double padding = 0.0;
  double min_eigenvalue = 0.0;  // relative to the largest eigenvalue
  double clipped_mass = 0.0;    // |negative eigenvalues beyond tolerance| / sum |eigenvalues|
};

inline constexpr double kClipTolerance = 1e-8;
inline constexpr double kMaxClippedMass = 1e-3;

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace detail

/// Exact sampler for a stationary kernel on an affine grid via a periodic embedding
/// of size m1 x m2 >= padding * (n1 x n2).
class CirculantSampler {
 public:
  /// Scratch buffer for one in-place transform; one per thread.
  class Workspace {
   public:
    explicit Workspace(std::size_t n)
        : buf_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), n_(n) {
      if (!buf_) throw SizeError("circulant workspace: allocation of " + std::to_string(n) + " complex values failed");
    }
    fftw_complex* data() { return buf_.get(); }
    std::size_t size() const { return n_; }

   private:
    std::unique_ptr<fftw_complex, detail::FftwFree> buf_;
    std::size_t n_;
  };

  CirculantSampler(const Kernel& kernel, const AffineGrid& grid, double padding = 2.0)
      : CirculantSampler(kernel, grid, padding, true) {}

  /// Embedding diagnostics without the clipped-mass check.
  static EmbeddingReport probe(const Kernel& kernel, const AffineGrid& grid, double padding = 2.0) {
    return CirculantSampler(kernel, grid, padding, false).report();
  }

 private:
  CirculantSampler(const Kernel& kernel, const AffineGrid& grid, double padding, bool strict) : grid_(grid) {
    if (!kernel.stationary())
      throw UnsupportedError("circulant sampler needs a stationary kernel, got '" + kernel.name() + "'");
    if (grid.n1 < 1 || grid.n2 < 1) throw DomainError("circulant sampler: empty grid");
    if (!(padding >= 1.0)) throw DomainError("circulant sampler: padding must be >= 1");
    const int m1 = even_size(grid.n1, padding);
    const int m2 = even_size(grid.n2, padding);
    report_ = EmbeddingReport{m1, m2, padding, 0.0, 0.0};
    const std::size_t total = static_cast<std::size_t>(m1) * m2;

    Workspace ws(total);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      plan_.reset(fftw_plan_dft_2d(m1, m2, ws.data(), ws.data(), FFTW_FORWARD, FFTW_ESTIMATE));
    }
    if (!plan_) throw EmbeddingError("fftw failed to create a plan");

    fftw_complex* c = ws.data();
    for (int k1 = 0; k1 < m1; ++k1)
      for (int k2 = 0; k2 < m2; ++k2) {
        c[static_cast<std::size_t>(k1) * m2 + k2][0] = embedded_covariance(kernel, k1, k2);
        c[static_cast<std::size_t>(k1) * m2 + k2][1] = 0.0;
      }
    fftw_execute_dft(plan_.get(), c, c);

    double lmax = 0.0, lmin = 0.0, abs_sum = 0.0, clipped = 0.0;
    for (std::size_t k = 0; k < total; ++k) {
      lmax = std::max(lmax, c[k][0]);
      lmin = std::min(lmin, c[k][0]);
      abs_sum += std::abs(c[k][0]);
    }
    if (!(lmax > 0.0)) throw EmbeddingError("circulant embedding has no positive eigenvalue");
    sqrt_lambda_.resize(total);
    const double inv_m = 1.0 / static_cast<double>(total);
    for (std::size_t k = 0; k < total; ++k) {
      const double l = c[k][0];
      if (l < -kClipTolerance * lmax) clipped += -l;
      sqrt_lambda_[k] = l > 0.0 ? std::sqrt(l * inv_m) : 0.0;
    }
    report_.min_eigenvalue = lmin / lmax;
    report_.clipped_mass = clipped / abs_sum;
    if (strict && report_.clipped_mass > kMaxClippedMass)
      throw EmbeddingError("circulant embedding clipped mass " + std::to_string(report_.clipped_mass) +
                           " exceeds 1e-3; increase the padding factor");
  }


 public:
  /// Bytes held by a sampler on `grid` plus one workspace and two output buffers.
  static std::size_t memory_bytes(const AffineGrid& grid, double padding = 2.0) {
    const std::size_t m = static_cast<std::size_t>(even_size(grid.n1, padding)) * even_size(grid.n2, padding);
    return m * (2 * sizeof(fftw_complex) + sizeof(double)) + 2 * grid.size() * sizeof(double);
  }

  const AffineGrid& grid() const { return grid_; }
  const EmbeddingReport& report() const { return report_; }
  std::size_t embedding_size() const { return sqrt_lambda_.size(); }
  Workspace make_workspace() const { return Workspace(embedding_size()); }

  /// Two independent samples on the grid from one transform: stream (seed, stream).
  void sample_pair(std::uint64_t seed, std::uint64_t stream, Workspace& ws, std::span<double> first,
                   std::span<double> second) const {
    if (ws.size() != embedding_size()) throw ValidationError("circulant workspace has the wrong size");
    if (first.size() != grid_.size() || second.size() != grid_.size())
      throw ValidationError("circulant output spans must match the grid size");
    Engine eng = make_engine(seed, stream);
    std::normal_distribution<double> normal;
    fftw_complex* z = ws.data();
    for (std::size_t k = 0; k < sqrt_lambda_.size(); ++k) {
      const double re = normal(eng);
      const double im = normal(eng);
      z[k][0] = sqrt_lambda_[k] * re;
      z[k][1] = sqrt_lambda_[k] * im;
    }
    fftw_execute_dft(plan_.get(), z, z);
    const int m2 = report_.m2;
    for (int i = 0; i < grid_.n1; ++i)
      for (int j = 0; j < grid_.n2; ++j) {
        const std::size_t src = static_cast<std::size_t>(i) * m2 + j;
        first[grid_.index(i, j)] = z[src][0];
        second[grid_.index(i, j)] = z[src][1];
      }
  }

  /// The real part of stream 0; grid points in row-major order.
  FieldSample sample(std::uint64_t seed) const {
    Workspace ws = make_workspace();
    FieldSample s;
    s.points = grid_.points();
    s.values.resize(grid_.size());
    std::vector<double> other(grid_.size());
    sample_pair(seed, 0, ws, s.values, other);
    s.seed = seed;
    s.method = SampleMethod::Circulant;
    s.method_parameter = static_cast<int>(report_.padding);
    return s;
  }

 private:
  static int even_size(int n, double padding) {
    int m = good_fft_size(std::max(2, static_cast<int>(std::ceil(padding * n))));
    while (m % 2 != 0) m = good_fft_size(m + 1);
    return m;
  }

  // Covariance of the periodised lag (k1, k2). Lags at exactly half the period are
  // ambiguous between +M/2 and -M/2; averaging both keeps the base symmetric.
  double embedded_covariance(const Kernel& kernel, int k1, int k2) const {
    const int m1 = report_.m1, m2 = report_.m2;
    int r1[2], r2[2];
    int c1 = 0, c2 = 0;
    if (2 * k1 == m1) {
      r1[c1++] = k1;
      r1[c1++] = k1 - m1;
    } else {
      r1[c1++] = k1 <= m1 / 2 ? k1 : k1 - m1;
    }
    if (2 * k2 == m2) {
      r2[c2++] = k2;
      r2[c2++] = k2 - m2;
    } else {
      r2[c2++] = k2 <= m2 / 2 ? k2 : k2 - m2;
    }
    double acc = 0.0;
    for (int u = 0; u < c1; ++u)
      for (int v = 0; v < c2; ++v)
        acc += kernel(static_cast<double>(r1[u]) * grid_.a + static_cast<double>(r2[v]) * grid_.b);
    return acc / (c1 * c2);
  }

  AffineGrid grid_;
  EmbeddingReport report_;
  std::vector<double> sqrt_lambda_;
  std::unique_ptr<fftw_plan_s, detail::PlanDeleter> plan_;
};

/// Embeddings above this many points are not grown just to remove a small clipped mass.
inline constexpr std::size_t kAutoPadPoints = std::size_t{1} << 23;

/// Builds a sampler, doubling the padding while the embedding clips any negative
/// eigenvalue and the doubled torus stays within kAutoPadPoints, or while the
/// clipped mass exceeds the hard limit and padding <= max_padding. Small grids
/// keep doubling until the torus has 512 points per side, since their period is
/// otherwise shorter than the kernel's correlation range.
inline CirculantSampler make_circulant(const Kernel& kernel, const AffineGrid& grid, double padding = 2.0,
                                       double max_padding = 16.0) {
  for (double p = padding;; p *= 2.0) {
    const EmbeddingReport r = CirculantSampler::probe(kernel, grid, p);
    const std::size_t doubled = static_cast<std::size_t>(4) * r.m1 * r.m2;
    const bool clean = r.clipped_mass == 0.0;
    const bool small = p * std::max(grid.n1, grid.n2) < 512.0;
    const bool can_grow = p * 2.0 <= max_padding || small;
    if (clean || !can_grow) return CirculantSampler(kernel, grid, p);  // throws if over the hard limit
    if (r.clipped_mass <= kMaxClippedMass && doubled > kAutoPadPoints) return CirculantSampler(kernel, grid, p);
  }
}

inline FieldSample sample_circulant(const Kernel& kernel, const AffineGrid& grid, double padding,
                                    std::uint64_t seed) {
  return make_circulant(kernel, grid, padding).sample(seed);
}

}  // namespace nodalperc

#endif  // NODALPERC_CIRCULANT_HPP
