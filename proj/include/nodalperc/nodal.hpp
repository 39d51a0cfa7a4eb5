#ifndef NODALPERC_NODAL_HPP
#define NODALPERC_NODAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nodalperc/circulant.hpp"
#include "nodalperc/errors.hpp"
#include "nodalperc/geometry.hpp"
#include "nodalperc/kernels.hpp"
#include "nodalperc/lattice.hpp"
#include "nodalperc/stats.hpp"

namespace nodalperc {

inline constexpr std::size_t kDefaultMemoryCap = std::size_t{8} << 30;

// ---------------------------------------------------------------------------
// Mesh budget and implicit function box
// ---------------------------------------------------------------------------

struct NodalConstants {
  double C1 = 1.0;          // E sup_{B_s} |f|_{C^2} <= C1 sqrt(ln s)
  double mu_param = 1.0;    // mu(delta / 3N, eta / 6)
  double beta_param = 1.0;  // near-edge critical point constant
  double mu_T = 1.0;        // longest edge of the unit lattice
  int N = 4;                // number of edge directions
  double R = 1.0;           // radius of the ball containing the test quads
};

struct MeshBudget {
  double s = 0.0, delta = 0.0, eta = 0.0;
  NodalConstants constants;
  double lambda_s = 0.0;   // mu (2s)^{-2-eta/6}
  double kbar_s = 0.0;     // C1 sqrt(ln 2s) / (delta / 3N)
  double psi_s = 0.0;      // kbar_s / lambda_s
  double eps1_s = 0.0;     // (psi^{-1} / 4)^2
  double eps2_s = 0.0;     // (delta / 3N) / (50 mu_T^2 beta s^2 psi^3)
  double eps_admissible = 0.0;            // min(eps1 / mu_T, eps2)
  double admissibility_threshold = 0.0;  // s^{-8-eta}
  double eps_sigma = 0.0;                 // 1 / (floor((R s)^{8+eta/32}) + 1)
  bool below_threshold = false;           // psi_s < 1: the box is too small for the argument

  /// Width of the strip around edges that must be free of tangency points at mesh eps.
  double theta(double eps) const {
    return 50.0 * constants.mu_T * constants.mu_T * eps * eps * psi_s * psi_s * psi_s;
  }
};

inline double eps_sigma(double R, double sigma, double eta) {
  if (!(R > 0.0) || !(sigma >= 2.0) || !(eta > 0.0)) throw DomainError("eps_sigma: need R > 0, sigma >= 2, eta > 0");
  return 1.0 / (std::floor(std::pow(R * sigma, 8.0 + eta / 32.0)) + 1.0);
}

inline MeshBudget mesh_calculator(double s, double delta, double eta, const NodalConstants& c = {}) {
  if (!(s >= 2.0)) throw DomainError("mesh_calculator: s must be >= 2");
  if (!(delta > 0.0) || !(eta > 0.0)) throw DomainError("mesh_calculator: delta and eta must be positive");
  if (!(c.C1 > 0.0 && c.mu_param > 0.0 && c.beta_param > 0.0 && c.mu_T > 0.0 && c.N > 0 && c.R > 0.0))
    throw DomainError("mesh_calculator: constants must be positive");
  MeshBudget b;
  b.s = s;
  b.delta = delta;
  b.eta = eta;
  b.constants = c;
  const double share = delta / (3.0 * c.N);
  b.lambda_s = c.mu_param * std::pow(2.0 * s, -2.0 - eta / 6.0);
  b.kbar_s = c.C1 / share * std::sqrt(std::log(2.0 * s));
  b.psi_s = b.kbar_s / b.lambda_s;
  b.below_threshold = b.psi_s < 1.0;
  b.eps1_s = std::pow(0.25 / b.psi_s, 2);
  b.eps2_s = share / (50.0 * c.mu_T * c.mu_T * c.beta_param * s * s * std::pow(b.psi_s, 3));
  b.eps_admissible = std::min(b.eps1_s / c.mu_T, b.eps2_s);
  b.admissibility_threshold = std::pow(s, -8.0 - eta);
  b.eps_sigma = eps_sigma(c.R, s, eta);
  return b;
}

struct IftBox {
  double eps = 0.0;                // side of the box where the zero set is a graph
  double phi_second_bound = 0.0;   // bound on the second derivative of that graph
};

/// Quantitative implicit function box for |f|_{C^2} <= k and max(|f|, |df|) >= lambda.
inline IftBox ift_box(double k_bound, double lambda_bound) {
  if (!(lambda_bound > 0.0)) throw DomainError("ift_box: lambda must be positive");
  if (!(k_bound >= lambda_bound)) throw DomainError("ift_box: need k >= lambda");
  const double ratio = k_bound / lambda_bound;
  return {std::pow(0.25 / ratio, 2), 100.0 * ratio * ratio * ratio};
}

// ---------------------------------------------------------------------------
// Spectral moments of isotropic kernels
// ---------------------------------------------------------------------------

struct SpectralMoments {
  double lambda2 = 0.0;  // Var of a directional first derivative
  double lambda4 = 0.0;  // Var of a directional second derivative
};

/// Fits K(r) = 1 - l2 r^2/2 + l4 r^4/24 - l6 r^6/720 on r = h, 2h, 3h.
inline SpectralMoments spectral_moments(const Kernel& k, double h = 0.05) {
  Eigen::Matrix3d A;
  Eigen::Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    const double r = (i + 1) * h;
    const double r2 = r * r;
    A(i, 0) = r2 / 2.0;
    A(i, 1) = -r2 * r2 / 24.0;
    A(i, 2) = r2 * r2 * r2 / 720.0;
    rhs(i) = 1.0 - k.radial(r);
  }
  const Eigen::Vector3d x = A.fullPivLu().solve(rhs);
  return {x(0), x(1)};
}

/// Kac-Rice density of points with f = 0 and df(v) = 0, per unit area, for an
/// isotropic field with unit variance.
inline double tangency_density(const SpectralMoments& m) {
  return std::sqrt(std::max(0.0, m.lambda4 - m.lambda2 * m.lambda2)) / (std::numbers::pi * std::numbers::pi);
}

/// E[(|f| |df|^2)^{-a}] at one point, f and df independent with Var df_i = lambda2.
inline double phi_moment_exact(double a, double lambda2) {
  if (!(a > 0.0 && a < 1.0)) throw DomainError("phi_moment_exact: need 0 < a < 1");
  const double abs_f = std::pow(2.0, -a / 2.0) * std::tgamma((1.0 - a) / 2.0) / std::sqrt(std::numbers::pi);
  const double grad = std::pow(2.0 * lambda2, -a) * std::tgamma(1.0 - a);
  return abs_f * grad;
}

// ---------------------------------------------------------------------------
// Fields on square grids
// ---------------------------------------------------------------------------

/// Circulant sampler on the square grid of mesh h covering `rect`, two fields per transform.
class SquareGridSampler {
 public:
  SquareGridSampler(const Kernel& kernel, const Rect& rect, double h, std::size_t memory_cap = kDefaultMemoryCap)
      : grid_(make_grid(rect, h)), sampler_(checked(kernel, grid_, memory_cap)), ws_(sampler_.make_workspace()) {}

  const AffineGrid& grid() const { return grid_; }
  double h() const { return grid_.a.x; }

  void draw_pair(std::uint64_t seed, std::uint64_t stream, std::vector<double>& a, std::vector<double>& b) {
    a.resize(grid_.size());
    b.resize(grid_.size());
    sampler_.sample_pair(seed, stream, ws_, a, b);
  }

 private:
  static AffineGrid make_grid(const Rect& r, double h) {
    if (!(h > 0.0)) throw DomainError("grid mesh must be positive");
    const int n1 = static_cast<int>(std::ceil(r.width() / h - 1e-9)) + 1;
    const int n2 = static_cast<int>(std::ceil(r.height() / h - 1e-9)) + 1;
    return square_grid({r.x0, r.y0}, h, n1, n2);
  }
  static CirculantSampler checked(const Kernel& kernel, const AffineGrid& g, std::size_t cap) {
    const std::size_t bytes = CirculantSampler::memory_bytes(g);
    if (bytes > cap)
      throw SizeError("field grid of " + std::to_string(g.size()) + " points needs " + std::to_string(bytes >> 20) +
                      " MiB, above the cap of " + std::to_string(cap >> 20) + " MiB; split the box into at least " +
                      std::to_string((bytes + cap - 1) / cap) + " tiles");
    return make_circulant(kernel, g);
  }

  AffineGrid grid_;
  CirculantSampler sampler_;
  CirculantSampler::Workspace ws_;
};

// ---------------------------------------------------------------------------
// Double crossings of lattice edges
// ---------------------------------------------------------------------------

/// Grid indices of the subsampled points of every edge of a patch enumerated
/// with refine = k + 1.
class EdgeSubsampler {
 public:
  explicit EdgeSubsampler(const Patch& p) : stride_(p.refine + 1) {
    for (const auto& [u, v] : p.edges()) {
      const FineCoord cu = p.coords[u], cv = p.coords[v];
      const FineCoord step{cv[0] - cu[0], cv[1] - cu[1]};
      for (int t = 0; t <= p.refine; ++t) index_.push_back(p.grid_index_at(cu, step, t));
    }
  }

  std::size_t num_edges() const { return index_.size() / stride_; }
  int points_per_edge() const { return stride_; }

  /// Sign changes along edge e (a value counts as positive when > 0).
  int sign_changes(std::span<const double> grid_values, std::size_t e) const {
    const std::size_t* idx = index_.data() + e * stride_;
    int changes = 0;
    bool prev = grid_values[idx[0]] > 0.0;
    for (int t = 1; t < stride_; ++t) {
      const bool cur = grid_values[idx[t]] > 0.0;
      changes += cur != prev;
      prev = cur;
    }
    return changes;
  }

  /// Edges with at least two sign changes.
  std::size_t flagged(std::span<const double> grid_values) const {
    std::size_t count = 0;
    for (std::size_t e = 0; e < num_edges(); ++e) count += sign_changes(grid_values, e) >= 2;
    return count;
  }

 private:
  int stride_;
  std::vector<std::size_t> index_;
};

struct EdgeCrossingReport {
  std::size_t edges_total = 0;  // edges of the lattice in B_s (per replicate)
  int subsample_k = 0;          // interior points per edge
  int replicates = 0;
  std::vector<std::size_t> flagged;  // per replicate
  long long clean_replicates = 0;    // replicates without a flagged edge
  double flagged_fraction = 0.0;     // flagged edges / (edges * replicates)
  double fraction_se = 0.0;          // from the spread of per-replicate fractions
  double p_clean = 0.0;
  Interval p_clean_interval;
  double confidence = 0.95;
  // Subsampling only sees sign changes between sample points, so counts are lower bounds.
  bool lower_bound = true;
};

inline void finish_report(EdgeCrossingReport& r) {
  r.replicates = static_cast<int>(r.flagged.size());
  std::vector<double> fractions;
  r.clean_replicates = 0;
  for (std::size_t f : r.flagged) {
    fractions.push_back(static_cast<double>(f) / static_cast<double>(std::max<std::size_t>(r.edges_total, 1)));
    r.clean_replicates += f == 0;
  }
  const MeanSe m = mean_se(fractions);
  r.flagged_fraction = m.mean;
  r.fraction_se = m.se;
  if (r.replicates > 0) {
    r.p_clean = static_cast<double>(r.clean_replicates) / r.replicates;
    r.p_clean_interval = wilson_interval(r.clean_replicates, r.replicates, r.confidence);
  }
}

/// Flagged-edge count of a deterministic function on the lattice edges in B_s.
inline std::size_t double_crossings_of(const Lattice& lat, double s, int subsample_k,
                                       const std::function<double(Vec2)>& f) {
  if (subsample_k < 1) throw DomainError("subsample_k must be positive");
  const Patch p = enumerate(lat, centered_box(s), subsample_k + 1);
  std::vector<double> values(p.grid.size());
  for (int i = 0; i < p.grid.n1; ++i)
    for (int j = 0; j < p.grid.n2; ++j) values[p.grid.index(i, j)] = f(p.grid.point(i, j));
  return EdgeSubsampler(p).flagged(values);
}

/// Monte Carlo census of edges of the lattice in B_s crossed at least twice by the nodal set.
inline EdgeCrossingReport double_crossing_census(const Kernel& kernel, const Lattice& lat, double s, int subsample_k,
                                                 int replicates, std::uint64_t seed, double confidence = 0.95,
                                                 std::size_t memory_cap = kDefaultMemoryCap) {
  if (subsample_k < 4) throw DomainError("double_crossing_census: subsample_k must be >= 4");
  if (replicates < 1) throw DomainError("double_crossing_census: replicates must be positive");
  const AffineGrid grid = sampling_grid(lat, centered_box(s).rect(), subsample_k + 1);
  const std::size_t bytes = CirculantSampler::memory_bytes(grid);
  if (bytes > memory_cap)
    throw SizeError("double_crossing_census: " + std::to_string(grid.size()) + " sample points need " +
                    std::to_string(bytes >> 20) + " MiB, above the cap of " + std::to_string(memory_cap >> 20) +
                    " MiB; split B_s into at least " + std::to_string((bytes + memory_cap - 1) / memory_cap) +
                    " tiles or lower subsample_k");
  const Patch p = enumerate(lat, centered_box(s), subsample_k + 1);
  const EdgeSubsampler sub(p);
  const CirculantSampler sampler = make_circulant(kernel, p.grid);
  auto ws = sampler.make_workspace();
  std::vector<double> a(p.grid.size()), b(p.grid.size());

  EdgeCrossingReport r;
  r.edges_total = sub.num_edges();
  r.subsample_k = subsample_k;
  r.confidence = confidence;
  for (int rep = 0; rep < replicates; rep += 2) {
    sampler.sample_pair(seed, static_cast<std::uint64_t>(rep / 2), ws, a, b);
    r.flagged.push_back(sub.flagged(a));
    if (rep + 1 < replicates) r.flagged.push_back(sub.flagged(b));
  }
  finish_report(r);
  return r;
}

// ---------------------------------------------------------------------------
// Sup norm over nested boxes
// ---------------------------------------------------------------------------

struct SupnormRow {
  double s = 0.0;
  double mean_max = 0.0;
  double se = 0.0;
  double ratio = 0.0;  // mean_max / sqrt(ln s)
  double ratio_se = 0.0;
};

struct SupnormTable {
  std::vector<SupnormRow> rows;
  std::vector<std::vector<double>> maxima;  // [replicate][s index]
  double h = 0.0;
  double resolution_error = 0.0;  // relative error estimate of a grid maximum
};

/// Per-s maxima of |f| over nested boxes B_s, all read from one sample on B_{max s}.
inline std::vector<double> nested_box_maxima(const AffineGrid& g, std::span<const double> values,
                                             const std::vector<double>& s_grid, bool absolute = true) {
  std::vector<double> out(s_grid.size(), -std::numeric_limits<double>::infinity());
  const double tol = 1e-9 * g.a.x;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const double r = sup_norm(g.point(i, j));
      const auto it = std::lower_bound(s_grid.begin(), s_grid.end(), r - tol);
      if (it == s_grid.end()) continue;
      const double v = absolute ? std::abs(values[g.index(i, j)]) : values[g.index(i, j)];
      auto& slot = out[static_cast<std::size_t>(it - s_grid.begin())];
      slot = std::max(slot, v);
    }
  for (std::size_t k = 1; k < out.size(); ++k) out[k] = std::max(out[k], out[k - 1]);
  return out;
}

inline void check_scale_grid(const std::vector<double>& s_grid, double lo, double hi, const char* who) {
  if (s_grid.empty()) throw DomainError(std::string(who) + ": empty scale grid");
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    if (!(s_grid[k] >= lo && s_grid[k] <= hi))
      throw DomainError(std::string(who) + ": scales must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (k > 0 && !(s_grid[k] > s_grid[k - 1])) throw DomainError(std::string(who) + ": scales must increase");
  }
}

inline SupnormTable supnorm_statistic(const Kernel& kernel, const std::vector<double>& s_grid, double h,
                                      int replicates, std::uint64_t seed,
                                      std::size_t memory_cap = kDefaultMemoryCap) {
  check_scale_grid(s_grid, 2.0, 64.0, "supnorm_statistic");
  if (replicates < 2) throw DomainError("supnorm_statistic: need at least 2 replicates");
  SupnormTable t;
  t.h = h;
  // Near a high maximum f'' ~ -lambda2 f, and the grid misses the peak by at most h / sqrt 2.
  t.resolution_error = spectral_moments(kernel).lambda2 * h * h / 4.0;
  if (t.resolution_error > 0.02)
    throw DomainError("supnorm_statistic: mesh too coarse, estimated relative error " +
                      std::to_string(t.resolution_error) + " exceeds 2%");
  const double S = s_grid.back();
  SquareGridSampler sampler(kernel, Rect{-S, S, -S, S}, h, memory_cap);
  std::vector<double> a, b;
  for (int rep = 0; rep < replicates; rep += 2) {
    sampler.draw_pair(seed, static_cast<std::uint64_t>(rep / 2), a, b);
    t.maxima.push_back(nested_box_maxima(sampler.grid(), a, s_grid));
    if (rep + 1 < replicates) t.maxima.push_back(nested_box_maxima(sampler.grid(), b, s_grid));
  }
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    std::vector<double> col;
    for (const auto& m : t.maxima) col.push_back(m[k]);
    const MeanSe ms = mean_se(col);
    const double root = std::sqrt(std::log(s_grid[k]));
    t.rows.push_back({s_grid[k], ms.mean, ms.se, ms.mean / root, ms.se / root});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Transversality
// ---------------------------------------------------------------------------

struct TransversalityResult {
  std::vector<double> s_grid;
  std::vector<std::vector<double>> minmax;  // [replicate][s index]: min over B_s of max(|f|, |df|)
  std::vector<double> q05, q50, q95;        // per s
  double a = 0.5;
  double phi_moment = 0.0;     // mean of Phi^a over all evaluations
  double phi_moment_se = 0.0;  // from per-replicate means
  long long evaluations = 0;
  double h = 0.0;
  double gradient_error = 0.0;  // mean |grad_h - grad_2h| / 3, the Richardson estimate of the h^2 error
  // mu(delta, eta) calibration: delta-quantile of the statistic at the largest s times s^{2+eta}
  double mu_calibrated = 0.0;
};

inline TransversalityResult transversality_statistic(const Kernel& kernel, const std::vector<double>& s_grid, double h,
                                                     int replicates, std::uint64_t seed, double a = 0.5,
                                                     double delta = 0.05, double eta = 1.0,
                                                     std::size_t memory_cap = kDefaultMemoryCap) {
  check_scale_grid(s_grid, 0.5, 64.0, "transversality_statistic");
  if (!(a > 0.0 && a < 1.0)) throw DomainError("transversality_statistic: need 0 < a < 1");
  if (replicates < 2) throw DomainError("transversality_statistic: need at least 2 replicates");
  TransversalityResult out;
  out.s_grid = s_grid;
  out.a = a;
  out.h = h;
  const double S = s_grid.back();
  // two extra rows and columns on each side for the step-2h gradient
  SquareGridSampler sampler(kernel, Rect{-S - 2 * h, S + 2 * h, -S - 2 * h, S + 2 * h}, h, memory_cap);
  const AffineGrid& g = sampler.grid();
  std::vector<double> fa, fb, stat(g.size()), phi_means;
  double grad_err_sum = 0.0;
  long long grad_err_n = 0;
  const double tol = 1e-9 * h;

  auto process = [&](const std::vector<double>& f) {
    double phi_sum = 0.0;
    long long n = 0;
    std::fill(stat.begin(), stat.end(), std::numeric_limits<double>::infinity());
    for (int i = 2; i + 2 < g.n1; ++i)
      for (int j = 2; j + 2 < g.n2; ++j) {
        const Vec2 x = g.point(i, j);
        if (sup_norm(x) > S + tol) continue;
        const double v = f[g.index(i, j)];
        const double gx = (f[g.index(i + 1, j)] - f[g.index(i - 1, j)]) / (2 * h);
        const double gy = (f[g.index(i, j + 1)] - f[g.index(i, j - 1)]) / (2 * h);
        const double gx2 = (f[g.index(i + 2, j)] - f[g.index(i - 2, j)]) / (4 * h);
        const double gy2 = (f[g.index(i, j + 2)] - f[g.index(i, j - 2)]) / (4 * h);
        const double grad = std::hypot(gx, gy);
        grad_err_sum += std::hypot(gx - gx2, gy - gy2) / 3.0;
        ++grad_err_n;
        stat[g.index(i, j)] = std::max(std::abs(v), grad);
        phi_sum += std::pow(std::abs(v) * grad * grad, -a);
        ++n;
      }
    phi_means.push_back(phi_sum / static_cast<double>(n));
    out.evaluations += n;
    std::vector<double> mins(s_grid.size());
    const auto maxima = nested_box_maxima(g, [&] {
      std::vector<double> neg(stat.size());
      for (std::size_t k = 0; k < stat.size(); ++k) neg[k] = -stat[k];
      return neg;
    }(), s_grid, false);
    for (std::size_t k = 0; k < s_grid.size(); ++k) mins[k] = -maxima[k];
    out.minmax.push_back(mins);
  };

  for (int rep = 0; rep < replicates; rep += 2) {
    sampler.draw_pair(seed, static_cast<std::uint64_t>(rep / 2), fa, fb);
    process(fa);
    if (rep + 1 < replicates) process(fb);
  }
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    std::vector<double> col;
    for (const auto& m : out.minmax) col.push_back(m[k]);
    out.q05.push_back(quantile(col, 0.05));
    out.q50.push_back(quantile(col, 0.5));
    out.q95.push_back(quantile(col, 0.95));
  }
  const MeanSe pm = mean_se(phi_means);
  out.phi_moment = pm.mean;
  out.phi_moment_se = pm.se;
  out.gradient_error = grad_err_sum / static_cast<double>(std::max<long long>(grad_err_n, 1));
  std::vector<double> last;
  for (const auto& m : out.minmax) last.push_back(m.back());
  out.mu_calibrated = quantile(last, delta) * std::pow(S, 2.0 + eta);
  return out;
}

// ---------------------------------------------------------------------------
// Tangency points of the nodal set near edges of one direction
// ---------------------------------------------------------------------------

/// Nearest-segment queries against the lattice edges parallel to a direction.
class EdgeDirectionIndex {
 public:
  EdgeDirectionIndex(const Patch& p, Vec2 v) : cell_(p.longest_edge) {
    const double nv = norm(v);
    if (!(nv > 0.0)) throw DomainError("edge direction must be nonzero");
    v = (1.0 / nv) * v;
    x0_ = p.region.x0;
    y0_ = p.region.y0;
    nx_ = static_cast<int>(std::ceil(p.region.width() / cell_)) + 1;
    ny_ = static_cast<int>(std::ceil(p.region.height() / cell_)) + 1;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (const auto& [u, w] : p.edges()) {
      const Vec2 a = p.positions[u], b = p.positions[w];
      const Vec2 d = b - a;
      const double cross = std::abs(d.x * v.y - d.y * v.x);
      if (cross > 1e-9 * norm(d)) continue;
      const std::size_t id = segs_.size();
      segs_.push_back({a, b});
      const Vec2 m = 0.5 * (a + b);
      buckets_[bucket(m)].push_back(id);
    }
  }

  std::size_t num_segments() const { return segs_.size(); }

  double distance(Vec2 x) const {
    const int ci = std::clamp(static_cast<int>(std::floor((x.x - x0_) / cell_)), 0, nx_ - 1);
    const int cj = std::clamp(static_cast<int>(std::floor((x.y - y0_) / cell_)), 0, ny_ - 1);
    double best = std::numeric_limits<double>::infinity();
    for (int di = -2; di <= 2; ++di)
      for (int dj = -2; dj <= 2; ++dj) {
        const int i = ci + di, j = cj + dj;
        if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
        for (std::size_t id : buckets_[static_cast<std::size_t>(i) * ny_ + j])
          best = std::min(best, segment_distance(x, segs_[id].first, segs_[id].second));
      }
    return best;
  }

 private:
  static double segment_distance(Vec2 x, Vec2 a, Vec2 b) {
    const Vec2 d = b - a;
    const double t = std::clamp(dot(x - a, d) / dot(d, d), 0.0, 1.0);
    return norm(x - (a + t * d));
  }
  std::size_t bucket(Vec2 m) const {
    const int i = std::clamp(static_cast<int>(std::floor((m.x - x0_) / cell_)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((m.y - y0_) / cell_)), 0, ny_ - 1);
    return static_cast<std::size_t>(i) * ny_ + j;
  }

  double cell_, x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::pair<Vec2, Vec2>> segs_;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Common zeros of two grid functions, located by linear interpolation on the
/// two triangles of every grid cell.
inline std::vector<Vec2> common_zeros(const AffineGrid& g, std::span<const double> f, std::span<const double> q) {
  std::vector<Vec2> out;
  auto solve = [&](std::size_t i0, std::size_t i1, std::size_t i2, Vec2 p0, Vec2 p1, Vec2 p2) {
    // values as affine functions of barycentric coordinates (l1, l2), l0 = 1 - l1 - l2
    const double a11 = f[i1] - f[i0], a12 = f[i2] - f[i0];
    const double a21 = q[i1] - q[i0], a22 = q[i2] - q[i0];
    const double det = a11 * a22 - a12 * a21;
    if (det == 0.0) return;
    const double l1 = (-f[i0] * a22 + q[i0] * a12) / det;
    const double l2 = (-q[i0] * a11 + f[i0] * a21) / det;
    if (l1 < 0.0 || l2 < 0.0 || l1 + l2 > 1.0) return;
    out.push_back(p0 + l1 * (p1 - p0) + l2 * (p2 - p0));
  };
  for (int i = 0; i + 1 < g.n1; ++i)
    for (int j = 0; j + 1 < g.n2; ++j) {
      const std::size_t k00 = g.index(i, j), k10 = g.index(i + 1, j), k01 = g.index(i, j + 1),
                        k11 = g.index(i + 1, j + 1);
      const Vec2 p00 = g.point(i, j), p10 = g.point(i + 1, j), p01 = g.point(i, j + 1), p11 = g.point(i + 1, j + 1);
      const double fmin = std::min({f[k00], f[k10], f[k01], f[k11]}), fmax = std::max({f[k00], f[k10], f[k01], f[k11]});
      if (fmin > 0.0 || fmax < 0.0) continue;
      solve(k00, k10, k11, p00, p10, p11);
      solve(k00, k11, k01, p00, p11, p01);
    }
  return out;
}

struct NearEdgeCensus {
  double theta = 0.0, eps = 0.0, s = 0.0;
  Vec2 direction;
  std::vector<double> counts;  // per replicate
  double mean = 0.0, se = 0.0;
  double strip_fraction = 0.0;  // area fraction of B_s within theta of the direction-v edges
  double kac_rice_mean = 0.0;   // tangency density * area * strip fraction
  double beta_hat = 0.0;        // mean * eps / (s^2 theta)
  double h = 0.0;
};

/// Area fraction of B_s within distance theta of the indexed edges, by a
/// rank-1 lattice rule with golden-ratio generator (no alignment with the lattice).
inline double strip_fraction(const EdgeDirectionIndex& idx, double s, double theta, int n = 1 << 17) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  long long in = 0;
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) / n;
    double w = k * g + 0.5;
    w -= std::floor(w);
    in += idx.distance({-s + 2 * s * u, -s + 2 * s * w}) <= theta;
  }
  return static_cast<double>(in) / n;
}

inline NearEdgeCensus near_edge_critical_census(const Kernel& kernel, const Lattice& lat, double theta, double s, Vec2 v,
                                                double h, int replicates, std::uint64_t seed,
                                                std::size_t memory_cap = kDefaultMemoryCap) {
  if (!(theta >= 0.0) || !(s > 0.0)) throw DomainError("near_edge_critical_census: need theta >= 0 and s > 0");
  if (replicates < 2) throw DomainError("near_edge_critical_census: need at least 2 replicates");
  if (theta > 0.0 && h > theta / 4.0)
    throw DomainError("near_edge_critical_census: resolution error, grid mesh " + std::to_string(h) +
                      " exceeds theta / 4 = " + std::to_string(theta / 4.0));
  NearEdgeCensus out;
  out.theta = theta;
  out.eps = lat.mesh();
  out.s = s;
  out.direction = v;
  out.h = h;
  const double margin = theta + 2.0 * lat.longest_edge();
  const Patch p = enumerate(lat, centered_box(s + margin));
  const EdgeDirectionIndex idx(p, v);
  if (idx.num_segments() == 0) throw DomainError("near_edge_critical_census: no lattice edge has direction v");
  const double nv = norm(v);
  const Vec2 u = (1.0 / nv) * v;

  out.strip_fraction = theta > 0.0 ? strip_fraction(idx, s, theta) : 0.0;
  out.kac_rice_mean = tangency_density(spectral_moments(kernel)) * 4.0 * s * s * out.strip_fraction;

  SquareGridSampler sampler(kernel, Rect{-s - h, s + h, -s - h, s + h}, h, memory_cap);
  const AffineGrid& g = sampler.grid();
  std::vector<double> fa, fb;
  const double tol = 1e-12;
  auto count = [&](const std::vector<double>& f) {
    if (theta == 0.0) return 0.0;
    // directional derivative by central differences; edges of the grid use one-sided ones
    std::vector<double> dv(g.size());
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const int il = std::max(i - 1, 0), ir = std::min(i + 1, g.n1 - 1);
        const int jl = std::max(j - 1, 0), jr = std::min(j + 1, g.n2 - 1);
        const double fx = (f[g.index(ir, j)] - f[g.index(il, j)]) / ((ir - il) * h);
        const double fy = (f[g.index(i, jr)] - f[g.index(i, jl)]) / ((jr - jl) * h);
        dv[g.index(i, j)] = u.x * fx + u.y * fy;
      }
    double c = 0.0;
    for (const Vec2& z : common_zeros(g, f, dv))
      if (sup_norm(z) <= s + tol && idx.distance(z) <= theta) c += 1.0;
    return c;
  };
  for (int rep = 0; rep < replicates; rep += 2) {
    sampler.draw_pair(seed, static_cast<std::uint64_t>(rep / 2), fa, fb);
    out.counts.push_back(count(fa));
    if (rep + 1 < replicates) out.counts.push_back(count(fb));
  }
  const MeanSe m = mean_se(out.counts);
  out.mean = m.mean;
  out.se = m.se;
  out.beta_hat = theta > 0.0 ? out.mean * out.eps / (s * s * theta) : 0.0;
  return out;
}

}  // namespace nodalperc

#endif  // NODALPERC_NODAL_HPP
