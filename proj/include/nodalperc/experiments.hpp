#ifndef NODALPERC_EXPERIMENTS_HPP
#define NODALPERC_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "nodalperc/circulant.hpp"
#include "nodalperc/coloring.hpp"
#include "nodalperc/errors.hpp"
#include "nodalperc/kernels.hpp"
#include "nodalperc/lattice.hpp"
#include "nodalperc/nodal.hpp"
#include "nodalperc/percolation.hpp"
#include "nodalperc/rng.hpp"
#include "nodalperc/stats.hpp"

namespace nodalperc {

/// Fills `grid_values` (one value per point of patch.grid) for replicate `replicate`.
/// Used in place of the Gaussian sampler, e.g. by stub fields in tests.
using FieldSource =
    std::function<void(const Patch& patch, std::uint64_t seed, std::uint64_t replicate, std::vector<double>& grid_values)>;

/// Outcome bits of one replicate.
using ReplicateEval = std::function<std::uint64_t(const Coloring& c, PercWorkspace& ws)>;

struct SamplingOptions {
  std::uint64_t seed = 1;
  int threads = 1;  // 0 means hardware concurrency
  std::size_t memory_cap = kDefaultMemoryCap;
  std::optional<FieldSource> field;  // replaces the circulant sampler when set
};

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void check_memory(const AffineGrid& grid, std::size_t cap) {
  const std::size_t bytes = CirculantSampler::memory_bytes(grid);
  if (bytes > cap)
    throw SizeError("experiment cell needs " + std::to_string(bytes >> 20) + " MiB of field storage, above the cap of " +
                    std::to_string(cap >> 20) + " MiB; tile the region or lower the scale");
}

inline void check_memory(const Patch& p, std::size_t cap) { check_memory(p.grid, cap); }

/// Evaluates `eval` on `replicates` independent colourings of `patch`. Replicate r
/// uses transform r / 2 of the seed's stream sequence (real part for even r,
/// imaginary part for odd r), so the outcome vector does not depend on the thread count.
inline std::vector<std::uint64_t> replicate_outcomes(const Kernel& kernel, const Patch& patch, int replicates,
                                                     const SamplingOptions& opt, const ReplicateEval& eval) {
  if (replicates < 1) throw DomainError("replicates must be positive");
  std::vector<std::uint64_t> out(static_cast<std::size_t>(replicates), 0);
  const int pairs = (replicates + 1) / 2;
  const int threads = std::min(resolve_threads(opt.threads), pairs);

  std::optional<CirculantSampler> sampler;
  if (!opt.field) {
    check_memory(patch, opt.memory_cap);
    sampler.emplace(make_circulant(kernel, patch.grid));
  }

  auto worker = [&](int tid) {
    PercWorkspace ws;
    std::vector<double> a(patch.grid.size()), b(patch.grid.size());
    std::optional<CirculantSampler::Workspace> cws;
    if (sampler) cws.emplace(sampler->make_workspace());
    for (int pair = tid; pair < pairs; pair += threads) {
      const int r0 = 2 * pair, r1 = 2 * pair + 1;
      if (sampler) {
        sampler->sample_pair(opt.seed, static_cast<std::uint64_t>(pair), *cws, a, b);
      } else {
        (*opt.field)(patch, opt.seed, static_cast<std::uint64_t>(r0), a);
        if (r1 < replicates) (*opt.field)(patch, opt.seed, static_cast<std::uint64_t>(r1), b);
      }
      out[r0] = eval(colorize_grid(patch, a), ws);
      if (r1 < replicates) out[r1] = eval(colorize_grid(patch, b), ws);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }
  return out;
}

/// Constant field: every vertex black (value > 0) or white.
inline FieldSource constant_field(double value) {
  return [value](const Patch&, std::uint64_t, std::uint64_t, std::vector<double>& v) {
    std::fill(v.begin(), v.end(), value);
  };
}

/// Independent standard normal values at every grid point.
inline FieldSource white_noise_field() {
  return [](const Patch&, std::uint64_t seed, std::uint64_t replicate, std::vector<double>& v) {
    Engine eng = make_engine(seed, replicate);
    std::normal_distribution<double> normal;
    for (auto& x : v) x = normal(eng);
  };
}

// ---------------------------------------------------------------------------
// Event specifications
// ---------------------------------------------------------------------------

enum class EventType { Crossing, Circuit, OneArm, QuadNodal };

inline const char* to_string(EventType t) {
  switch (t) {
    case EventType::Crossing: return "crossing";
    case EventType::Circuit: return "circuit";
    case EventType::OneArm: return "onearm";
    case EventType::QuadNodal: return "quad-nodal";
  }
  return "?";
}

/// A percolation event parameterised by a scale s.
///   Crossing:  [-rho s, rho s] x [-s, s] crossed along `side`.
///   Circuit:   circuit in B_s \ B_{inner s}.
///   OneArm:    arm from B_{arm_inner} to the boundary of B_s.
///   QuadNodal: nodal line trapped in [-rho s, rho s] x [-s, s] with a central band of height gap.
struct EventSpec {
  EventType type = EventType::Crossing;
  double rho = 1.0;
  SidePair side = SidePair::LeftRight;
  Color color = Color::Black;
  double inner = 0.5;
  double arm_inner = 1.0;
  double gap = 0.5;

  Rect region(double s) const {
    if (type == EventType::Crossing || type == EventType::QuadNodal) return {-rho * s, rho * s, -s, s};
    return centered_box(s).rect();
  }

  /// Whether the event is increasing in the set of black vertices.
  bool increasing() const {
    if (type == EventType::QuadNodal) return false;
    return color == Color::Black;
  }

  bool evaluate(const Coloring& c, double s, PercWorkspace& ws) const {
    switch (type) {
      case EventType::Crossing: return crosses(c, Quad(region(s), side), color, false, &ws).occurred;
      case EventType::Circuit: return circuit(c, inner * s, s, color, {0.0, 0.0}, &ws).occurred;
      case EventType::OneArm: return one_arm(c, arm_inner, s, color, false, &ws).occurred;
      case EventType::QuadNodal: return quad_nodal_crossing(c, Quad(region(s)), gap, &ws).occurred;
    }
    return false;
  }

  std::string name() const { return to_string(type); }
};

struct Experiment {
  Kernel kernel = Kernel::bargmann_fock();
  LatticeFamily family = LatticeFamily::FaceCenteredSquare;
  double eps = 0.5;
  EventSpec event;
  std::vector<double> scales;
  int replicates = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::size_t memory_cap = kDefaultMemoryCap;
  double confidence = 0.95;
  std::optional<FieldSource> field;

  Lattice lattice() const {
    return family == LatticeFamily::FaceCenteredSquare ? Lattice::face_centered_square(eps) : Lattice::triangular(eps);
  }

  void validate() const {
    if (replicates < 100) throw ValidationError("experiment: replicates must be >= 100");
    if (scales.empty()) throw ValidationError("experiment: empty scale grid");
    for (std::size_t k = 1; k < scales.size(); ++k)
      if (!(scales[k] > scales[k - 1])) throw ValidationError("experiment: scale grid must be strictly increasing");
    if (!(eps > 0.0)) throw ValidationError("experiment: eps must be positive");
  }
};

struct EstimateRow {
  double scale = 0.0;
  long long successes = 0;
  long long replicates = 0;
  double p_hat = 0.0;
  Interval wilson;
  double wall_time = 0.0;  // seconds
};

struct EstimateTable {
  std::string label;
  double confidence = 0.95;
  std::vector<EstimateRow> rows;

  void write_csv(std::ostream& out) const {
    out << "scale,successes,replicates,p_hat,wilson_lo,wilson_hi,wall_time\n";
    out.precision(10);
    for (const auto& r : rows)
      out << r.scale << ',' << r.successes << ',' << r.replicates << ',' << r.p_hat << ',' << r.wilson.lo << ','
          << r.wilson.hi << ',' << r.wall_time << '\n';
  }

  /// Rows without timings, for reproducibility comparisons.
  nlohmann::json to_json(bool with_time = true) const {
    nlohmann::json j;
    j["label"] = label;
    j["confidence"] = confidence;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row{{"scale", r.scale},         {"successes", r.successes},
                         {"replicates", r.replicates}, {"p_hat", r.p_hat},
                         {"wilson_lo", r.wilson.lo},   {"wilson_hi", r.wilson.hi}};
      if (with_time) row["wall_time"] = r.wall_time;
      j["rows"].push_back(row);
    }
    return j;
  }
};

inline EstimateRow make_row(double scale, long long k, long long n, double confidence, double seconds) {
  EstimateRow r;
  r.scale = scale;
  r.successes = k;
  r.replicates = n;
  r.p_hat = static_cast<double>(k) / static_cast<double>(n);
  r.wilson = wilson_interval(k, n, confidence);
  r.wall_time = seconds;
  return r;
}

/// One table row per scale. Each scale has its own stream family derived from the master seed.
inline EstimateTable run(const Experiment& ex) {
  ex.validate();
  const Lattice lat = ex.lattice();
  if (!ex.field)
    for (double s : ex.scales) check_memory(sampling_grid(lat, ex.event.region(s)), ex.memory_cap);
  std::vector<Patch> patches;
  for (double s : ex.scales) patches.push_back(enumerate(lat, ex.event.region(s)));
  EstimateTable table;
  table.label = ex.event.name();
  table.confidence = ex.confidence;
  for (std::size_t cell = 0; cell < ex.scales.size(); ++cell) {
    const auto t0 = std::chrono::steady_clock::now();
    SamplingOptions opt;
    opt.seed = stream_seed(ex.seed, cell);
    opt.threads = ex.threads;
    opt.memory_cap = ex.memory_cap;
    opt.field = ex.field;
    const double s = ex.scales[cell];
    const auto outcomes = replicate_outcomes(ex.kernel, patches[cell], ex.replicates, opt,
                                             [&](const Coloring& c, PercWorkspace& ws) -> std::uint64_t {
                                               return ex.event.evaluate(c, s, ws) ? 1 : 0;
                                             });
    long long k = 0;
    for (auto o : outcomes) k += static_cast<long long>(o);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    table.rows.push_back(make_row(s, k, ex.replicates, ex.confidence, dt));
  }
  return table;
}

// ---------------------------------------------------------------------------
// One-arm decay
// ---------------------------------------------------------------------------

/// pi(s, t) for every t in `ts` from the same replicates (one colouring of B_{max t} each).
inline EstimateTable one_arm_table(const Kernel& kernel, double eps, double s, const std::vector<double>& ts,
                                   int replicates, const SamplingOptions& opt, double confidence = 0.95,
                                   Color color = Color::Black) {
  if (ts.empty() || ts.size() > 64) throw DomainError("one_arm_table: need 1..64 outer radii");
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (!(ts[k] > s) || (k > 0 && !(ts[k] > ts[k - 1])))
      throw DomainError("one_arm_table: radii must increase and exceed s");
  const Lattice lat = Lattice::face_centered_square(eps);
  if (!opt.field) check_memory(sampling_grid(lat, centered_box(ts.back()).rect()), opt.memory_cap);
  const Patch p = enumerate(lat, centered_box(ts.back()));
  const auto t0 = std::chrono::steady_clock::now();
  const auto outcomes = replicate_outcomes(kernel, p, replicates, opt, [&](const Coloring& c, PercWorkspace& ws) {
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < ts.size(); ++k)
      if (one_arm(c, s, ts[k], color, false, &ws).occurred) bits |= std::uint64_t{1} << k;
    return bits;
  });
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EstimateTable table;
  table.label = "onearm";
  table.confidence = confidence;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    long long hits = 0;
    for (auto o : outcomes) hits += (o >> k) & 1U;
    table.rows.push_back(make_row(ts[k], hits, replicates, confidence, dt / ts.size()));
  }
  return table;
}

struct ArmPoint {
  double ratio = 0.0;  // s / t
  double p = 0.0;      // estimated pi(s, t)
  long long n = 0;     // replicates behind p; 0 means the value is exact
};

struct OneArmFit {
  double eta_hat = 0.0;
  double intercept = 0.0;
  Interval ci{0.0, 0.0};
  double confidence = 0.95;
  std::vector<std::size_t> excluded;  // input points with p = 0
  std::vector<std::string> warnings;
};

namespace detail {

inline std::pair<double, double> ls_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace detail

/// Least-squares slope of log pi against log(s/t), with a parametric bootstrap
/// (binomial resampling of every point) for the percentile interval.
inline OneArmFit fit_one_arm(const std::vector<ArmPoint>& pts, int bootstrap = 2000, std::uint64_t seed = 1,
                             double confidence = 0.95) {
  if (pts.size() < 4) throw DomainError("fit_one_arm: need at least 4 ratio points");
  OneArmFit fit;
  fit.confidence = confidence;
  std::vector<double> x, y;
  std::vector<ArmPoint> used;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!(pts[i].ratio > 0.0 && pts[i].ratio < 1.0)) throw DomainError("fit_one_arm: ratios must lie in (0,1)");
    if (pts[i].p <= 0.0) {
      fit.excluded.push_back(i);
      fit.warnings.push_back("point " + std::to_string(i) + " has pi = 0 and is excluded");
      continue;
    }
    used.push_back(pts[i]);
    x.push_back(std::log(pts[i].ratio));
    y.push_back(std::log(pts[i].p));
  }
  if (used.size() < 2) throw DomainError("fit_one_arm: fewer than 2 usable points");
  std::tie(fit.eta_hat, fit.intercept) = detail::ls_fit(x, y);

  Engine eng = make_engine(seed, 0x0a11ULL);
  std::vector<double> slopes;
  for (int b = 0; b < bootstrap; ++b) {
    std::vector<double> bx, by;
    for (std::size_t i = 0; i < used.size(); ++i) {
      double p = used[i].p;
      if (used[i].n > 0) {
        std::binomial_distribution<long long> bin(used[i].n, used[i].p);
        p = static_cast<double>(bin(eng)) / static_cast<double>(used[i].n);
      }
      if (p <= 0.0) continue;
      bx.push_back(x[i]);
      by.push_back(std::log(p));
    }
    if (bx.size() >= 2) slopes.push_back(detail::ls_fit(bx, by).first);
  }
  if (slopes.empty()) {
    fit.ci = {fit.eta_hat, fit.eta_hat};
  } else {
    fit.ci = {quantile(slopes, (1.0 - confidence) / 2.0), quantile(slopes, (1.0 + confidence) / 2.0)};
  }
  return fit;
}

inline std::vector<ArmPoint> arm_points(const EstimateTable& t, double s) {
  std::vector<ArmPoint> pts;
  for (const auto& r : t.rows) pts.push_back({s / r.scale, r.p_hat, r.replicates});
  return pts;
}

// ---------------------------------------------------------------------------
// FKG
// ---------------------------------------------------------------------------

/// An event on a fixed region, together with its monotonicity.
struct RegionEvent {
  std::string name;
  Rect region;
  bool increasing = true;
  std::function<bool(const Coloring&, PercWorkspace&)> eval;
};

inline RegionEvent crossing_event(const Quad& q, Color color = Color::Black) {
  RegionEvent e;
  e.name = std::string(color == Color::Black ? "black" : "white") + " crossing";
  e.region = q.rect;
  e.increasing = color == Color::Black;
  e.eval = [q, color](const Coloring& c, PercWorkspace& ws) { return crosses(c, q, color, false, &ws).occurred; };
  return e;
}

struct FkgResult {
  long long n = 0;
  double pA = 0.0, pB = 0.0, pAB = 0.0;
  double margin = 0.0;     // pAB - pA pB
  double se = 0.0;         // delta-method standard error of the margin
  double margin_in_se = 0.0;
};

inline FkgResult fkg_check(const Kernel& kernel, double eps, const RegionEvent& A, const RegionEvent& B, int replicates,
                           const SamplingOptions& opt) {
  if (!A.increasing || !B.increasing)
    throw ContractError("fkg_check: both events must be increasing ('" + (A.increasing ? B.name : A.name) + "' is not)");
  const Rect hull{std::min(A.region.x0, B.region.x0), std::max(A.region.x1, B.region.x1),
                  std::min(A.region.y0, B.region.y0), std::max(A.region.y1, B.region.y1)};
  const Lattice lat = Lattice::face_centered_square(eps);
  if (!opt.field) check_memory(sampling_grid(lat, hull), opt.memory_cap);
  const Patch p = enumerate(lat, hull);
  const auto out = replicate_outcomes(kernel, p, replicates, opt, [&](const Coloring& c, PercWorkspace& ws) {
    return (A.eval(c, ws) ? 1ULL : 0ULL) | (B.eval(c, ws) ? 2ULL : 0ULL);
  });
  FkgResult r;
  r.n = replicates;
  const double n = replicates;
  for (auto o : out) {
    r.pA += (o & 1U) / n;
    r.pB += ((o >> 1) & 1U) / n;
    r.pAB += (o == 3U) / n;
  }
  r.margin = r.pAB - r.pA * r.pB;
  // influence function of (pAB, pA, pB) -> pAB - pA pB
  double ss = 0.0;
  for (auto o : out) {
    const double a = o & 1U, b = (o >> 1) & 1U, ab = o == 3U;
    const double inf = (ab - r.pAB) - r.pB * (a - r.pA) - r.pA * (b - r.pB);
    ss += inf * inf;
  }
  r.se = std::sqrt(ss / (n - 1.0) / n);
  r.margin_in_se = r.se > 0.0 ? r.margin / r.se : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Positivity on small boxes
// ---------------------------------------------------------------------------

struct PositivityRow {
  double lambda = 0.0;
  std::size_t vertices = 0;
  long long successes = 0;
  double p_hat = 0.0;
  Interval wilson;
};

struct PositivityTable {
  std::vector<PositivityRow> rows;
  std::vector<std::uint64_t> outcomes;  // per replicate, bit k = positive on B_{lambda_k}

  /// Largest lambda on the grid with p_hat >= 1/2 - delta (0 if none).
  double lambda_calibrated(double delta) const {
    double best = 0.0;
    for (const auto& r : rows)
      if (r.p_hat >= 0.5 - delta) best = std::max(best, r.lambda);
    return best;
  }
};

inline PositivityTable small_box_positivity(const Kernel& kernel, const std::vector<double>& lambdas, double eps,
                                            int replicates, const SamplingOptions& opt, double confidence = 0.95) {
  if (lambdas.empty() || lambdas.size() > 64) throw DomainError("small_box_positivity: need 1..64 radii");
  for (std::size_t k = 0; k < lambdas.size(); ++k)
    if (!(lambdas[k] > 0.0 && lambdas[k] <= 1.0) || (k > 0 && !(lambdas[k] > lambdas[k - 1])))
      throw DomainError("small_box_positivity: radii must increase within (0, 1]");
  const Patch p = enumerate(Lattice::face_centered_square(eps), centered_box(lambdas.back()));
  const double tol = kGeomTol * eps;
  std::vector<int> level(p.num_vertices());  // smallest k with the vertex in B_{lambda_k}
  PositivityTable t;
  t.rows.resize(lambdas.size());
  for (std::size_t v = 0; v < p.num_vertices(); ++v) {
    const double r = sup_norm(p.positions[v]);
    level[v] = static_cast<int>(std::lower_bound(lambdas.begin(), lambdas.end(), r - tol) - lambdas.begin());
    for (std::size_t k = static_cast<std::size_t>(level[v]); k < lambdas.size(); ++k) ++t.rows[k].vertices;
  }
  t.outcomes = replicate_outcomes(kernel, p, replicates, opt, [&](const Coloring& c, PercWorkspace&) {
    int first_white = static_cast<int>(lambdas.size());
    for (std::size_t v = 0; v < c.size(); ++v)
      if (!c.black(v)) first_white = std::min(first_white, level[v]);
    // positive on B_lambda_k exactly for k < first_white
    return first_white >= 64 ? ~0ULL : ((std::uint64_t{1} << first_white) - 1);
  });
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    auto& row = t.rows[k];
    row.lambda = lambdas[k];
    for (auto o : t.outcomes) row.successes += (o >> k) & 1U;
    row.p_hat = static_cast<double>(row.successes) / replicates;
    row.wilson = wilson_interval(row.successes, replicates, confidence);
  }
  return t;
}

}  // namespace nodalperc

#endif  // NODALPERC_EXPERIMENTS_HPP
