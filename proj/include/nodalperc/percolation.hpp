#ifndef NODALPERC_PERCOLATION_HPP
#define NODALPERC_PERCOLATION_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "nodalperc/coloring.hpp"
#include "nodalperc/errors.hpp"
#include "nodalperc/geometry.hpp"
#include "nodalperc/union_find.hpp"

namespace nodalperc {

enum class SidePair { LeftRight, TopBottom };

struct Quad {
  Rect rect;
  SidePair side_pair = SidePair::LeftRight;

  Quad(Rect r, SidePair sp = SidePair::LeftRight) : rect(r), side_pair(sp) {
    if (!(r.x0 < r.x1) || !(r.y0 < r.y1)) throw DomainError("quad: need x0 < x1 and y0 < y1");
  }
};

enum class EventKind { Crossing, Circuit, H, X, OneArm, QuadNodal };

struct PercResult {
  EventKind event = EventKind::Crossing;
  bool occurred = false;
  std::optional<std::vector<std::uint32_t>> witness;  // vertex path, when requested and occurred

  explicit operator bool() const { return occurred; }
};

/// Reusable scratch space for cluster labelling.
struct PercWorkspace {
  UnionFind uf;
  std::vector<std::uint8_t> active;
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;

  void prepare(std::size_t n) {
    uf.reset(n);
    active.assign(n, 0);
    if (stamp.size() != n) {
      stamp.assign(n, 0);
      epoch = 0;
    }
  }
  std::uint32_t next_epoch() {
    if (++epoch == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
    return epoch;
  }
};

namespace detail {

inline double strip_width(const Patch& p) { return p.longest_edge / 2.0 - kGeomTol * p.mesh; }
inline double region_tol(const Patch& p) { return kGeomTol * p.mesh; }

inline void require_inside(const Coloring& c, const Rect& r, const char* what) {
  if (!c.patch().region.contains(r, region_tol(c.patch())))
    throw DomainError(std::string(what) + ": query region exceeds the coloured patch");
}

/// Labels the clusters of colour `color` among vertices satisfying `in_region`.
template <class InRegion>
void label_clusters(const Coloring& c, Color color, InRegion in_region, PercWorkspace& ws) {
  const Patch& p = c.patch();
  const std::size_t n = p.num_vertices();
  ws.prepare(n);
  for (std::size_t v = 0; v < n; ++v) ws.active[v] = c.is(v, color) && in_region(p.positions[v]);
  for (std::uint32_t v = 0; v < n; ++v) {
    if (!ws.active[v]) continue;
    for (std::uint32_t w : p.neighbours(v))
      if (w > v && ws.active[w]) ws.uf.unite(v, w);
  }
}

/// After label_clusters: is some source vertex in the cluster of some target vertex?
template <class Source, class Target>
bool clusters_connect(const Coloring& c, Source source, Target target, PercWorkspace& ws) {
  const Patch& p = c.patch();
  const std::uint32_t e = ws.next_epoch();
  bool any_source = false;
  for (std::uint32_t v = 0; v < p.num_vertices(); ++v)
    if (ws.active[v] && source(p.positions[v])) {
      ws.stamp[ws.uf.find(v)] = e;
      any_source = true;
    }
  if (!any_source) return false;
  for (std::uint32_t v = 0; v < p.num_vertices(); ++v)
    if (ws.active[v] && target(p.positions[v]) && ws.stamp[ws.uf.find(v)] == e) return true;
  return false;
}

/// Shortest active path from a source vertex to a target vertex (breadth-first).
template <class Source, class Target>
std::vector<std::uint32_t> find_path(const Coloring& c, Source source, Target target, const PercWorkspace& ws) {
  const Patch& p = c.patch();
  const std::size_t n = p.num_vertices();
  constexpr std::uint32_t none = ~std::uint32_t{0};
  std::vector<std::uint32_t> prev(n, none);
  std::vector<std::uint8_t> seen(n, 0);
  std::deque<std::uint32_t> queue;
  for (std::uint32_t v = 0; v < n; ++v)
    if (ws.active[v] && source(p.positions[v])) {
      seen[v] = 1;
      queue.push_back(v);
    }
  while (!queue.empty()) {
    const std::uint32_t v = queue.front();
    queue.pop_front();
    if (target(p.positions[v])) {
      std::vector<std::uint32_t> path;
      for (std::uint32_t x = v; x != none; x = prev[x]) path.push_back(x);
      return {path.rbegin(), path.rend()};
    }
    for (std::uint32_t w : p.neighbours(v))
      if (ws.active[w] && !seen[w]) {
        seen[w] = 1;
        prev[w] = v;
        queue.push_back(w);
      }
  }
  return {};
}

template <class InRegion, class Source, class Target>
PercResult connection_event(EventKind kind, const Coloring& c, Color color, InRegion in_region, Source source,
                            Target target, bool want_witness, PercWorkspace* ws_in) {
  PercWorkspace local;
  PercWorkspace& ws = ws_in ? *ws_in : local;
  label_clusters(c, color, in_region, ws);
  PercResult r;
  r.event = kind;
  r.occurred = clusters_connect(c, source, target, ws);
  if (r.occurred && want_witness) r.witness = find_path(c, source, target, ws);
  return r;
}

}  // namespace detail

/// Same-coloured path inside the closed rectangle joining the entering side strip to the
/// exiting one. A side strip holds the vertices closer to that side than half the longest edge.
inline PercResult crosses(const Coloring& c, const Quad& q, Color color = Color::Black, bool want_witness = false,
                          PercWorkspace* ws = nullptr) {
  detail::require_inside(c, q.rect, "crosses");
  const Patch& p = c.patch();
  const double h = detail::strip_width(p), tol = detail::region_tol(p);
  const Rect r = q.rect;
  auto in = [&](Vec2 x) { return r.contains(x, tol); };
  if (q.side_pair == SidePair::LeftRight)
    return detail::connection_event(
        EventKind::Crossing, c, color, in, [&](Vec2 x) { return x.x - r.x0 < h; },
        [&](Vec2 x) { return r.x1 - x.x < h; }, want_witness, ws);
  return detail::connection_event(
      EventKind::Crossing, c, color, in, [&](Vec2 x) { return r.y1 - x.y < h; },
      [&](Vec2 x) { return x.y - r.y0 < h; }, want_witness, ws);
}

/// Circuit of `color` in the closed annulus B_t \ int B_s around `center`, decided by the
/// absence of an opposite-coloured path from the inner boundary strip to the outer one.
inline PercResult circuit(const Coloring& c, double s, double t, Color color = Color::Black,
                          Vec2 center = {0.0, 0.0}, PercWorkspace* ws = nullptr) {
  if (!(s > 0.0) || !(s < t)) throw DomainError("circuit: need 0 < s < t");
  detail::require_inside(c, Box{center, t}.rect(), "circuit");
  const Patch& p = c.patch();
  const double h = detail::strip_width(p), tol = detail::region_tol(p);
  auto radius = [&](Vec2 x) { return sup_norm(x - center); };
  PercResult r = detail::connection_event(
      EventKind::Circuit, c, opposite(color),
      [&](Vec2 x) {
        const double d = radius(x);
        return d >= s - tol && d <= t + tol;
      },
      [&](Vec2 x) { return radius(x) - s < h; }, [&](Vec2 x) { return t - radius(x) < h; }, false, ws);
  r.occurred = !r.occurred;
  return r;
}

/// Black path in B_{s/2} from the left side to {s/2} x [alpha, beta].
inline PercResult event_H(const Coloring& c, double s, double alpha, double beta, bool want_witness = false,
                          PercWorkspace* ws = nullptr) {
  const double half = s / 2.0;
  if (!(s > 0.0) || !(-half <= alpha && alpha <= beta && beta <= half))
    throw DomainError("event_H: need -s/2 <= alpha <= beta <= s/2");
  detail::require_inside(c, centered_box(half).rect(), "event_H");
  const Patch& p = c.patch();
  const double h = detail::strip_width(p), tol = detail::region_tol(p);
  return detail::connection_event(
      EventKind::H, c, Color::Black, [&](Vec2 x) { return sup_norm(x) <= half + tol; },
      [&](Vec2 x) { return x.x + half < h; },
      [&](Vec2 x) { return half - x.x < h && x.y >= alpha - tol && x.y <= beta + tol; }, want_witness, ws);
}

/// Black cluster in B_{s/2} meeting all four boundary pieces {-s/2} x [-s/2, -alpha],
/// {-s/2} x [alpha, s/2], {s/2} x [-s/2, -alpha] and {s/2} x [alpha, s/2]: it contains the
/// left connector, the right connector and a bridge between them.
inline PercResult event_X(const Coloring& c, double s, double alpha, PercWorkspace* ws_in = nullptr) {
  const double half = s / 2.0;
  if (!(s > 0.0) || !(alpha >= 0.0 && alpha <= half)) throw DomainError("event_X: need 0 <= alpha <= s/2");
  detail::require_inside(c, centered_box(half).rect(), "event_X");
  const Patch& p = c.patch();
  const double h = detail::strip_width(p), tol = detail::region_tol(p);
  PercWorkspace local;
  PercWorkspace& ws = ws_in ? *ws_in : local;
  detail::label_clusters(c, Color::Black, [&](Vec2 x) { return sup_norm(x) <= half + tol; }, ws);
  std::vector<std::uint8_t> mask(p.num_vertices(), 0);
  for (std::uint32_t v = 0; v < p.num_vertices(); ++v) {
    if (!ws.active[v]) continue;
    const Vec2 x = p.positions[v];
    std::uint8_t m = 0;
    const bool left = x.x + half < h, right = half - x.x < h;
    const bool low = x.y <= -alpha + tol, high = x.y >= alpha - tol;
    if (left && low) m |= 1;
    if (left && high) m |= 2;
    if (right && low) m |= 4;
    if (right && high) m |= 8;
    if (m) mask[ws.uf.find(v)] |= m;
  }
  PercResult r;
  r.event = EventKind::X;
  for (std::uint8_t m : mask)
    if (m == 15) r.occurred = true;
  return r;
}

/// Same-coloured path from the closed box B_s to the strip along the boundary of B_t, inside B_t.
inline PercResult one_arm(const Coloring& c, double s, double t, Color color = Color::Black,
                          bool want_witness = false, PercWorkspace* ws = nullptr) {
  if (!(s > 0.0) || !(s < t)) throw DomainError("one_arm: need 0 < s < t");
  detail::require_inside(c, centered_box(t).rect(), "one_arm");
  const Patch& p = c.patch();
  const double h = detail::strip_width(p), tol = detail::region_tol(p);
  return detail::connection_event(
      EventKind::OneArm, c, color, [&](Vec2 x) { return sup_norm(x) <= t + tol; },
      [&](Vec2 x) { return sup_norm(x) <= s + tol; }, [&](Vec2 x) { return t - sup_norm(x) < h; }, want_witness,
      ws);
}

/// One-arm events for several outer radii from a single labelling of B_{t_max}.
/// The result for t uses the region B_t, so each entry equals one_arm(c, s, t).
inline std::vector<bool> one_arm_profile(const Coloring& c, double s, const std::vector<double>& ts,
                                         Color color = Color::Black, PercWorkspace* ws = nullptr) {
  std::vector<bool> out;
  out.reserve(ts.size());
  for (double t : ts) out.push_back(one_arm(c, s, t, color, false, ws).occurred);
  return out;
}

/// Black left-right crossing of the upper part of the quad and white left-right crossing of
/// the lower part, the two parts separated by a horizontal band of height `gap`. A nodal
/// line crossing the quad is trapped between the two paths.
inline PercResult quad_nodal_crossing(const Coloring& c, const Quad& q, double gap, PercWorkspace* ws = nullptr) {
  if (!(gap > 0.0)) throw DomainError("quad_nodal_crossing: gap must be positive");
  const Rect r = q.rect;
  const double band = (r.height() - gap) / 2.0;
  if (!(band >= c.patch().mesh)) throw DomainError("quad_nodal_crossing: quad too small for the requested gap");
  const Rect upper{r.x0, r.x1, r.y1 - band, r.y1};
  const Rect lower{r.x0, r.x1, r.y0, r.y0 + band};
  PercResult res;
  res.event = EventKind::QuadNodal;
  res.occurred = crosses(c, Quad(upper), Color::Black, false, ws).occurred &&
                 crosses(c, Quad(lower), Color::White, false, ws).occurred;
  return res;
}

}  // namespace nodalperc

#endif  // NODALPERC_PERCOLATION_HPP
