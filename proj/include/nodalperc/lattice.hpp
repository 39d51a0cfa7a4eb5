#ifndef NODALPERC_LATTICE_HPP
#define NODALPERC_LATTICE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nodalperc/circulant.hpp"
#include "nodalperc/errors.hpp"
#include "nodalperc/geometry.hpp"

namespace nodalperc {

enum class LatticeFamily { FaceCenteredSquare, Triangular };

inline const char* to_string(LatticeFamily f) {
  return f == LatticeFamily::FaceCenteredSquare ? "fcs" : "triangular";
}

using FineCoord = std::array<int, 2>;

/// A periodic triangulation scaled by mesh eps and translated by `offset`.
///
/// Vertices are addressed by integer fine coordinates (i, j):
///  * face-centered square: position offset + eps/2 * (i, j) with i = j (mod 2);
///    even pairs are square corners, odd pairs are face centers;
///  * triangular: position offset + eps * (i + j/2, j*sqrt(3)/2).
class Lattice {
 public:
  static Lattice face_centered_square(double eps, Vec2 offset = {0.0, 0.0}) {
    return Lattice(LatticeFamily::FaceCenteredSquare, eps, offset);
  }
  static Lattice triangular(double eps, Vec2 offset = {0.0, 0.0}) {
    return Lattice(LatticeFamily::Triangular, eps, offset);
  }

  LatticeFamily family() const { return family_; }
  double mesh() const { return eps_; }
  Vec2 offset() const { return offset_; }

  /// Vertices of the unscaled pattern lie on (1/N)Z^2; 0 when no such N exists.
  int integrality() const { return family_ == LatticeFamily::FaceCenteredSquare ? 2 : 0; }

  /// Longest edge of the unscaled pattern.
  double longest_edge_unit() const { return 1.0; }
  double longest_edge() const { return eps_ * longest_edge_unit(); }

  /// Vertices per unit area.
  double density() const {
    return family_ == LatticeFamily::FaceCenteredSquare ? 2.0 / (eps_ * eps_)
                                                        : 2.0 / (std::sqrt(3.0) * eps_ * eps_);
  }

  /// Number of distinct edge directions of the pattern.
  int edge_directions() const { return family_ == LatticeFamily::FaceCenteredSquare ? 4 : 3; }

  /// Basis vectors of the fine coordinate system.
  Vec2 fine_a() const {
    return family_ == LatticeFamily::FaceCenteredSquare ? Vec2{eps_ / 2, 0.0} : Vec2{eps_, 0.0};
  }
  Vec2 fine_b() const {
    return family_ == LatticeFamily::FaceCenteredSquare ? Vec2{0.0, eps_ / 2}
                                                        : Vec2{eps_ / 2, eps_ * std::numbers::sqrt3 / 2};
  }

  Vec2 position(FineCoord c) const {
    return offset_ + static_cast<double>(c[0]) * fine_a() + static_cast<double>(c[1]) * fine_b();
  }

  bool is_vertex(FineCoord c) const {
    return family_ == LatticeFamily::Triangular || ((c[0] - c[1]) % 2 == 0);
  }

  /// Fine-coordinate steps to the neighbours of vertex c.
  std::span<const FineCoord> neighbour_steps(FineCoord c) const {
    static constexpr FineCoord corner[8] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}};
    static constexpr FineCoord tri[6] = {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}};
    if (family_ == LatticeFamily::Triangular) return {tri, 6};
    const bool is_corner = (c[0] % 2 == 0);
    return {corner, is_corner ? std::size_t{8} : std::size_t{4}};
  }

 private:
  Lattice(LatticeFamily f, double eps, Vec2 offset) : family_(f), eps_(eps), offset_(offset) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("lattice mesh must be positive and finite");
  }

  LatticeFamily family_;
  double eps_;
  Vec2 offset_;
};

/// Vertices and edges of a lattice inside a closed rectangle, together with the
/// affine sampling grid that contains every vertex.
struct Patch {
  LatticeFamily family = LatticeFamily::FaceCenteredSquare;
  double mesh = 0.0;
  double longest_edge = 0.0;
  Rect region;
  std::vector<Vec2> positions;
  std::vector<FineCoord> coords;
  std::vector<std::uint32_t> adj_offsets;  // CSR row starts, size V + 1
  std::vector<std::uint32_t> adj;          // CSR column indices
  AffineGrid grid;                         // sampling grid
  int refine = 1;                          // grid steps per fine-coordinate step
  FineCoord grid_origin{0, 0};             // fine coordinate of grid point (0, 0)
  std::vector<std::size_t> grid_index;     // vertex -> grid index

  std::size_t num_vertices() const { return positions.size(); }
  std::size_t num_edges() const { return adj.size() / 2; }

  std::span<const std::uint32_t> neighbours(std::size_t v) const {
    return {adj.data() + adj_offsets[v], adj.data() + adj_offsets[v + 1]};
  }

  /// Edges as (u, v) with u < v.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(num_edges());
    for (std::uint32_t u = 0; u < num_vertices(); ++u)
      for (std::uint32_t w : neighbours(u))
        if (u < w) out.emplace_back(u, w);
    return out;
  }

  /// Grid index of the point at fine coordinate c + t/refine * step, for 0 <= t <= refine.
  std::size_t grid_index_at(FineCoord c, FineCoord step, int t) const {
    const int i = (c[0] - grid_origin[0]) * refine + step[0] * t;
    const int j = (c[1] - grid_origin[1]) * refine + step[1] * t;
    return grid.index(i, j);
  }

  /// Number of bounded triangular faces (3-cliques), each counted once.
  std::size_t count_triangles() const {
    std::size_t count = 0;
    for (std::uint32_t u = 0; u < num_vertices(); ++u)
      for (std::uint32_t v : neighbours(u)) {
        if (v <= u) continue;
        for (std::uint32_t w : neighbours(v)) {
          if (w <= v) continue;
          for (std::uint32_t x : neighbours(u))
            if (x == w) ++count;
        }
      }
    return count;
  }
};

inline constexpr double kGeomTol = 1e-9;

struct FineRange {
  int i0 = 0, i1 = -1, j0 = 0, j1 = -1;
  bool empty() const { return i1 < i0 || j1 < j0; }
};

/// Bounding range of fine coordinates whose positions can lie in the closed rectangle.
inline FineRange fine_range(const Lattice& lat, const Rect& rect) {
  if (!(rect.x1 >= rect.x0) || !(rect.y1 >= rect.y0)) throw DomainError("enumerate: malformed rectangle");
  const double tol = kGeomTol * lat.mesh();
  const Vec2 a = lat.fine_a(), b = lat.fine_b();
  const Vec2 o = lat.offset();
  FineRange r;
  // The b axis is vertical in both families.
  r.j0 = static_cast<int>(std::ceil((rect.y0 - o.y - tol) / b.y));
  r.j1 = static_cast<int>(std::floor((rect.y1 - o.y + tol) / b.y));
  bool first = true;
  for (int j : {r.j0, r.j1}) {
    const double shift = o.x + j * b.x;
    const int lo = static_cast<int>(std::ceil((rect.x0 - shift - tol) / a.x));
    const int hi = static_cast<int>(std::floor((rect.x1 - shift + tol) / a.x));
    r.i0 = first ? lo : std::min(r.i0, lo);
    r.i1 = first ? hi : std::max(r.i1, hi);
    first = false;
  }
  return r;
}

/// The sampling grid that enumerate(lat, rect, refine) would produce, without building the patch.
inline AffineGrid sampling_grid(const Lattice& lat, const Rect& rect, int refine = 1) {
  if (refine < 1) throw DomainError("enumerate: refine must be >= 1");
  const FineRange r = fine_range(lat, rect);
  if (r.empty()) return AffineGrid{lat.offset(), lat.fine_a(), lat.fine_b(), 0, 0};
  const int n1 = r.i1 - r.i0 + 1, n2 = r.j1 - r.j0 + 1;
  return AffineGrid{lat.position({r.i0, r.j0}), (1.0 / refine) * lat.fine_a(), (1.0 / refine) * lat.fine_b(),
                    (n1 - 1) * refine + 1, (n2 - 1) * refine + 1};
}

/// Enumerates the lattice inside the closed rectangle. `refine` > 1 makes the sampling
/// grid finer than the fine-coordinate grid by that factor (used for edge subsampling).
inline Patch enumerate(const Lattice& lat, const Rect& rect, int refine = 1) {
  Patch p;
  p.family = lat.family();
  p.mesh = lat.mesh();
  p.longest_edge = lat.longest_edge();
  p.region = rect;
  p.refine = refine;
  const double tol = kGeomTol * lat.mesh();
  p.grid = sampling_grid(lat, rect, refine);
  const FineRange range = fine_range(lat, rect);
  if (range.empty()) {
    p.adj_offsets.assign(1, 0);
    return p;
  }
  const int i0 = range.i0, i1 = range.i1, j0 = range.j0, j1 = range.j1;
  const int n2 = j1 - j0 + 1;
  p.grid_origin = {i0, j0};

  std::vector<std::int32_t> slot(static_cast<std::size_t>(i1 - i0 + 1) * n2, -1);
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j) {
      const FineCoord c{i, j};
      if (!lat.is_vertex(c)) continue;
      const Vec2 x = lat.position(c);
      if (!rect.contains(x, tol)) continue;
      slot[static_cast<std::size_t>(i - i0) * n2 + (j - j0)] = static_cast<std::int32_t>(p.positions.size());
      p.positions.push_back(x);
      p.coords.push_back(c);
      p.grid_index.push_back(p.grid.index((i - i0) * refine, (j - j0) * refine));
    }

  p.adj_offsets.reserve(p.positions.size() + 1);
  p.adj_offsets.push_back(0);
  for (const FineCoord& c : p.coords) {
    for (const FineCoord& d : lat.neighbour_steps(c)) {
      const int i = c[0] + d[0], j = c[1] + d[1];
      if (i < i0 || i > i1 || j < j0 || j > j1) continue;
      const std::int32_t w = slot[static_cast<std::size_t>(i - i0) * n2 + (j - j0)];
      if (w >= 0) p.adj.push_back(static_cast<std::uint32_t>(w));
    }
    p.adj_offsets.push_back(static_cast<std::uint32_t>(p.adj.size()));
  }
  return p;
}

inline Patch enumerate(const Lattice& lat, const Box& box, int refine = 1) {
  if (!(box.half_side > 0.0)) throw DomainError("enumerate: box half_side must be positive");
  return enumerate(lat, box.rect(), refine);
}

inline void write_edges_csv(const Patch& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write edge list '" + path + "'");
  out << "u,v,xu,yu,xv,yv\n" << std::setprecision(17);
  for (auto [u, v] : p.edges())
    out << u << ',' << v << ',' << p.positions[u].x << ',' << p.positions[u].y << ',' << p.positions[v].x << ','
        << p.positions[v].y << '\n';
}

struct SymmetryReport {
  bool reflection_ok = true;
  bool rotation_ok = true;
  std::optional<Vec2> reflection_witness;
  std::optional<Vec2> rotation_witness;
  bool passed() const { return reflection_ok && rotation_ok; }
};

/// Checks that the vertex and edge sets inside `box` are invariant under reflection in the
/// horizontal line through the box center and under the quarter turn about that center.
inline SymmetryReport symmetry_audit(const Lattice& lat, const Box& box) {
  const Patch p = enumerate(lat, box);
  const double q = lat.mesh() * 1e-6;
  auto key = [&](Vec2 x) {
    return std::pair<long long, long long>{std::llround(x.x / q), std::llround(x.y / q)};
  };
  std::map<std::pair<long long, long long>, std::uint32_t> index;
  for (std::uint32_t v = 0; v < p.num_vertices(); ++v) index.emplace(key(p.positions[v]), v);
  const Vec2 c = box.center;
  auto find = [&](Vec2 x) -> std::optional<std::uint32_t> {
    auto it = index.find(key(x));
    if (it == index.end()) return std::nullopt;
    return it->second;
  };
  auto adjacent = [&](std::uint32_t u, std::uint32_t v) {
    for (std::uint32_t w : p.neighbours(u))
      if (w == v) return true;
    return false;
  };
  auto audit = [&](auto map_point, bool& ok, std::optional<Vec2>& witness) {
    for (std::uint32_t v = 0; v < p.num_vertices() && ok; ++v) {
      auto img = find(map_point(p.positions[v]));
      if (!img) {
        ok = false;
        witness = p.positions[v];
        break;
      }
      for (std::uint32_t w : p.neighbours(v)) {
        auto img_w = find(map_point(p.positions[w]));
        if (!img_w || !adjacent(*img, *img_w)) {
          ok = false;
          witness = p.positions[v];
          break;
        }
      }
    }
  };
  SymmetryReport r;
  audit([&](Vec2 x) { return Vec2{x.x, 2.0 * c.y - x.y}; }, r.reflection_ok, r.reflection_witness);
  audit([&](Vec2 x) { return Vec2{c.x - (x.y - c.y), c.y + (x.x - c.x)}; }, r.rotation_ok, r.rotation_witness);
  return r;
}

}  // namespace nodalperc

#endif  // NODALPERC_LATTICE_HPP
