#ifndef NODALPERC_COLORING_HPP
#define NODALPERC_COLORING_HPP

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nodalperc/errors.hpp"
#include "nodalperc/field_sample.hpp"
#include "nodalperc/lattice.hpp"

namespace nodalperc {

enum class Color : std::uint8_t { White = 0, Black = 1 };

inline Color opposite(Color c) { return c == Color::Black ? Color::White : Color::Black; }

/// Sign colouring of the vertices of a patch: black iff the field value is > 0.
/// Holds a non-owning pointer to the patch, which must outlive the colouring.
class Coloring {
 public:
  Coloring(const Patch& patch, std::vector<std::uint8_t> black) : patch_(&patch), black_(std::move(black)) {
    if (black_.size() != patch.num_vertices())
      throw AlignmentError("colouring has " + std::to_string(black_.size()) + " bits for " +
                           std::to_string(patch.num_vertices()) + " vertices");
  }

  static Coloring uniform(const Patch& patch, Color c) {
    return Coloring(patch, std::vector<std::uint8_t>(patch.num_vertices(), c == Color::Black));
  }

  const Patch& patch() const { return *patch_; }
  std::size_t size() const { return black_.size(); }
  bool black(std::size_t v) const { return black_[v] != 0; }
  Color color(std::size_t v) const { return black_[v] ? Color::Black : Color::White; }
  bool is(std::size_t v, Color c) const { return (black_[v] != 0) == (c == Color::Black); }
  void set(std::size_t v, Color c) { black_[v] = (c == Color::Black); }
  const std::vector<std::uint8_t>& bits() const { return black_; }

  /// An edge is black when both endpoints are.
  bool edge_is(std::size_t u, std::size_t v, Color c) const { return is(u, c) && is(v, c); }

  friend bool operator==(const Coloring& a, const Coloring& b) {
    return a.patch_ == b.patch_ && a.black_ == b.black_;
  }

 private:
  const Patch* patch_;
  std::vector<std::uint8_t> black_;
};

/// Colours from values listed in vertex order.
inline Coloring colorize_values(const Patch& patch, std::span<const double> values) {
  if (values.size() != patch.num_vertices())
    throw AlignmentError("colorize: " + std::to_string(values.size()) + " values for " +
                         std::to_string(patch.num_vertices()) + " vertices");
  std::vector<std::uint8_t> bits(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) bits[v] = values[v] > 0.0;
  return Coloring(patch, std::move(bits));
}

/// Colours from values on the patch's sampling grid.
inline Coloring colorize_grid(const Patch& patch, std::span<const double> grid_values) {
  if (grid_values.size() != patch.grid.size())
    throw AlignmentError("colorize: grid holds " + std::to_string(grid_values.size()) + " values, expected " +
                         std::to_string(patch.grid.size()));
  std::vector<std::uint8_t> bits(patch.num_vertices());
  for (std::size_t v = 0; v < bits.size(); ++v) bits[v] = grid_values[patch.grid_index[v]] > 0.0;
  return Coloring(patch, std::move(bits));
}

/// Colours from a sample whose points are exactly the patch vertices, in order.
inline Coloring colorize(const Patch& patch, const FieldSample& sample) {
  if (sample.points.size() != patch.num_vertices())
    throw AlignmentError("colorize: sample has " + std::to_string(sample.points.size()) + " points, patch has " +
                         std::to_string(patch.num_vertices()) + " vertices");
  const double tol = kGeomTol * patch.mesh * 10.0;
  for (std::size_t v = 0; v < sample.points.size(); ++v) {
    const Vec2 d = sample.points[v] - patch.positions[v];
    if (sup_norm(d) > tol) throw AlignmentError("colorize: sample point " + std::to_string(v) + " is not vertex " +
                                                std::to_string(v));
  }
  return colorize_values(patch, sample.values);
}

inline Coloring exchange(const Coloring& c) {
  std::vector<std::uint8_t> bits(c.bits());
  for (auto& b : bits) b = !b;
  return Coloring(c.patch(), std::move(bits));
}

/// Plain PBM (P1) image on the fine-coordinate grid: 1 for black vertices, 0 elsewhere.
/// Row 0 is the top of the patch.
inline void write_pbm(const Coloring& c, const std::string& path) {
  const Patch& p = c.patch();
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write bitmap '" + path + "'");
  if (p.num_vertices() == 0) {
    out << "P1\n0 0\n";
    return;
  }
  int i0 = p.coords[0][0], i1 = i0, j0 = p.coords[0][1], j1 = j0;
  for (const FineCoord& k : p.coords) {
    i0 = std::min(i0, k[0]);
    i1 = std::max(i1, k[0]);
    j0 = std::min(j0, k[1]);
    j1 = std::max(j1, k[1]);
  }
  const int w = i1 - i0 + 1, h = j1 - j0 + 1;
  std::vector<char> img(static_cast<std::size_t>(w) * h, '0');
  for (std::size_t v = 0; v < p.num_vertices(); ++v)
    if (c.black(v)) img[static_cast<std::size_t>(j1 - p.coords[v][1]) * w + (p.coords[v][0] - i0)] = '1';
  out << "P1\n" << w << ' ' << h << '\n';
  for (int r = 0; r < h; ++r) {
    for (int q = 0; q < w; ++q) out << img[static_cast<std::size_t>(r) * w + q] << (q + 1 < w ? " " : "");
    out << '\n';
  }
}

}  // namespace nodalperc

#endif  // NODALPERC_COLORING_HPP
