#ifndef NODALPERC_GEOMETRY_HPP
#define NODALPERC_GEOMETRY_HPP

#include <algorithm>
#include <cmath>

namespace nodalperc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double sup_norm(Vec2 a) { return std::max(std::abs(a.x), std::abs(a.y)); }

/// Axis-aligned closed rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }

  bool contains(Vec2 p, double tol = 0.0) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
  }
  bool contains(const Rect& r, double tol = 0.0) const {
    return r.x0 >= x0 - tol && r.x1 <= x1 + tol && r.y0 >= y0 - tol && r.y1 <= y1 + tol;
  }
};

/// Square box of the given half side, B_s translated to `center`.
struct Box {
  Vec2 center;
  double half_side = 1.0;

  Rect rect() const {
    return {center.x - half_side, center.x + half_side, center.y - half_side,
            center.y + half_side};
  }
};

inline Box centered_box(double half_side) { return Box{{0.0, 0.0}, half_side}; }

}  // namespace nodalperc

#endif  // NODALPERC_GEOMETRY_HPP
