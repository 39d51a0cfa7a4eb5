#ifndef NODALPERC_TOWER_HPP
#define NODALPERC_TOWER_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <sstream>
#include <string>

#include "nodalperc/errors.hpp"

namespace nodalperc {

/// A real number of the form exp(exp(...exp(top))) with `height` exponentials.
///
/// Height 0 holds an ordinary double of either sign. Height >= 1 holds a positive number
/// beyond the double range; in canonical form its top is at least log(DBL_MAX), so
/// comparison is by height first and top second.
class Tower {
 public:
  static constexpr double kLogMax = 709.782712893384;  // log(DBL_MAX)

  constexpr Tower() = default;
  constexpr Tower(double x) : top_(x) {}  // NOLINT: implicit on purpose

  static Tower iterated_exp(int height, double top) {
    Tower t;
    t.top_ = top;
    t.height_ = 0;
    for (int k = 0; k < height; ++k) t = t.exp();
    return t;
  }

  int height() const { return height_; }
  double top() const { return top_; }
  bool finite_double() const { return height_ == 0; }

  /// Value as a double; +inf when beyond range.
  double to_double() const { return height_ == 0 ? top_ : std::numeric_limits<double>::infinity(); }

  Tower exp() const {
    if (height_ == 0 && top_ < kLogMax) return Tower(std::exp(top_));
    Tower t = *this;
    ++t.height_;
    return t;
  }

  Tower log() const {
    if (height_ == 0) {
      if (!(top_ > 0.0)) throw DomainError("Tower::log of a non-positive value");
      return Tower(std::log(top_));
    }
    Tower t = *this;
    --t.height_;
    return t;
  }

  friend Tower operator+(const Tower& a, const Tower& b) {
    if (a.height_ == 0 && b.height_ == 0) return Tower(a.top_ + b.top_);
    const Tower& big = a >= b ? a : b;
    const Tower& small = a >= b ? b : a;
    if (big.height_ == 1) {
      // exp(t) + y = exp(t + log1p(y e^{-t}))
      if (small.height_ == 0) return iterated_exp(1, big.top_ + std::log1p(small.top_ * std::exp(-big.top_)));
      return iterated_exp(1, big.top_ + std::log1p(std::exp(small.top_ - big.top_)));
    }
    // A value of height >= 2 absorbs anything not larger than itself, up to a factor 2,
    // whose effect on the top is below double resolution.
    return big;
  }

  /// Product of two positive values.
  friend Tower operator*(const Tower& a, const Tower& b) {
    if (a.height_ == 0 && b.height_ == 0) {
      const double p = a.top_ * b.top_;
      if (std::isfinite(p)) return Tower(p);
    }
    if (!(a.positive() && b.positive())) throw DomainError("Tower product needs positive factors");
    return (a.log() + b.log()).exp();
  }

  /// x^p for x > 0 and p > 0.
  Tower pow(double p) const {
    if (!(p > 0.0)) throw DomainError("Tower::pow needs a positive exponent");
    if (height_ == 0) {
      const double v = std::pow(top_, p);
      if (std::isfinite(v)) return Tower(v);
    }
    const Tower l = log();
    if (l.height_ == 0) return Tower(p * l.top_).exp();
    return (Tower(p) * l).exp();
  }

  bool positive() const { return height_ > 0 || top_ > 0.0; }

  friend std::partial_ordering operator<=>(const Tower& a, const Tower& b) {
    if (a.height_ != b.height_) {
      // heights >= 1 exceed every double
      return a.height_ <=> b.height_;
    }
    return a.top_ <=> b.top_;
  }
  friend bool operator==(const Tower& a, const Tower& b) { return a.height_ == b.height_ && a.top_ == b.top_; }

  friend Tower max(const Tower& a, const Tower& b) { return a >= b ? a : b; }

  std::string str() const {
    std::ostringstream os;
    os.precision(17);
    if (height_ == 0) {
      os << top_;
    } else {
      os << "exp^" << height_ << "(" << top_ << ")";
    }
    return os.str();
  }

 private:
  double top_ = 0.0;
  int height_ = 0;
};

}  // namespace nodalperc

#endif  // NODALPERC_TOWER_HPP
