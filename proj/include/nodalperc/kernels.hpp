#ifndef NODALPERC_KERNELS_HPP
#define NODALPERC_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nodalperc/bessel.hpp"
#include "nodalperc/errors.hpp"
#include "nodalperc/geometry.hpp"

namespace nodalperc {

enum class KernelFamily { BargmannFock, BesselWave, KostlanRescaled, Tabulated };

/// Declared polynomial decay |K(x)| <= beta |x|^-alpha. The constant is
/// kept as log(beta) since useful values exceed the double range.
struct DecayBound {
  double alpha = 0.0;
  double log_beta = 0.0;
};

/// Stationary, isotropic covariance K with K(0) = 1.
class Kernel {
 public:
  static Kernel bargmann_fock() { return Kernel(KernelFamily::BargmannFock); }

  static Kernel bessel_wave() { return Kernel(KernelFamily::BesselWave); }

  /// Rescaled Kostlan ensemble of degree d. Its finite-d covariance is not
  /// stationary; evaluation returns the d -> infinity limit and
  /// approximate() reports true. Exact sampling goes through sample_kostlan.
  static Kernel kostlan(int degree) {
    if (degree < 1) throw ValidationError("kostlan degree must be >= 1");
    Kernel k(KernelFamily::KostlanRescaled);
    k.degree_ = degree;
    return k;
  }

  /// Radial table (r_k, K(r_k)), linearly interpolated, zero past the last radius.
  static Kernel tabulated(std::vector<double> radii, std::vector<double> values) {
    if (radii.empty() || radii.size() != values.size())
      throw ValidationError("tabulated kernel: radii and values must be non-empty and equal length");
    if (radii.front() != 0.0) throw ValidationError("tabulated kernel: first radius must be 0");
    for (std::size_t i = 1; i < radii.size(); ++i)
      if (!(radii[i] > radii[i - 1]))
        throw ValidationError("tabulated kernel: radii must be strictly increasing");
    if (std::abs(values.front() - 1.0) > 1e-12)
      throw ValidationError("tabulated kernel: K(0) must equal 1");
    for (double v : values)
      if (!(std::abs(v) <= 1.0)) throw ValidationError("tabulated kernel: |K| must be <= 1");
    Kernel k(KernelFamily::Tabulated);
    k.radii_ = std::move(radii);
    k.values_ = std::move(values);
    return k;
  }

  Kernel& with_decay(double alpha, double log_beta) {
    if (!(alpha >= 0.0)) throw ValidationError("decay exponent alpha must be >= 0");
    decay_ = DecayBound{alpha, log_beta};
    return *this;
  }

  KernelFamily family() const { return family_; }
  int degree() const { return degree_; }
  const std::optional<DecayBound>& decay() const { return decay_; }
  bool approximate() const { return family_ == KernelFamily::KostlanRescaled; }
  bool stationary() const { return family_ != KernelFamily::KostlanRescaled; }
  const std::vector<double>& table_radii() const { return radii_; }

  double operator()(Vec2 dx) const { return radial(norm(dx)); }

  double radial(double r) const {
    r = std::abs(r);
    switch (family_) {
      case KernelFamily::BargmannFock:
      case KernelFamily::KostlanRescaled:
        return std::exp(-0.5 * r * r);
      case KernelFamily::BesselWave:
        return bessel_j0(r);
      case KernelFamily::Tabulated:
        return interpolate(r);
    }
    return 0.0;
  }

  /// log|K(r)|, exact for the Gaussian kernel even where K underflows.
  double log_abs_radial(double r) const {
    if (family_ == KernelFamily::BargmannFock || family_ == KernelFamily::KostlanRescaled)
      return -0.5 * r * r;
    const double v = std::abs(radial(r));
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  }

  std::string name() const {
    switch (family_) {
      case KernelFamily::BargmannFock: return "bf";
      case KernelFamily::BesselWave: return "bessel";
      case KernelFamily::KostlanRescaled: return "kostlan:" + std::to_string(degree_);
      case KernelFamily::Tabulated: return "table";
    }
    return "?";
  }

 private:
  explicit Kernel(KernelFamily f) : family_(f) {}

  double interpolate(double r) const {
    if (r > radii_.back()) return 0.0;
    const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
    const std::size_t hi = static_cast<std::size_t>(it - radii_.begin());
    if (hi == 0) return values_.front();
    if (hi >= radii_.size()) return values_.back();
    const std::size_t lo = hi - 1;
    const double t = (r - radii_[lo]) / (radii_[hi] - radii_[lo]);
    return values_[lo] + t * (values_[hi] - values_[lo]);
  }

  KernelFamily family_;
  int degree_ = 0;
  std::vector<double> radii_;
  std::vector<double> values_;
  std::optional<DecayBound> decay_;
};

inline double kernel_eval(const Kernel& k, Vec2 dx) { return k(dx); }

struct DecayReport {
  double max_ratio = 0.0;          // max_r |K(r)| r^alpha / beta
  double worst_radius = 0.0;
  std::vector<double> ratios;      // one per requested radius
};

/// Checks the declared envelope |K(r)| <= beta r^-alpha on the given radii.
inline DecayReport decay_check(const Kernel& k, const std::vector<double>& radii) {
  if (!k.decay()) throw UnsupportedError("decay_check: kernel '" + k.name() + "' has no decay metadata");
  const DecayBound d = *k.decay();
  DecayReport rep;
  rep.ratios.reserve(radii.size());
  double best = -std::numeric_limits<double>::infinity();
  for (double r : radii) {
    if (!(r >= 1.0)) throw DomainError("decay_check: radii must be >= 1");
    const double log_ratio = k.log_abs_radial(r) + d.alpha * std::log(r) - d.log_beta;
    const double ratio = std::exp(log_ratio);
    rep.ratios.push_back(ratio);
    if (log_ratio > best) {
      best = log_ratio;
      rep.worst_radius = r;
    }
  }
  rep.max_ratio = radii.empty() ? 0.0 : std::exp(best);
  return rep;
}

/// Loads a two-column CSV (radius, value); '#' lines and a non-numeric header are skipped.
inline Kernel load_tabulated_kernel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open kernel table '" + path + "'");
  std::vector<double> radii, values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double r, v;
    if (!(ss >> r >> v)) {
      if (radii.empty() && lineno == 1) continue;  // header
      throw ValidationError("kernel table '" + path + "': bad line " + std::to_string(lineno));
    }
    radii.push_back(r);
    values.push_back(v);
  }
  return Kernel::tabulated(std::move(radii), std::move(values));
}

/// Parses "bf", "bessel", "kostlan:<d>", or "table:<path>".
inline Kernel parse_kernel(const std::string& spec) {
  if (spec == "bf" || spec == "bargmann-fock") return Kernel::bargmann_fock();
  if (spec == "bessel" || spec == "wave") return Kernel::bessel_wave();
  if (spec.rfind("kostlan:", 0) == 0) {
    int d = 0;
    try {
      d = std::stoi(spec.substr(8));
    } catch (const std::exception&) {
      throw ValidationError("kernel: bad kostlan degree in '" + spec + "'");
    }
    return Kernel::kostlan(d);
  }
  if (spec.rfind("table:", 0) == 0) return load_tabulated_kernel(spec.substr(6));
  throw ValidationError("kernel: unknown kernel spec '" + spec + "'");
}

}  // namespace nodalperc

#endif  // NODALPERC_KERNELS_HPP
