#ifndef NODALPERC_FIELD_SAMPLE_HPP
#define NODALPERC_FIELD_SAMPLE_HPP

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "nodalperc/errors.hpp"
#include "nodalperc/geometry.hpp"

namespace nodalperc {

enum class SampleMethod { Cholesky, Circulant, Series, Kostlan, WaveSuperposition, BesselSeries };

inline const char* to_string(SampleMethod m) {
  switch (m) {
    case SampleMethod::Cholesky: return "cholesky";
    case SampleMethod::Circulant: return "circulant";
    case SampleMethod::Series: return "series";
    case SampleMethod::Kostlan: return "kostlan";
    case SampleMethod::WaveSuperposition: return "wave";
    case SampleMethod::BesselSeries: return "bessel-series";
  }
  return "?";
}

/// Values of one field realisation at an ordered list of points.
struct FieldSample {
  std::vector<Vec2> points;
  std::vector<double> values;
  std::uint64_t seed = 0;
  SampleMethod method = SampleMethod::Cholesky;
  int method_parameter = 0;  // series degree, Kostlan degree, wave count or Bessel order
};

inline void write_csv(const FieldSample& s, const std::string& path, const std::string& header_comment = "") {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write sample file '" + path + "'");
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "x,y,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < s.points.size(); ++i)
    out << s.points[i].x << ',' << s.points[i].y << ',' << s.values[i] << '\n';
}

}  // namespace nodalperc

#endif  // NODALPERC_FIELD_SAMPLE_HPP
