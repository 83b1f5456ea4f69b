#pragma once

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace selfcal {

using cdouble = std::complex<double>;

/// Malformed structural input: bad adjacency, bad strategy file, index out of range.
class StructuralError : public std::invalid_argument {
 public:
  explicit StructuralError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown: singular Fisher matrix, zero denominators in the
/// recursive estimators, degenerate measurements.
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

/// Formats a double with enough digits for data files (12 significant digits).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace selfcal
