#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hrlab {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

// Error taxonomy shared by all modules. The CLI maps every one of these to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SizeError : std::length_error {
  using std::length_error::length_error;
};
struct TruncationError : std::runtime_error {
  TruncationError(const std::string& what, double discarded)
      : std::runtime_error(what), discarded_norm(discarded) {}
  double discarded_norm;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

inline double sq(double x) { return x * x; }

}  // namespace hrlab
