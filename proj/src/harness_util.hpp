#pragma once

#include <cmath>
#include <string>

#include "hrlab/harness.hpp"

namespace hrlab::harness::detail {

// Log-spaced grid from {"min", "max", "points"}.
inline RVec log_grid(const json& g) {
  const double lo = g.at("min").get<double>(), hi = g.at("max").get<double>();
  const int n = g.at("points").get<int>();
  if (!(lo > 0) || !(hi > lo) || n < 2) throw ConfigError("grid needs 0 < min < max and points >= 2");
  RVec out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

inline RVec numbers(const json& a) {
  RVec out;
  for (const json& v : a) out.push_back(v.get<double>());
  return out;
}

inline double num(const json& c, const char* key) { return c.at(key).get<double>(); }
inline int inum(const json& c, const char* key) { return c.at(key).get<int>(); }

inline double thr(const json& c, const char* key) { return c.at("thresholds").at(key).get<double>(); }

// max / min of positive values.
inline double spread(const RVec& v) {
  double lo = INFINITY, hi = 0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return lo > 0 ? hi / lo : INFINITY;
}

inline bool monotone_decreasing(const RVec& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

}  // namespace hrlab::harness::detail
