#pragma once
// Dense-vector helpers shared by the encoders, prototypes and classifier.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pfdet/errors.hpp"

namespace pfdet {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline Vec normalized(std::span<const double> v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n))
    fail(ErrorKind::Contract, "cannot normalize a zero or non-finite vector");
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vec mean_of(std::span<const Vec> vectors) {
  if (vectors.empty()) fail(ErrorKind::Contract, "mean of an empty vector set");
  Vec out(vectors.front().size(), 0.0);
  for (const Vec& v : vectors) {
    if (v.size() != out.size())
      fail(ErrorKind::Contract, "mean over vectors of mixed dimension");
    axpy(1.0, v, out);
  }
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace pfdet
