#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "hyper/grid.hpp"

namespace hyper::test {

inline ScalarField random_field(int w, int h, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarField f(w, h);
  for (double& v : f.values()) v = u(rng);
  return f;
}

inline VectorField random_velocity(int w, int h, std::mt19937_64& rng, double amp) {
  return VectorField(random_field(w, h, rng, -amp, amp), random_field(w, h, rng, -amp, amp));
}

inline bool bit_equal(const ScalarField& a, const ScalarField& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i])) return false;
  return true;
}

inline double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace hyper::test
