#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "viscogs/sampling.hpp"
#include "viscogs/state.hpp"

namespace viscogs::testing {

// Generators for property tests: each case draws from its own seeded stream.
inline Rng case_rng(std::uint64_t suite, std::uint64_t k) { return Rng(suite * 1000003u + k); }

inline std::size_t draw_N(Rng& rng, std::size_t lo = 2, std::size_t hi = 64) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double draw(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace viscogs::testing
