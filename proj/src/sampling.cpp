#include "viscogs/sampling.hpp"

#include <algorithm>

#include "viscogs/error.hpp"

namespace viscogs {

StepDensity sample_density(std::size_t N, Rng& rng, double alpha, double floor) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> v(N);
  for (auto& x : v) x = gamma(rng) + floor;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(N);
  for (auto& x : v) x /= m;
  return StepDensity(std::move(v));
}

StepDensity sample_sublevel(const MaterialLaw& law, std::size_t N, double E, Rng& rng, double alpha,
                            int max_tries) {
  const auto g = law.loading_cells(N);
  for (int t = 0; t < max_tries; ++t) {
    StepDensity p = sample_density(N, rng, alpha);
    if (energy(law, p, g) <= E) return p;
  }
  throw Error(ErrorKind::invalid_level, "rejection sampling found no density in the sublevel");
}

TangentVector sample_tangent(std::size_t N, Rng& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(N);
  for (auto& x : v) x = normal(rng);
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(N);
  for (auto& x : v) x -= m;
  return TangentVector(std::move(v));
}

Covector sample_covector(std::size_t N, Rng& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(N);
  for (auto& x : v) x = normal(rng);
  return Covector(std::move(v));
}

}  // namespace viscogs
