#pragma once

#include <cstdint>
#include <random>

#include "viscogs/material.hpp"
#include "viscogs/state.hpp"

namespace viscogs {

using Rng = std::mt19937_64;

// Dirichlet-like density: normalized Gamma(alpha) draws, floored away from zero.
StepDensity sample_density(std::size_t N, Rng& rng, double alpha = 2.0, double floor = 1e-3);

// Rejection sampling from the energy sublevel {E_N <= E}.
StepDensity sample_sublevel(const MaterialLaw& law, std::size_t N, double E, Rng& rng,
                            double alpha = 2.0, int max_tries = 100000);

TangentVector sample_tangent(std::size_t N, Rng& rng, double scale = 1.0);
Covector sample_covector(std::size_t N, Rng& rng, double scale = 1.0);

}  // namespace viscogs
