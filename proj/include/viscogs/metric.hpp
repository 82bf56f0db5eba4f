#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "viscogs/material.hpp"
#include "viscogs/state.hpp"

namespace viscogs {

double hellinger(const StepDensity& p0, const StepDensity& p1);
double bhattacharya(const StepDensity& p0, const StepDensity& p1);
double l1_distance(const StepDensity& p0, const StepDensity& p1);

// Time change and normalisation of the closed-form Bhattacharya geodesic.
double bh_time(double s, double delta);
double bh_normalisation(double t, double delta);
StepDensity bh_geodesic(const StepDensity& p0, const StepDensity& p1, double s);
// Initial velocity of bh_geodesic at s = 0 (zero mean).
TangentVector bh_geodesic_velocity(const StepDensity& p0, const StepDensity& p1);

struct BoundsReport {
  std::size_t checked = 0;
  double worst_margin = 0.0;  // most negative of (gamma - min) and (2 max - gamma)
  double worst_s = 0.0;
};
// Throws property_violation when a sample breaks the bound by more than 1e-10.
BoundsReport bh_geodesic_bounds_check(const StepDensity& p0, const StepDensity& p1,
                                      const std::vector<double>& samples);

struct GeodesicPath {
  std::vector<double> s;
  std::vector<StepDensity> knots;
  double action = 0.0;
  std::size_t iterations = 0;
  double tolerance = 0.0;
  std::string method;

  double length() const;
};

// Action of a knot sequence on uniform s in viscosity-adapted coordinates.
double discrete_action(const MaterialLaw& law, const std::vector<StepDensity>& knots);

struct ShootingState {
  double s = 0.0;
  StepDensity gamma;
  Covector xi;
  double lambda = 0.0;
};

struct ShootOptions {
  double rtol = 1e-11;
  double atol = 1e-13;
  std::size_t record = 64;  // uniform records in s, endpoints included
};

std::vector<ShootingState> geodesic_shoot(const MaterialLaw& law, const StepDensity& p0,
                                          const Covector& xi0, double s_end,
                                          const ShootOptions& opts = {});
// Squared length of a shot, <xi0, K(p0) xi0> (conserved along the flow).
double shooting_action(const MaterialLaw& law, const StepDensity& p0, const Covector& xi0);

struct GeodesicOptions {
  std::size_t interior_knots = 32;
  std::size_t max_iterations = 20000;
  double rel_tol = 1e-10;
  std::size_t window = 20;
  double floor = 1e-12;
  bool shooting_crosscheck = false;
  // Re-solve with 2K+1 knots and extrapolate in (K+1)^-2; the reported path stays the K-knot one.
  bool richardson = false;
  // Extra starting paths (each with interior_knots + 2 knots) tried next to the Bh geodesic.
  std::vector<std::vector<StepDensity>> extra_starts;
};

struct DistanceResult {
  double distance = 0.0;
  GeodesicPath path;
  bool converged = false;
  std::string status;  // "converged" or "upper-bound-only"
  std::optional<double> raw_distance;  // K-knot value when richardson is on
  std::optional<double> shooting_distance;
  std::optional<double> shooting_mismatch;
};

DistanceResult geodesic_distance(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1,
                                 const GeodesicOptions& opts = {});

struct LadderEntry {
  std::size_t multiple = 1;
  std::size_t cells = 0;
  double distance = 0.0;
  std::string status;
  GeodesicPath path;
};

// Distances in P_{mN} after cell replication; each level also starts from the
// previous level's path so that the sequence is nonincreasing up to tolerance.
std::vector<LadderEntry> refine_distance_ladder(
    const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1,
    const std::vector<std::size_t>& multiples, const GeodesicOptions& opts = {},
    const std::function<std::vector<std::vector<StepDensity>>(std::size_t cells, std::size_t knots)>&
        extra_starts = nullptr);

}  // namespace viscogs
