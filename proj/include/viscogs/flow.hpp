#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "viscogs/material.hpp"
#include "viscogs/metric.hpp"
#include "viscogs/ode.hpp"
#include "viscogs/state.hpp"

namespace viscogs {

enum class PositivityPolicy { reject_step, error };

struct FlowConfig {
  double rtol = 1e-8;
  double atol = 1e-10;
  double t_end = 1.0;
  double max_step = 0.0;  // 0 means unlimited
  PositivityPolicy positivity = PositivityPolicy::reject_step;
  double record_every = 0.0;   // 0 records accepted steps only
  std::vector<double> record_times;  // extra exact record times
  bool steady_stop = true;
  double steady_tol = 1e-12;
  bool keep_dense = true;
};

struct FlowDiagnostics {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t positivity_rejections = 0;
  std::size_t recenterings = 0;
  std::size_t rhs_evals = 0;
  bool steady_state = false;
  double t_final = 0.0;
  double floor_guard = 0.0;
  double density_floor = 0.0;
  double max_mass_drift = 0.0;
  double max_tangent_mean = 0.0;
  double min_cell = 0.0;
};

struct Trajectory {
  std::size_t N = 0;
  std::string law_id;
  std::vector<double> loading;
  std::vector<double> times;
  std::vector<StepDensity> states;
  std::vector<TangentVector> tangents;  // empty unless solved with a tangent
  std::vector<double> energies;
  std::vector<double> dissipation;      // running integral of R + R*
  FlowDiagnostics diagnostics;
  std::vector<ode::DenseSegment> dense;  // layout [p, (y)]
  std::vector<double> dense_dissipation;  // running dissipation at each segment start
  bool with_tangent = false;

  double t_end() const { return times.empty() ? 0.0 : times.back(); }
  // Dense evaluation; constant continuation after an early steady-state stop.
  StepDensity state_at(double t) const;
  TangentVector tangent_at(double t) const;
  double dissipation_at(const MaterialLaw& law, double t) const;
};

TangentVector vector_field(const MaterialLaw& law, const StepDensity& p);
TangentVector vector_field(const MaterialLaw& law, const StepDensity& p, std::span<const double> loading);

// Analytic derivative of the vector field in direction y.
TangentVector vector_field_derivative(const MaterialLaw& law, const StepDensity& p, const TangentVector& y,
                                      std::span<const double> loading);

Trajectory solve(const MaterialLaw& law, const StepDensity& p0, const FlowConfig& cfg,
                 std::optional<std::vector<double>> loading = std::nullopt);

Trajectory solve_with_tangent(const MaterialLaw& law, const StepDensity& p0, const TangentVector& y0,
                              const Covector& zeta, const FlowConfig& cfg,
                              std::optional<std::vector<double>> loading = std::nullopt);

struct ParametrizedFamily {
  std::vector<double> s;
  std::vector<Trajectory> members;

  // Length sqrt(action) of the transported knot sequence at time t.
  double transported_length(const MaterialLaw& law, double t) const;
};

ParametrizedFamily solve_parametrized(const MaterialLaw& law, const GeodesicPath& geodesic,
                                      const std::vector<double>& G_a, const std::vector<double>& G_b,
                                      const FlowConfig& cfg);

// Largest energy increase between consecutive records, per unit time.
double energy_increase_rate(const Trajectory& tr);

}  // namespace viscogs
