#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "viscogs/analysis.hpp"
#include "viscogs/flow.hpp"
#include "viscogs/material.hpp"
#include "viscogs/metric.hpp"

namespace viscogs {

// The competitor curve in P_{2M} between the disjoint-support endpoints
// 2 on [1/2,1) and 2 on [0,1/2). Cells [0,1/M) carry alpha, cells
// [1/M,1/2) carry 2 s^2, cells [1/2,1) carry beta.
class AppendixCurve {
public:
  explicit AppendixCurve(std::size_t M);

  std::size_t M() const { return M_; }
  double s_M() const { return sM_; }
  double epsilon() const;

  double alpha(double s) const;
  double beta(double s) const;
  double middle(double s) const { return 2.0 * s * s; }
  double dalpha(double s) const;
  double dbeta(double s) const;
  double dmiddle(double s) const { return 4.0 * s; }
  double mass(double s) const;

  StepDensity density(double s) const;  // 2M cells
  static StepDensity start(std::size_t cells);
  static StepDensity finish(std::size_t cells);

private:
  std::size_t M_;
  double sM_;
  double beta_sM_;
};

struct CounterexampleOptions {
  std::size_t s_points = 2048;
  double h = 1e-3;
  std::size_t curve_knots = 65;
};

struct CounterexampleResult {
  std::size_t M = 0;
  double epsilon = 0.0;
  double s_M = 0.0;
  double J = 0.0;
  double J_squared = 0.0;
  double Bh_value = 0.0;
  double margin = 0.0;
  double max_mass_error = 0.0;
  double alpha_at_s_M = 0.0;
  double min_alpha_interior = 0.0;  // min of alpha on the grid inside (s_M, 1)
  std::size_t s_points = 0;
  GeodesicPath curve;
};

CounterexampleResult appendix_counterexample(std::size_t M, const CounterexampleOptions& opts = {});

struct CounterexampleScan {
  std::vector<CounterexampleResult> entries;
  std::optional<std::size_t> first_M;
  double required_margin = 0.01;
};

CounterexampleScan scan_counterexample(const std::vector<std::size_t>& Ms, double required_margin = 0.01,
                                       const CounterexampleOptions& opts = {});

// Distance ladder between the disjoint-support endpoints in P_2 under the appendix law for M.
std::vector<LadderEntry> appendix_ladder(std::size_t M, const std::vector<std::size_t>& multiples,
                                         const GeodesicOptions& opts = {}, double h = 1e-3);

struct RefinementRow {
  double t = 0.0;
  std::vector<double> bh_differences;      // Bh(p^{N_k}, p^{N_{k+1}}) per ladder step
  std::vector<double> energy_differences;  // |E_{N_k} - E_{N_{k+1}}|
  bool bh_monotone = true;
};

struct RefinementReport {
  std::vector<std::size_t> N_ladder;
  std::vector<double> initial_energies;  // E_N(P_N p0)
  std::vector<RefinementRow> rows;
  bool all_monotone = true;
};

RefinementReport refinement_convergence(const MaterialLaw& law, const std::vector<double>& p0_fine,
                                        const std::vector<std::size_t>& N_ladder, const std::vector<double>& t_grid,
                                        const FlowConfig& cfg = {});

struct GrowthRow {
  std::size_t pair = 0;
  double t = 0.0;
  double measured = 0.0;
  double envelope = 0.0;
  double ratio = 0.0;
};

struct GrowthOptions {
  std::size_t N = 4;
  std::size_t pairs = 3;
  std::uint64_t seed = 7;
  double perturbation = 0.05;
  double tolerance = 1e-3;
  FlowConfig flow;
  GeodesicOptions geodesic;
};

struct GrowthReport {
  double E = 0.0;
  double rate = 0.0;
  double zeta_norm = 0.0;
  std::vector<GrowthRow> rows;
  double max_ratio = 0.0;
  bool pass = true;
};

// Cross-resolution pairs (N, 2N) with the loading scaled by zeta_scale.
GrowthReport growth_envelope_study(const MaterialLaw& law, double E, double zeta_scale,
                                   const std::vector<double>& t_grid, const GrowthOptions& opts = {});

}  // namespace viscogs
