#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "viscogs/material.hpp"

namespace viscogs {

// Density in P_N: N cell values on the uniform grid of [0,1] with unit mean.
// Boundary densities (zero cells allowed) exist only as geodesic endpoints.
class StepDensity {
public:
  StepDensity() = default;
  explicit StepDensity(std::vector<double> cells);

  static StepDensity with_boundary(std::vector<double> cells);
  static StepDensity normalized(std::vector<double> values);  // divide by the mean
  static StepDensity uniform(std::size_t N);

  std::size_t size() const { return cells_.size(); }
  double operator[](std::size_t i) const { return cells_[i]; }
  const std::vector<double>& cells() const { return cells_; }
  std::span<const double> span() const { return cells_; }
  bool is_boundary() const { return boundary_; }
  double min_cell() const;

private:
  std::vector<double> cells_;
  bool boundary_ = false;
};

// Element of T_N: zero-mean cell values.
class TangentVector {
public:
  TangentVector() = default;
  explicit TangentVector(std::vector<double> cells);
  static TangentVector zero(std::size_t N) { return TangentVector(std::vector<double>(N, 0.0)); }

  std::size_t size() const { return cells_.size(); }
  double operator[](std::size_t i) const { return cells_[i]; }
  const std::vector<double>& cells() const { return cells_; }

private:
  std::vector<double> cells_;
};

// Covector identified with a step function through the L2 pairing.
class Covector {
public:
  Covector() = default;
  explicit Covector(std::vector<double> cells);

  std::size_t size() const { return cells_.size(); }
  double operator[](std::size_t i) const { return cells_[i]; }
  const std::vector<double>& cells() const { return cells_; }

private:
  std::vector<double> cells_;
};

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kDriftLimit = 1e-9;

double average(std::span<const double> f);
inline double average(const std::vector<double>& f) { return average(std::span<const double>(f)); }
double pairing(std::span<const double> a, std::span<const double> b);  // mean of a_i b_i

StepDensity project(std::span<const double> fine, std::size_t N);
StepDensity refine(const StepDensity& p, std::size_t multiple);  // cell replication into P_{mN}

double energy(const MaterialLaw& law, const StepDensity& p);
double energy(const MaterialLaw& law, const StepDensity& p, std::span<const double> loading);

TangentVector onsager_apply(const MaterialLaw& law, const StepDensity& p, const Covector& xi);
void onsager_apply_raw(const MaterialLaw& law, std::span<const double> p, std::span<const double> xi,
                       std::span<double> out);
Covector metric_apply(const MaterialLaw& law, const StepDensity& p, const TangentVector& y);

double dissipation_primal(const MaterialLaw& law, const StepDensity& p, const TangentVector& y);
double dissipation_dual(const MaterialLaw& law, const StepDensity& p, const Covector& xi);
double dissipation_primal_raw(const MaterialLaw& law, std::span<const double> p, std::span<const double> y);
double dissipation_dual_raw(const MaterialLaw& law, std::span<const double> p, std::span<const double> xi);

// Differential of the energy as a covector: W'(p_i) - G_i.
Covector energy_differential(const MaterialLaw& law, const StepDensity& p, std::span<const double> loading);

// delta such that W(q) <= level(N, E) forces q >= delta.
double sublevel_density_floor(const MaterialLaw& law, std::size_t N, double E);
double sublevel_density_floor(const MaterialLaw& law, std::span<const double> loading, double E);
// Lower bound of E_N over P_N used to validate requested levels.
double energy_infimum_bound(const MaterialLaw& law, std::size_t N);
double energy_infimum_bound(const MaterialLaw& law, std::span<const double> loading);

}  // namespace viscogs
