#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "viscogs/flow.hpp"
#include "viscogs/material.hpp"
#include "viscogs/metric.hpp"
#include "viscogs/sampling.hpp"
#include "viscogs/state.hpp"

namespace viscogs {

std::vector<double> hessian_density(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N);
// <xi, H xi> = mean of H_i (xi_i - [k xi]/[k])^2.
double hessian_form(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N, const Covector& xi);

double lambda_hat(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N);
double L_inf(const MaterialLaw& law, double E);
double M_lambda(double lambda, double t);
double E_tilde(const MaterialLaw& law, double E);
double L_glob(const MaterialLaw& law, double E);

struct QuadraticSample {
  std::vector<double> xi;
  double hessian = 0.0;
  double onsager = 0.0;
  double ratio = 0.0;
};

struct StretchingReport {
  std::vector<double> H_diag;
  double lambda_hat = 0.0;
  double L_inf_of_E = 0.0;
  std::vector<QuadraticSample> samples;
  double min_ratio = 0.0;
};

StretchingReport stretching_report(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N,
                                   double E, std::size_t samples, Rng& rng);

// Right-hand side of the stretching relation: -<H~ y, y> + <y, zeta>.
double stretching_rate(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N,
                       const TangentVector& y, const Covector& zeta);

enum class DistanceMode { intrinsic, bhattacharya };
const char* to_string(DistanceMode m);

struct ContractionRow {
  double t = 0.0;
  double measured = 0.0;
  double envelope = 0.0;  // may overflow to inf; ratio is computed in log space
  double ratio = 0.0;
};

struct ContractionReport {
  DistanceMode mode = DistanceMode::bhattacharya;
  double E = 0.0;
  double rate = 0.0;
  double prefactor = 1.0;
  double initial_distance = 0.0;
  double locality_threshold = 0.0;
  double tolerance = 1e-3;
  std::vector<ContractionRow> rows;
  double max_ratio = 0.0;
  bool pass = true;
};

struct ContractionOptions {
  DistanceMode mode = DistanceMode::bhattacharya;
  double tolerance = 1e-3;
  FlowConfig flow;
  GeodesicOptions geodesic;
  std::optional<double> rate_override;  // use instead of the certified rate
};

ContractionReport contraction_check(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1, double E,
                                    const std::vector<double>& t_grid, const ContractionOptions& opts = {});

double locality_threshold(const MaterialLaw& law, double E);

double edb_residual(const Trajectory& tr);

struct EviRow {
  double s = 0.0;
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct EviReport {
  std::vector<EviRow> rows;
  double lambda_used = 0.0;
  double worst_residual = 0.0;
  double worst_normalized = 0.0;
  double E_q = 0.0;
  double tolerance = 1e-4;
  bool pass = true;
};

struct EviOptions {
  DistanceMode mode = DistanceMode::bhattacharya;
  double tolerance = 1e-4;
  GeodesicOptions geodesic;
};

EviReport evi_residual(const MaterialLaw& law, const Trajectory& tr, const StepDensity& q, double E, double lambda,
                       const std::vector<std::pair<double, double>>& pairs, const EviOptions& opts = {});

// Worst normalized EVI residual for each lambda, in the order given.
std::vector<std::pair<double, double>> evi_lambda_sweep(const MaterialLaw& law, const Trajectory& tr,
                                                        const StepDensity& q, double E,
                                                        const std::vector<double>& lambdas,
                                                        const std::vector<std::pair<double, double>>& pairs,
                                                        const EviOptions& opts = {});

// phi(t, x) = (T_c - t)_+^order * sum_j coeffs[j] t^j * psi(x).
struct TestFunction {
  std::vector<double> coeffs{1.0};
  int order = 2;
  double T_c = 1.0;
  std::vector<double> psi;  // cell values on a grid whose size divides N

  double a(double t) const;
  double da(double t) const;
};

double weak_form_residual(const MaterialLaw& law, const Trajectory& tr, const std::vector<TestFunction>& tests);

}  // namespace viscogs
