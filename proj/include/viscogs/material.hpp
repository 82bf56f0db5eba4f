#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace viscogs {

using RealFn = std::function<double(double)>;

struct ScalarLaw {
  RealFn eval;
  RealFn d1;
  RealFn d2;  // may be empty for k

  double operator()(double p) const { return eval(p); }
  bool has_d2() const { return static_cast<bool>(d2); }
};

// Log-spaced sampling used for every certified constant.
struct GridSpec {
  double lo = 1e-4;
  double hi = 1e4;
  std::size_t points = 10001;
  std::size_t doubling_points = 321;

  std::vector<double> nodes() const;
};

struct LawConstants {
  double kappa_lo = 0.0;
  double kappa_hi = 0.0;
  double lambda_W = 0.0;
  double C_k = 0.0;
  double kprime_inf = 0.0;
  double kprime_sup = 0.0;
  double B1 = 0.0;
  double B2 = 0.0;
  double B3 = 0.0;
  std::optional<double> C1;
  std::optional<double> C2;
  std::optional<double> p_star;
  double G_sup_norm = 0.0;
  double G_inf = 0.0;
  double G_sup = 0.0;
  double W_inf = 0.0;
  bool certified = false;
  GridSpec grid;
};

class StrainMap;

struct MaterialLaw {
  std::string id;
  ScalarLaw W;
  ScalarLaw k;
  RealFn G;
  std::vector<double> breakpoints;       // points where W or k lose smoothness
  std::optional<double> k_linear_kappa;  // set when k(p) = kappa * p exactly
  double mollifier_width = 0.0;
  LawConstants constants;
  std::shared_ptr<const StrainMap> strain;

  // Cell averages G^N by midpoint sampling, 64 sub-samples per cell.
  std::vector<double> loading_cells(std::size_t N) const;
};

// Sum_j c_j p^j over integer exponents (negative allowed).
struct LaurentPolynomial {
  std::map<int, double> coeffs;

  double eval(double p) const;
  double d1(double p) const;
  double d2(double p) const;
  ScalarLaw as_law() const;
};

// k(p) = p * r(p), r piecewise constant with values kappas[i] between
// consecutive breaks, each jump bridged by a C1 smoothstep of width h.
ScalarLaw piecewise_ratio_k(const std::vector<double>& breaks, const std::vector<double>& kappas,
                            double h);

MaterialLaw make_law(std::string id, ScalarLaw W, ScalarLaw k, RealFn G,
                     std::vector<double> breakpoints = {},
                     std::optional<double> k_linear_kappa = std::nullopt,
                     double mollifier_width = 0.0, const GridSpec& grid = {});

MaterialLaw catalog_default();
MaterialLaw catalog_double_well();
MaterialLaw catalog_appendix_k(double epsilon, double h = 1e-3);
MaterialLaw catalog_linear_k(double kappa);
MaterialLaw catalog(const std::string& id);

MaterialLaw with_loading(const MaterialLaw& law, RealFn G, const std::string& tag = "G");

MaterialLaw certify_constants(const MaterialLaw& law, const GridSpec& grid = {});

double lower_edge_distance_bound(const MaterialLaw& law);  // 2/sqrt(kappa_hi)
double upper_edge_distance_bound(const MaterialLaw& law);  // 2/sqrt(kappa_lo)

}  // namespace viscogs
