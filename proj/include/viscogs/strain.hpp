#pragma once

#include <memory>
#include <vector>

#include "viscogs/material.hpp"

namespace viscogs {

// Viscosity-adapted coordinate b(p) = int_0^p dq / sqrt(k(q)).
// In b the metric integrand (dp/ds)^2 / k(p) becomes (db/ds)^2.
class StrainMap {
public:
  static std::shared_ptr<const StrainMap> linear(double kappa);
  static std::shared_ptr<const StrainMap> tabulated(RealFn k, std::vector<double> breakpoints);

  double b(double p) const;
  double p(double b) const;
  double dp_db(double p) const;  // sqrt(k(p))

private:
  StrainMap() = default;
  double integrand(double u) const;  // db/du with u = sqrt(q)
  double segment_integral(double u0, double u1) const;

  bool linear_ = false;
  double kappa_ = 0.0;
  RealFn k_;
  std::vector<double> u_;  // node abscissae in u = sqrt(q)
  std::vector<double> B_;  // cumulative b at nodes
};

}  // namespace viscogs
