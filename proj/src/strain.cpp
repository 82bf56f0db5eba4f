#include "viscogs/strain.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

#include "viscogs/error.hpp"

namespace viscogs {

namespace {
using Gauss = boost::math::quadrature::gauss<double, 10>;
constexpr double kQMin = 1e-16;
constexpr double kQMax = 1e16;
constexpr int kPerDecade = 48;
}  // namespace

std::shared_ptr<const StrainMap> StrainMap::linear(double kappa) {
  auto m = std::shared_ptr<StrainMap>(new StrainMap());
  m->linear_ = true;
  m->kappa_ = kappa;
  return m;
}

std::shared_ptr<const StrainMap> StrainMap::tabulated(RealFn k, std::vector<double> breakpoints) {
  auto m = std::shared_ptr<StrainMap>(new StrainMap());
  m->k_ = std::move(k);

  std::vector<double> q{0.0};
  const int decades = static_cast<int>(std::round(std::log10(kQMax / kQMin)));
  for (int i = 0; i <= decades * kPerDecade; ++i)
    q.push_back(kQMin * std::pow(10.0, static_cast<double>(i) / kPerDecade));
  std::sort(breakpoints.begin(), breakpoints.end());
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    q.push_back(breakpoints[i]);
    // Subdivide short intervals between breakpoints, where k may vary quickly.
    if (i + 1 < breakpoints.size() && breakpoints[i + 1] - breakpoints[i] < 1.0) {
      for (int j = 1; j < 32; ++j)
        q.push_back(breakpoints[i] + (breakpoints[i + 1] - breakpoints[i]) * j / 32.0);
    }
  }
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());

  m->u_.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) m->u_[i] = std::sqrt(q[i]);
  m->B_.assign(q.size(), 0.0);
  for (std::size_t i = 1; i < q.size(); ++i)
    m->B_[i] = m->B_[i - 1] + m->segment_integral(m->u_[i - 1], m->u_[i]);
  for (double v : m->B_)
    if (!std::isfinite(v)) throw Error(ErrorKind::assumption_violation, "strain map diverges; k(p)/p unbounded below");
  return m;
}

double StrainMap::integrand(double u) const {
  const double kq = k_(u * u);
  return 2.0 * u / std::sqrt(kq);
}

double StrainMap::segment_integral(double u0, double u1) const {
  if (u1 <= u0) return 0.0;
  return Gauss::integrate([this](double u) { return integrand(u); }, u0, u1);
}

double StrainMap::b(double p) const {
  if (p <= 0.0) return 0.0;
  if (linear_) return 2.0 * std::sqrt(p / kappa_);
  const double u = std::sqrt(p);
  if (u >= u_.back()) return B_.back() + (u - u_.back()) * integrand(u_.back());
  const std::size_t j = static_cast<std::size_t>(std::upper_bound(u_.begin(), u_.end(), u) - u_.begin()) - 1;
  return B_[j] + segment_integral(u_[j], u);
}

double StrainMap::p(double b) const {
  if (b <= 0.0) return 0.0;
  if (linear_) return 0.25 * kappa_ * b * b;
  if (b >= B_.back()) {
    const double u = u_.back() + (b - B_.back()) / integrand(u_.back());
    return u * u;
  }
  const std::size_t j = static_cast<std::size_t>(std::upper_bound(B_.begin(), B_.end(), b) - B_.begin()) - 1;
  const double u0 = u_[j], u1 = u_[j + 1];
  // Linear guess in u, then safeguarded Newton on b(u) = b.
  double lo = u0, hi = u1;
  double u = u0 + (u1 - u0) * (b - B_[j]) / (B_[j + 1] - B_[j]);
  for (int it = 0; it < 60; ++it) {
    const double r = B_[j] + segment_integral(u0, u) - b;
    if (r > 0.0) hi = u;
    else lo = u;
    const double step = r / integrand(u);
    double next = u - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-15 * std::max(u, 1e-300)) {
      u = next;
      break;
    }
    u = next;
  }
  return u * u;
}

double StrainMap::dp_db(double p) const {
  if (p <= 0.0) return 0.0;
  if (linear_) return std::sqrt(kappa_ * p);
  return std::sqrt(k_(p));
}

}  // namespace viscogs
