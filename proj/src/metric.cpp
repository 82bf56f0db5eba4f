#include "viscogs/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "viscogs/error.hpp"
#include "viscogs/ode.hpp"
#include "viscogs/strain.hpp"

namespace viscogs {

namespace {

void check_pair(const StepDensity& p0, const StepDensity& p1) {
  if (p0.size() != p1.size()) throw Error(ErrorKind::dimension_mismatch, "densities have different N");
}

StepDensity make_density(std::vector<double> cells) {
  for (double v : cells)
    if (v <= 0.0) return StepDensity::with_boundary(std::move(cells));
  return StepDensity(std::move(cells));
}

}  // namespace

double hellinger(const StepDensity& p0, const StepDensity& p1) {
  check_pair(p0, p1);
  double s = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double d = std::sqrt(p1[i]) - std::sqrt(p0[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(p0.size()));
}

double bhattacharya(const StepDensity& p0, const StepDensity& p1) {
  const double he = hellinger(p0, p1);
  return 2.0 * std::asin(std::clamp(0.5 * he, -1.0, 1.0));
}

double l1_distance(const StepDensity& p0, const StepDensity& p1) {
  check_pair(p0, p1);
  double s = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i) s += std::abs(p1[i] - p0[i]);
  return s / static_cast<double>(p0.size());
}

double bh_time(double s, double delta) {
  if (delta <= 0.0) return s;
  const double a = std::sin(s * delta), b = std::sin(delta - s * delta);
  return a / (a + b);
}

double bh_normalisation(double t, double delta) {
  return 1.0 / (1.0 - 2.0 * (t - t * t) * (1.0 - std::cos(delta)));
}

StepDensity bh_geodesic(const StepDensity& p0, const StepDensity& p1, double s) {
  check_pair(p0, p1);
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::invalid_parameter, "geodesic parameter outside [0,1]");
  const double delta = bhattacharya(p0, p1);
  if (s == 0.0 || delta == 0.0) return p0;
  if (s == 1.0) return p1;
  const double t = bh_time(s, delta);
  const double nt = bh_normalisation(t, delta);
  std::vector<double> cells(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double r = (1.0 - t) * std::sqrt(p0[i]) + t * std::sqrt(p1[i]);
    cells[i] = nt * r * r;
  }
  return make_density(std::move(cells));
}

TangentVector bh_geodesic_velocity(const StepDensity& p0, const StepDensity& p1) {
  check_pair(p0, p1);
  const double delta = bhattacharya(p0, p1);
  const double c = std::cos(delta);
  const double factor = delta < 1e-8 ? 1.0 : delta / std::sin(delta);
  std::vector<double> v(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) v[i] = factor * 2.0 * (std::sqrt(p0[i] * p1[i]) - c * p0[i]);
  return TangentVector(std::move(v));
}

BoundsReport bh_geodesic_bounds_check(const StepDensity& p0, const StepDensity& p1,
                                      const std::vector<double>& samples) {
  check_pair(p0, p1);
  BoundsReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (double s : samples) {
    const StepDensity g = bh_geodesic(p0, p1, s);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double lo = std::min(p0[i], p1[i]);
      const double hi = 2.0 * std::max(p0[i], p1[i]);
      const double m = std::min(g[i] - lo, hi - g[i]);
      if (m < rep.worst_margin) {
        rep.worst_margin = m;
        rep.worst_s = s;
      }
    }
    ++rep.checked;
  }
  if (rep.worst_margin < -1e-10) {
    std::ostringstream os;
    os << "geodesic bound min <= gamma <= 2 max broken by " << -rep.worst_margin << " at s=" << rep.worst_s;
    throw Error(ErrorKind::property_violation, os.str());
  }
  return rep;
}

double GeodesicPath::length() const { return std::sqrt(std::max(action, 0.0)); }

double discrete_action(const MaterialLaw& law, const std::vector<StepDensity>& knots) {
  if (knots.size() < 2) return 0.0;
  const std::size_t N = knots.front().size();
  const StrainMap& sm = *law.strain;
  std::vector<double> prev(N), cur(N);
  for (std::size_t i = 0; i < N; ++i) prev[i] = sm.b(knots[0][i]);
  double total = 0.0;
  for (std::size_t j = 1; j < knots.size(); ++j) {
    if (knots[j].size() != N) throw Error(ErrorKind::dimension_mismatch, "knots have different N");
    for (std::size_t i = 0; i < N; ++i) {
      cur[i] = sm.b(knots[j][i]);
      total += (cur[i] - prev[i]) * (cur[i] - prev[i]);
    }
    prev.swap(cur);
  }
  return total * static_cast<double>(knots.size() - 1) / static_cast<double>(N);
}

double shooting_action(const MaterialLaw& law, const StepDensity& p0, const Covector& xi0) {
  return 2.0 * dissipation_dual(law, p0, xi0);
}

std::vector<ShootingState> geodesic_shoot(const MaterialLaw& law, const StepDensity& p0,
                                          const Covector& xi0, double s_end, const ShootOptions& opts) {
  if (p0.size() != xi0.size()) throw Error(ErrorKind::dimension_mismatch, "p0 and xi0 differ in N");
  if (p0.is_boundary()) throw Error(ErrorKind::invalid_parameter, "shooting needs a positive start");
  if (!(s_end > 0.0)) throw Error(ErrorKind::invalid_parameter, "s_end must be positive");
  const std::size_t N = p0.size();

  auto lambda_of = [&](const double* g, const double* xi) {
    double sk = 0.0, skx = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double k = law.k(g[i]);
      sk += k;
      skx += k * xi[i];
    }
    return skx / sk;
  };
  auto make_state = [&](double s, const ode::State& z) {
    ShootingState st;
    st.s = s;
    st.gamma = StepDensity(std::vector<double>(z.begin(), z.begin() + N));
    st.xi = Covector(std::vector<double>(z.begin() + N, z.end()));
    st.lambda = lambda_of(st.gamma.cells().data(), st.xi.cells().data());
    return st;
  };

  ode::Rhs rhs = [&](double, const ode::State& z, ode::State& dz) {
    const double lam = lambda_of(z.data(), z.data() + N);
    for (std::size_t i = 0; i < N; ++i) {
      const double d = z[N + i] - lam;
      dz[i] = law.k(z[i]) * d;
      dz[N + i] = -0.5 * law.k.d1(z[i]) * d * d;
    }
  };

  ode::State z(2 * N);
  std::copy(p0.cells().begin(), p0.cells().end(), z.begin());
  std::copy(xi0.cells().begin(), xi0.cells().end(), z.begin() + N);

  const std::size_t nrec = std::max<std::size_t>(opts.record, 2);
  std::vector<ShootingState> out;
  out.reserve(nrec);
  out.push_back(make_state(0.0, z));
  std::size_t next = 1;
  auto record_time = [&](std::size_t r) { return s_end * static_cast<double>(r) / static_cast<double>(nrec - 1); };
  double s_last = 0.0;

  ode::Hooks hooks;
  hooks.admissible = [&](const ode::State& y) {
    for (std::size_t i = 0; i < N; ++i)
      if (!(y[i] > 0.0)) return false;
    return true;
  };
  hooks.on_accept = [&](const ode::DenseSegment& seg, ode::State& y) {
    ode::State tmp;
    while (next < nrec && record_time(next) <= seg.t1() * (1.0 + 1e-14)) {
      const double sr = std::min(record_time(next), seg.t1());
      if (next + 1 == nrec) tmp = y;
      else seg.eval(sr, tmp);
      bool positive = true;
      for (std::size_t i = 0; i < N; ++i) positive = positive && tmp[i] > 0.0;
      if (!positive) throw LeftDomain(sr, "dense output left the positive cone");
      out.push_back(make_state(record_time(next), tmp));
      ++next;
    }
    s_last = seg.t1();
    return ode::AfterStep::proceed;
  };

  ode::Options o;
  o.rtol = opts.rtol;
  o.atol = opts.atol;
  o.h_min_rel = 1e-13;
  try {
    ode::dopri5(rhs, 0.0, z, s_end, o, hooks);
  } catch (const LeftDomain&) {
    throw;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::stiffness_failure) throw;
    std::ostringstream os;
    os << "a cell reached zero near s=" << s_last;
    throw LeftDomain(s_last, os.str());
  }
  return out;
}

}  // namespace viscogs
