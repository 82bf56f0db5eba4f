#include "viscogs/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "viscogs/error.hpp"

namespace viscogs {

namespace {

void require_cells(const std::vector<double>& cells, const char* what) {
  if (cells.empty()) throw Error(ErrorKind::invalid_parameter, std::string(what) + " needs at least one cell");
  for (double v : cells)
    if (!std::isfinite(v)) throw Error(ErrorKind::invariant, std::string(what) + ": non-finite cell");
}

void enforce_unit_mass(std::vector<double>& cells) {
  const double m = average(cells);
  const double drift = std::abs(m - 1.0);
  if (drift <= kMassTolerance) return;
  if (drift > kDriftLimit) {
    std::ostringstream os;
    os << "unit mass: mean " << m;
    throw Error(ErrorKind::invariant, os.str());
  }
  for (double& v : cells) v /= m;
}

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorKind::dimension_mismatch, "cell counts differ");
}

}  // namespace

StepDensity::StepDensity(std::vector<double> cells) : cells_(std::move(cells)) {
  require_cells(cells_, "density");
  for (double v : cells_)
    if (!(v > 0.0)) throw Error(ErrorKind::invariant, "positivity: density cell <= 0");
  enforce_unit_mass(cells_);
}

StepDensity StepDensity::with_boundary(std::vector<double> cells) {
  require_cells(cells, "density");
  bool zero = false;
  for (double v : cells) {
    if (v < 0.0) throw Error(ErrorKind::invariant, "positivity: density cell < 0");
    zero = zero || v == 0.0;
  }
  enforce_unit_mass(cells);
  StepDensity p;
  p.cells_ = std::move(cells);
  p.boundary_ = zero;
  return p;
}

StepDensity StepDensity::normalized(std::vector<double> values) {
  require_cells(values, "density");
  const double m = average(values);
  if (!(m > 0.0)) throw Error(ErrorKind::invariant, "positivity: nonpositive total mass");
  for (double& v : values) v /= m;
  return with_boundary(std::move(values));
}

StepDensity StepDensity::uniform(std::size_t N) { return StepDensity(std::vector<double>(N, 1.0)); }

double StepDensity::min_cell() const { return *std::min_element(cells_.begin(), cells_.end()); }

TangentVector::TangentVector(std::vector<double> cells) : cells_(std::move(cells)) {
  require_cells(cells_, "tangent");
  const double m = average(cells_);
  double scale = 1.0;
  for (double v : cells_) scale = std::max(scale, std::abs(v));
  if (std::abs(m) > kMassTolerance * scale) {
    if (std::abs(m) > kDriftLimit * scale) {
      std::ostringstream os;
      os << "zero mean: tangent mean " << m;
      throw Error(ErrorKind::invariant, os.str());
    }
    for (double& v : cells_) v -= m;
  }
}

Covector::Covector(std::vector<double> cells) : cells_(std::move(cells)) {
  require_cells(cells_, "covector");
}

double average(std::span<const double> f) {
  if (f.empty()) throw Error(ErrorKind::invalid_parameter, "average of an empty array");
  // Kahan summation keeps mass checks at roundoff level.
  double s = 0.0, c = 0.0;
  for (double v : f) {
    const double y = v - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s / static_cast<double>(f.size());
}

double pairing(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

StepDensity project(std::span<const double> fine, std::size_t N) {
  if (N == 0 || fine.size() % N != 0)
    throw Error(ErrorKind::invalid_resolution, "fine resolution is not a multiple of N");
  const std::size_t m = fine.size() / N;
  std::vector<double> cells(N);
  for (std::size_t i = 0; i < N; ++i) cells[i] = average(fine.subspan(i * m, m));
  return StepDensity(std::move(cells));
}

StepDensity refine(const StepDensity& p, std::size_t multiple) {
  if (multiple == 0) throw Error(ErrorKind::invalid_parameter, "refinement multiple must be >= 1");
  std::vector<double> cells;
  cells.reserve(p.size() * multiple);
  for (double v : p.cells())
    for (std::size_t j = 0; j < multiple; ++j) cells.push_back(v);
  return p.is_boundary() ? StepDensity::with_boundary(std::move(cells)) : StepDensity(std::move(cells));
}

double energy(const MaterialLaw& law, const StepDensity& p) {
  const auto g = law.loading_cells(p.size());
  return energy(law, p, g);
}

double energy(const MaterialLaw& law, const StepDensity& p, std::span<const double> loading) {
  check_same(p.size(), loading.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += law.W(p[i]) - loading[i] * p[i];
  return s / static_cast<double>(p.size());
}

void onsager_apply_raw(const MaterialLaw& law, std::span<const double> p, std::span<const double> xi,
                       std::span<double> out) {
  check_same(p.size(), xi.size());
  check_same(p.size(), out.size());
  double sk = 0.0, skx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double k = law.k(p[i]);
    out[i] = k;
    sk += k;
    skx += k * xi[i];
  }
  const double lam = skx / sk;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] *= (xi[i] - lam);
}

TangentVector onsager_apply(const MaterialLaw& law, const StepDensity& p, const Covector& xi) {
  std::vector<double> out(p.size());
  onsager_apply_raw(law, p.cells(), xi.cells(), out);
  return TangentVector(std::move(out));
}

Covector metric_apply(const MaterialLaw& law, const StepDensity& p, const TangentVector& y) {
  check_same(p.size(), y.size());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = y[i] / law.k(p[i]);
  return Covector(std::move(out));
}

double dissipation_primal_raw(const MaterialLaw& law, std::span<const double> p, std::span<const double> y) {
  check_same(p.size(), y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += y[i] * y[i] / law.k(p[i]);
  return 0.5 * s / static_cast<double>(p.size());
}

double dissipation_dual_raw(const MaterialLaw& law, std::span<const double> p, std::span<const double> xi) {
  check_same(p.size(), xi.size());
  std::vector<double> k(p.size());
  double sk = 0.0, skx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    k[i] = law.k(p[i]);
    sk += k[i];
    skx += k[i] * xi[i];
  }
  const double lam = skx / sk;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += k[i] * (xi[i] - lam) * (xi[i] - lam);
  return 0.5 * s / static_cast<double>(p.size());
}

double dissipation_primal(const MaterialLaw& law, const StepDensity& p, const TangentVector& y) {
  return dissipation_primal_raw(law, p.cells(), y.cells());
}

double dissipation_dual(const MaterialLaw& law, const StepDensity& p, const Covector& xi) {
  return dissipation_dual_raw(law, p.cells(), xi.cells());
}

Covector energy_differential(const MaterialLaw& law, const StepDensity& p, std::span<const double> loading) {
  check_same(p.size(), loading.size());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = law.W.d1(p[i]) - loading[i];
  return Covector(std::move(out));
}

double energy_infimum_bound(const MaterialLaw& law, std::size_t N) {
  const auto g = law.loading_cells(N);
  return energy_infimum_bound(law, g);
}

double energy_infimum_bound(const MaterialLaw& law, std::span<const double> g) {
  // Weak duality with multiplier mu for the mass constraint:
  // E_N(p) >= mean_i inf_q (W(q) - (G_i - mu) q) - mu.
  const std::size_t N = g.size();
  if (N == 0) throw Error(ErrorKind::invalid_parameter, "N must be positive");
  GridSpec coarse{1e-6, 1e6, 4001};
  const auto q = coarse.nodes();
  std::vector<double> wq(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) wq[j] = law.W(q[j]);
  std::vector<double> gs(g.begin(), g.end());
  std::sort(gs.begin(), gs.end());
  gs.erase(std::unique(gs.begin(), gs.end()), gs.end());
  std::vector<double> weight(gs.size(), 0.0);
  for (double v : g) weight[std::lower_bound(gs.begin(), gs.end(), v) - gs.begin()] += 1.0 / N;

  auto dual = [&](double mu) {
    double s = 0.0;
    for (std::size_t a = 0; a < gs.size(); ++a) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < q.size(); ++j) best = std::min(best, wq[j] - (gs[a] - mu) * q[j]);
      s += weight[a] * best;
    }
    return s - mu;
  };
  auto r = boost::math::tools::brent_find_minima([&](double mu) { return -dual(mu); }, -1e3, 1e3, 40);
  // Grid infima overestimate the true infimum slightly; back off.
  return -r.second - 1e-6 * (1.0 + std::abs(r.second));
}

double sublevel_density_floor(const MaterialLaw& law, std::size_t N, double E) {
  if (N == 0) throw Error(ErrorKind::invalid_parameter, "N must be positive");
  const auto g = law.loading_cells(N);
  return sublevel_density_floor(law, g, E);
}

double sublevel_density_floor(const MaterialLaw& law, std::span<const double> g, double E) {
  const std::size_t N = g.size();
  if (N == 0) throw Error(ErrorKind::invalid_parameter, "N must be positive");
  if (!std::isfinite(E)) throw Error(ErrorKind::invalid_level, "energy level must be finite");
  const double inf_bound = energy_infimum_bound(law, g);
  if (E < inf_bound) {
    std::ostringstream os;
    os << "E=" << E << " lies below the energy infimum estimate " << inf_bound;
    throw Error(ErrorKind::invalid_level, os.str());
  }
  // sum_j G_j p_j <= N max(0, sup G) since p has mass N in cell units.
  const double g_sup = *std::max_element(g.begin(), g.end());
  const double Ep = std::max(E, E + g_sup);
  const double n = static_cast<double>(N);
  const double level = n * Ep - (n - 1.0) * std::min(0.0, law.constants.W_inf);

  // Log scan upward from tiny q to the first q with W(q) <= level, then bisect.
  double prev = 1e-300;
  double cur = prev;
  bool found = false;
  for (int e = -300; e <= 0; ++e) {
    for (int sub = 0; sub < 8; ++sub) {
      cur = std::pow(10.0, e + sub / 8.0);
      if (cur > 1.0) cur = 1.0;
      if (law.W(cur) <= level) {
        found = true;
        break;
      }
      prev = cur;
    }
    if (found) break;
  }
  if (!found) throw Error(ErrorKind::invalid_level, "sublevel is empty: W exceeds the level on (0,1]");
  if (cur == prev) return cur;
  double lo = prev, hi = cur;  // W(lo) > level >= W(hi)
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (law.W(mid) > level) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace viscogs
