#include "viscogs/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "viscogs/error.hpp"
#include "viscogs/sampling.hpp"

namespace viscogs {

AppendixCurve::AppendixCurve(std::size_t M) : M_(M) {
  if (M < 2) throw Error(ErrorKind::invalid_parameter, "counterexample needs M >= 2");
  sM_ = 1.0 / std::sqrt(static_cast<double>(M));
  const double s = sM_;
  beta_sM_ = 2.0 * (1.0 - 3.0 * s * s + 2.0 * s * s / static_cast<double>(M));
}

double AppendixCurve::epsilon() const { return std::pow(static_cast<double>(M_), -1.5); }

double AppendixCurve::beta(double s) const {
  const double m = static_cast<double>(M_);
  if (s <= sM_) return 2.0 * (1.0 - 3.0 * s * s + 2.0 * s * s / m);
  const double r = (1.0 - s) / (1.0 - sM_);
  return beta_sM_ * r * r;
}

double AppendixCurve::dbeta(double s) const {
  const double m = static_cast<double>(M_);
  if (s <= sM_) return 2.0 * (-6.0 * s + 4.0 * s / m);
  return -2.0 * beta_sM_ * (1.0 - s) / ((1.0 - sM_) * (1.0 - sM_));
}

double AppendixCurve::alpha(double s) const {
  const double m = static_cast<double>(M_);
  if (s <= sM_) return 2.0 * s * s * m;
  return m * (1.0 - 2.0 * s * s * (0.5 - 1.0 / m) - 0.5 * beta(s));
}

double AppendixCurve::dalpha(double s) const {
  const double m = static_cast<double>(M_);
  if (s <= sM_) return 4.0 * s * m;
  return m * (-4.0 * s * (0.5 - 1.0 / m) - 0.5 * dbeta(s));
}

double AppendixCurve::mass(double s) const {
  const double m = static_cast<double>(M_);
  return alpha(s) / m + middle(s) * (0.5 - 1.0 / m) + 0.5 * beta(s);
}

StepDensity AppendixCurve::density(double s) const {
  const std::size_t n = 2 * M_;
  std::vector<double> cells(n);
  const double a = alpha(s), mid = middle(s), b = beta(s);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < 2) cells[i] = a;
    else if (i < M_) cells[i] = mid;
    else cells[i] = b;
  }
  for (double& v : cells) v = std::max(v, 0.0);
  return StepDensity::with_boundary(std::move(cells));
}

StepDensity AppendixCurve::start(std::size_t cells) {
  std::vector<double> v(cells, 0.0);
  for (std::size_t i = cells / 2; i < cells; ++i) v[i] = 2.0;
  return StepDensity::with_boundary(std::move(v));
}

StepDensity AppendixCurve::finish(std::size_t cells) {
  std::vector<double> v(cells, 0.0);
  for (std::size_t i = 0; i < cells / 2; ++i) v[i] = 2.0;
  return StepDensity::with_boundary(std::move(v));
}

CounterexampleResult appendix_counterexample(std::size_t M, const CounterexampleOptions& opts) {
  const AppendixCurve curve(M);
  const MaterialLaw law = catalog_appendix_k(curve.epsilon(), opts.h);
  const double m = static_cast<double>(M);
  const double sM = curve.s_M();

  CounterexampleResult res;
  res.M = M;
  res.epsilon = curve.epsilon();
  res.s_M = sM;
  res.alpha_at_s_M = curve.alpha(sM);
  res.Bh_value = bhattacharya(AppendixCurve::start(2), AppendixCurve::finish(2));

  // Graded s-grid: nodes cluster geometrically toward the kink at s_M from both sides.
  const std::size_t n = std::max<std::size_t>(opts.s_points, 16);
  const std::size_t nl = n / 2, nr = n - nl;
  std::vector<double> s{0.0};
  for (std::size_t j = 1; j <= nl; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(nl);
    s.push_back(sM * (1.0 - (1.0 - u) * (1.0 - u)));
  }
  for (std::size_t j = 1; j <= nr; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(nr);
    s.push_back(sM + (1.0 - sM) * u * u);
  }
  s.back() = 1.0;
  res.s_points = s.size();

  auto cost = [&](double p, double dp) { return p > 0.0 ? dp * dp / law.k(p) : 0.0; };
  double J2 = 0.0;
  res.max_mass_error = 0.0;
  res.min_alpha_interior = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < s.size(); ++j) {
    const double ds = s[j + 1] - s[j];
    const double sm = 0.5 * (s[j] + s[j + 1]);
    const double inner = cost(curve.alpha(sm), curve.dalpha(sm)) / m +
                         cost(curve.middle(sm), curve.dmiddle(sm)) * (0.5 - 1.0 / m) +
                         cost(curve.beta(sm), curve.dbeta(sm)) * 0.5;
    J2 += ds * inner;
    res.max_mass_error = std::max(res.max_mass_error, std::abs(curve.mass(s[j + 1]) - 1.0));
    if (s[j + 1] > sM && s[j + 1] < 1.0) res.min_alpha_interior = std::min(res.min_alpha_interior, curve.alpha(s[j + 1]));
  }
  if (res.max_mass_error > 1e-10) {
    std::ostringstream os;
    os << "mass constraint broken by " << res.max_mass_error;
    throw Error(ErrorKind::construction_bug, os.str());
  }
  if (std::abs(res.alpha_at_s_M - 2.0) > 1e-10)
    throw Error(ErrorKind::construction_bug, "alpha(s_M) differs from 2");

  res.J_squared = J2;
  res.J = std::sqrt(J2);
  res.margin = res.Bh_value - res.J;

  const std::size_t kn = std::max<std::size_t>(opts.curve_knots, 2);
  for (std::size_t j = 0; j < kn; ++j) {
    const double sj = static_cast<double>(j) / static_cast<double>(kn - 1);
    res.curve.s.push_back(sj);
    res.curve.knots.push_back(j == 0 ? AppendixCurve::start(2 * M)
                                     : (j + 1 == kn ? AppendixCurve::finish(2 * M) : curve.density(sj)));
  }
  res.curve.action = J2;
  res.curve.method = "appendix-curve-midpoint";
  res.curve.tolerance = 0.0;
  return res;
}

CounterexampleScan scan_counterexample(const std::vector<std::size_t>& Ms, double required_margin,
                                       const CounterexampleOptions& opts) {
  CounterexampleScan scan;
  scan.required_margin = required_margin;
  for (std::size_t M : Ms) {
    scan.entries.push_back(appendix_counterexample(M, opts));
    if (!scan.first_M && scan.entries.back().margin > required_margin) scan.first_M = M;
  }
  return scan;
}

std::vector<LadderEntry> appendix_ladder(std::size_t M, const std::vector<std::size_t>& multiples,
                                         const GeodesicOptions& opts, double h) {
  const AppendixCurve top(M);
  const MaterialLaw law = catalog_appendix_k(top.epsilon(), h);
  auto starts = [](std::size_t cells, std::size_t knots) {
    std::vector<std::vector<StepDensity>> out;
    if (cells % 2 != 0 || cells / 2 < 2) return out;
    const AppendixCurve c(cells / 2);
    std::vector<StepDensity> path;
    for (std::size_t j = 0; j < knots; ++j) {
      const double s = static_cast<double>(j) / static_cast<double>(knots - 1);
      if (j == 0) path.push_back(AppendixCurve::start(cells));
      else if (j + 1 == knots) path.push_back(AppendixCurve::finish(cells));
      else path.push_back(c.density(s));
    }
    out.push_back(std::move(path));
    return out;
  };
  return refine_distance_ladder(law, AppendixCurve::start(2), AppendixCurve::finish(2), multiples, opts, starts);
}

RefinementReport refinement_convergence(const MaterialLaw& law, const std::vector<double>& p0_fine,
                                        const std::vector<std::size_t>& N_ladder, const std::vector<double>& t_grid,
                                        const FlowConfig& cfg) {
  if (N_ladder.size() < 2) throw Error(ErrorKind::invalid_parameter, "ladder needs at least two levels");
  for (std::size_t i = 0; i < N_ladder.size(); ++i) {
    if (N_ladder[i] == 0 || p0_fine.size() % N_ladder[i] != 0)
      throw Error(ErrorKind::invalid_resolution, "ladder level does not divide the input resolution");
    if (i > 0 && (N_ladder[i] <= N_ladder[i - 1] || N_ladder[i] % N_ladder[i - 1] != 0))
      throw Error(ErrorKind::invalid_parameter, "ladder levels must increase by integer factors");
  }
  if (t_grid.empty()) throw Error(ErrorKind::invalid_parameter, "empty time grid");

  RefinementReport rep;
  rep.N_ladder = N_ladder;
  FlowConfig c = cfg;
  c.t_end = std::max(*std::max_element(t_grid.begin(), t_grid.end()), 1e-12);
  c.record_times = t_grid;
  std::vector<Trajectory> runs;
  for (std::size_t N : N_ladder) {
    const StepDensity p = project(p0_fine, N);
    rep.initial_energies.push_back(energy(law, p));
    runs.push_back(solve(law, p, c));
  }
  for (double t : t_grid) {
    RefinementRow row;
    row.t = t;
    for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
      const StepDensity a = runs[k].state_at(t), b = runs[k + 1].state_at(t);
      const std::size_t r = N_ladder[k + 1] / N_ladder[k];
      row.bh_differences.push_back(bhattacharya(refine(a, r), b));
      row.energy_differences.push_back(std::abs(energy(law, a, runs[k].loading) - energy(law, b, runs[k + 1].loading)));
    }
    for (std::size_t k = 0; k + 1 < row.bh_differences.size(); ++k)
      if (row.bh_differences[k + 1] > row.bh_differences[k]) row.bh_monotone = false;
    rep.all_monotone = rep.all_monotone && row.bh_monotone;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

GrowthReport growth_envelope_study(const MaterialLaw& law, double E, double zeta_scale,
                                   const std::vector<double>& t_grid, const GrowthOptions& opts) {
  if (t_grid.empty()) throw Error(ErrorKind::invalid_parameter, "empty time grid");
  const RealFn G0 = law.G;
  const MaterialLaw scaled = with_loading(law, [G0, zeta_scale](double x) { return zeta_scale * G0(x); }, "scaled");
  const std::size_t N = opts.N, N2 = 2 * N;
  const std::vector<double> gN = scaled.loading_cells(N), g2N = scaled.loading_cells(N2);

  GrowthReport rep;
  rep.E = E;
  rep.rate = L_inf(scaled, E + 2.0);
  rep.zeta_norm = 0.0;
  for (std::size_t i = 0; i < N2; ++i) rep.zeta_norm = std::max(rep.zeta_norm, std::abs(g2N[i] - gN[i / 2]));
  const double sqrt_kappa = std::sqrt(scaled.constants.kappa_hi);

  FlowConfig cfg = opts.flow;
  cfg.t_end = std::max(*std::max_element(t_grid.begin(), t_grid.end()), 1e-12);
  cfg.record_times = t_grid;
  Rng rng(opts.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (std::size_t pr = 0; pr < opts.pairs; ++pr) {
    const StepDensity p0 = sample_sublevel(scaled, N, E, rng);
    StepDensity p1;
    for (int tries = 0;; ++tries) {
      std::vector<double> v(N2);
      for (std::size_t i = 0; i < N2; ++i) v[i] = p0[i / 2] * std::exp(opts.perturbation * noise(rng));
      p1 = StepDensity::normalized(std::move(v));
      if (energy(scaled, p1) <= E) break;
      if (tries > 10000) throw Error(ErrorKind::invalid_level, "no fine-level partner inside the sublevel");
    }
    const Trajectory a = solve(scaled, p0, cfg);
    const Trajectory b = solve(scaled, p1, cfg);
    const double D0 = geodesic_distance(scaled, refine(p0, 2), p1, opts.geodesic).distance;
    for (double t : t_grid) {
      GrowthRow row;
      row.pair = pr;
      row.t = t;
      row.measured = geodesic_distance(scaled, refine(a.state_at(t), 2), b.state_at(t), opts.geodesic).distance;
      row.envelope = std::exp(-rep.rate * t) * D0 + M_lambda(rep.rate, t) * sqrt_kappa * rep.zeta_norm;
      row.ratio = row.envelope > 0.0 ? row.measured / row.envelope : (row.measured > 0.0 ? INFINITY : 0.0);
      rep.max_ratio = std::max(rep.max_ratio, row.ratio);
      rep.rows.push_back(row);
    }
  }
  rep.pass = rep.max_ratio <= 1.0 + opts.tolerance;
  return rep;
}

}  // namespace viscogs
