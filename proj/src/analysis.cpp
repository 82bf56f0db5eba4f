#include "viscogs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>

#include "viscogs/error.hpp"

namespace viscogs {

namespace {

double mean_k_ratio(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N) {
  double sk = 0.0, skx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double k = law.k(p[i]);
    sk += k;
    skx += k * (law.W.d1(p[i]) - G_N[i]);
  }
  return skx / sk;
}

void check_loading(const StepDensity& p, std::span<const double> G_N) {
  if (p.size() != G_N.size()) throw Error(ErrorKind::dimension_mismatch, "loading differs in N");
}

std::vector<double> replicate(const std::vector<double>& psi, std::size_t N) {
  if (psi.empty() || N % psi.size() != 0)
    throw Error(ErrorKind::invalid_resolution, "test function grid does not divide N");
  const std::size_t r = N / psi.size();
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i) out[i] = psi[i / r];
  return out;
}

}  // namespace

std::vector<double> hessian_density(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N) {
  check_loading(p, G_N);
  const double m = mean_k_ratio(law, p, G_N);
  std::vector<double> H(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double k = law.k(p[i]);
    H[i] = k * (k * law.W.d2(p[i]) + 0.5 * law.k.d1(p[i]) * (law.W.d1(p[i]) - G_N[i] - m));
  }
  return H;
}

double hessian_form(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N, const Covector& xi) {
  const auto H = hessian_density(law, p, G_N);
  double sk = 0.0, skx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double k = law.k(p[i]);
    sk += k;
    skx += k * xi[i];
  }
  const double lam = skx / sk;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += H[i] * (xi[i] - lam) * (xi[i] - lam);
  return s / static_cast<double>(p.size());
}

double lambda_hat(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N) {
  check_loading(p, G_N);
  const double gmin = *std::min_element(G_N.begin(), G_N.end());
  const double gmax = *std::max_element(G_N.begin(), G_N.end());
  auto F = [&](double q) {
    const double k1 = law.k.d1(q);
    return law.k(q) * law.W.d2(q) + 0.5 * k1 * law.W.d1(q) - 0.5 * std::max(k1 * gmin, k1 * gmax);
  };
  std::vector<double> nodes = law.constants.grid.nodes();
  for (double bp : law.breakpoints) nodes.push_back(bp);
  std::sort(nodes.begin(), nodes.end());
  std::size_t imin = 0;
  double fmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double v = F(nodes[i]);
    if (v < fmin) {
      fmin = v;
      imin = i;
    }
  }
  if (imin > 0 && imin + 1 < nodes.size()) {
    auto r = boost::math::tools::brent_find_minima([&](double lq) { return F(std::exp(lq)); },
                                                   std::log(nodes[imin - 1]), std::log(nodes[imin + 1]), 52);
    fmin = std::min(fmin, r.second);
  }
  const LawConstants& c = law.constants;
  const double sup_k1 = c.kprime_inf >= 0.0 ? c.C_k : c.kprime_sup;
  const double inf_k1 = c.kprime_inf;
  const double m = mean_k_ratio(law, p, G_N);
  return fmin - 0.5 * std::max(m * sup_k1, m * inf_k1);
}

double L_inf(const MaterialLaw& law, double E) {
  const LawConstants& c = law.constants;
  const double g = c.G_sup_norm;
  return c.lambda_W -
         0.5 * c.C_k * ((1.0 + c.kappa_hi / c.kappa_lo) * g + (c.B1 * (E + g) + c.B2) / c.kappa_lo);
}

double M_lambda(double lambda, double t) {
  if (t < 0.0) throw Error(ErrorKind::invalid_parameter, "M_lambda needs t >= 0");
  if (std::abs(lambda) <= 1e-12) return t;
  return -std::expm1(-lambda * t) / lambda;
}

double E_tilde(const MaterialLaw& law, double E) {
  const LawConstants& c = law.constants;
  if (!c.C1 || !c.C2) throw Error(ErrorKind::unsupported_law, "law has no doubling constants");
  return 2.0 * *c.C1 * E + *c.C2 + (2.0 * *c.C1 + 1.0) * c.G_sup_norm;
}

double L_glob(const MaterialLaw& law, double E) { return L_inf(law, E_tilde(law, E)); }

StretchingReport stretching_report(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N,
                                   double E, std::size_t samples, Rng& rng) {
  StretchingReport rep;
  rep.H_diag = hessian_density(law, p, G_N);
  rep.lambda_hat = lambda_hat(law, p, G_N);
  rep.L_inf_of_E = L_inf(law, E);
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < samples; ++j) {
    Covector xi = sample_covector(p.size(), rng);
    QuadraticSample s;
    s.xi = xi.cells();
    s.hessian = hessian_form(law, p, G_N, xi);
    s.onsager = 2.0 * dissipation_dual(law, p, xi);
    s.ratio = s.onsager > 0.0 ? s.hessian / s.onsager : std::numeric_limits<double>::infinity();
    rep.min_ratio = std::min(rep.min_ratio, s.ratio);
    rep.samples.push_back(std::move(s));
  }
  return rep;
}

double stretching_rate(const MaterialLaw& law, const StepDensity& p, std::span<const double> G_N,
                       const TangentVector& y, const Covector& zeta) {
  const Covector xi = metric_apply(law, p, y);
  return -hessian_form(law, p, G_N, xi) + pairing(y.cells(), zeta.cells());
}

const char* to_string(DistanceMode m) { return m == DistanceMode::intrinsic ? "intrinsic" : "bhattacharya"; }

double locality_threshold(const MaterialLaw& law, double E) {
  return std::sqrt(8.0 / std::max(1.0, -L_inf(law, E + 1.0)));
}

ContractionReport contraction_check(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1, double E,
                                    const std::vector<double>& t_grid, const ContractionOptions& opts) {
  const double E0 = energy(law, p0), E1 = energy(law, p1);
  if (E0 > E || E1 > E) {
    std::ostringstream os;
    os << "initial energies " << E0 << ", " << E1 << " exceed the level " << E;
    throw Error(ErrorKind::invalid_parameter, os.str());
  }
  if (t_grid.empty()) throw Error(ErrorKind::invalid_parameter, "empty time grid");
  ContractionReport rep;
  rep.mode = opts.mode;
  rep.E = E;
  rep.tolerance = opts.tolerance;

  auto distance = [&](const StepDensity& a, const StepDensity& b) {
    if (opts.mode == DistanceMode::bhattacharya) return bhattacharya(a, b);
    return geodesic_distance(law, a, b, opts.geodesic).distance;
  };

  if (opts.mode == DistanceMode::bhattacharya) {
    rep.rate = opts.rate_override ? *opts.rate_override : L_glob(law, E);
    rep.prefactor = std::sqrt(law.constants.kappa_hi / law.constants.kappa_lo);
  } else {
    rep.rate = opts.rate_override ? *opts.rate_override : L_inf(law, E + 2.0);
    rep.prefactor = 1.0;
  }
  rep.initial_distance = distance(p0, p1);
  rep.locality_threshold = locality_threshold(law, E);
  if (opts.mode == DistanceMode::intrinsic && rep.initial_distance > rep.locality_threshold) {
    std::ostringstream os;
    os << "initial distance " << rep.initial_distance << " exceeds the locality threshold " << rep.locality_threshold;
    throw Error(ErrorKind::invalid_parameter, os.str());
  }

  FlowConfig cfg = opts.flow;
  cfg.t_end = std::max(*std::max_element(t_grid.begin(), t_grid.end()), 1e-12);
  cfg.record_times = t_grid;
  const Trajectory a = solve(law, p0, cfg);
  const Trajectory b = solve(law, p1, cfg);

  rep.max_ratio = 0.0;
  for (double t : t_grid) {
    ContractionRow row;
    row.t = t;
    row.measured = distance(a.state_at(t), b.state_at(t));
    const double log_env = std::log(rep.prefactor) - rep.rate * t + std::log(rep.initial_distance);
    row.envelope = std::exp(log_env);
    if (row.measured == 0.0) row.ratio = 0.0;
    else if (rep.initial_distance == 0.0) row.ratio = std::numeric_limits<double>::infinity();
    else row.ratio = std::exp(std::log(row.measured) - log_env);
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  rep.pass = rep.max_ratio <= 1.0 + opts.tolerance;
  return rep;
}

double edb_residual(const Trajectory& tr) {
  if (tr.energies.empty() || tr.dissipation.empty())
    throw Error(ErrorKind::invalid_parameter, "trajectory has no energy or dissipation record");
  const double E0 = tr.energies.front();
  return std::abs(E0 - tr.energies.back() - tr.dissipation.back()) / (1.0 + std::abs(E0));
}

EviReport evi_residual(const MaterialLaw& law, const Trajectory& tr, const StepDensity& q, double E, double lambda,
                       const std::vector<std::pair<double, double>>& pairs, const EviOptions& opts) {
  const auto g = tr.loading;
  EviReport rep;
  rep.lambda_used = lambda;
  rep.tolerance = opts.tolerance;
  rep.E_q = energy(law, q, g);
  if (rep.E_q > E || tr.energies.front() > E) {
    std::ostringstream os;
    os << "comparison energies exceed the level " << E;
    throw Error(ErrorKind::invalid_parameter, os.str());
  }
  auto distance = [&](const StepDensity& a) {
    if (opts.mode == DistanceMode::bhattacharya) return bhattacharya(a, q);
    return geodesic_distance(law, a, q, opts.geodesic).distance;
  };
  rep.worst_residual = -std::numeric_limits<double>::infinity();
  for (auto [s, t] : pairs) {
    if (!(s < t) || s < 0.0) throw Error(ErrorKind::invalid_parameter, "EVI pairs need 0 <= s < t");
    const StepDensity ps = tr.state_at(s), pt = tr.state_at(t);
    const double ds = distance(ps), dt = distance(pt);
    const double tau = t - s;
    EviRow row;
    row.s = s;
    row.t = t;
    row.lhs = 0.5 * std::exp(lambda * tau) * dt * dt - 0.5 * ds * ds;
    // Integrating factor of the differential inequality: int_0^tau e^{lambda r} dr.
    row.rhs = M_lambda(-lambda, tau) * (rep.E_q - energy(law, pt, g));
    row.residual = row.lhs - row.rhs;
    rep.worst_residual = std::max(rep.worst_residual, row.residual);
    rep.rows.push_back(row);
  }
  if (rep.rows.empty()) rep.worst_residual = 0.0;
  rep.worst_normalized = rep.worst_residual / (1.0 + std::abs(rep.E_q));
  rep.pass = rep.worst_normalized <= opts.tolerance;
  return rep;
}

std::vector<std::pair<double, double>> evi_lambda_sweep(const MaterialLaw& law, const Trajectory& tr,
                                                        const StepDensity& q, double E,
                                                        const std::vector<double>& lambdas,
                                                        const std::vector<std::pair<double, double>>& pairs,
                                                        const EviOptions& opts) {
  std::vector<std::pair<double, double>> out;
  for (double lam : lambdas) out.emplace_back(lam, evi_residual(law, tr, q, E, lam, pairs, opts).worst_normalized);
  return out;
}

double TestFunction::a(double t) const {
  if (t >= T_c) return 0.0;
  double poly = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 0;) poly = poly * t + coeffs[j];
  return std::pow(T_c - t, order) * poly;
}

double TestFunction::da(double t) const {
  if (t >= T_c) return 0.0;
  double poly = 0.0, dpoly = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 0;) {
    dpoly = dpoly * t + poly;
    poly = poly * t + coeffs[j];
  }
  const double w = T_c - t;
  return -order * std::pow(w, order - 1) * poly + std::pow(w, order) * dpoly;
}

double weak_form_residual(const MaterialLaw& law, const Trajectory& tr, const std::vector<TestFunction>& tests) {
  using Gauss = boost::math::quadrature::gauss<double, 7>;
  double worst = 0.0;
  const std::span<const double> g(tr.loading);
  for (const auto& tf : tests) {
    if (tf.order < 1) throw Error(ErrorKind::invalid_parameter, "test function order must be >= 1");
    if (tf.T_c > tr.t_end() * (1.0 + 1e-12))
      throw Error(ErrorKind::invalid_parameter, "test function support exceeds the trajectory horizon");
    const std::vector<double> psi = replicate(tf.psi, tr.N);
    const double lhs = tf.a(0.0) * pairing(tr.states.front().cells(), psi);

    auto integrand = [&](double t) {
      const StepDensity p = tr.state_at(t);
      const TangentVector V = vector_field(law, p, g);  // -K DE
      return -tf.da(t) * pairing(p.cells(), psi) - tf.a(t) * pairing(V.cells(), psi);
    };
    std::vector<double> cuts{0.0};
    for (const auto& seg : tr.dense)
      if (seg.t1() < tf.T_c) cuts.push_back(seg.t1());
    cuts.push_back(tf.T_c);
    double rhs = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
      if (cuts[k + 1] > cuts[k]) rhs += Gauss::integrate(integrand, cuts[k], cuts[k + 1]);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

}  // namespace viscogs
