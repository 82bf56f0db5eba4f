// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "viscogs/analysis.hpp"
#include "viscogs/error.hpp"
#include "viscogs/experiments.hpp"
#include "viscogs/flow.hpp"
#include "viscogs/metric.hpp"
#include "viscogs/sampling.hpp"
#include "viscogs/state.hpp"

using namespace viscogs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double g_norm(const MaterialLaw& law, const StepDensity& p, const TangentVector& y) {
  return std::sqrt(2.0 * dissipation_primal(law, p, y));
}

std::vector<double> sine_loading(double amp, std::size_t N) {
  std::vector<double> g(N);
  for (std::size_t i = 0; i < N; ++i) g[i] = amp * std::sin(2.0 * std::numbers::pi * (i + 0.5) / N);
  return g;
}

// Disjoint-support endpoints in P_2: 2 on [1/2,1) and 2 on [0,1/2).
StepDensity disjoint_a() { return StepDensity::with_boundary({0.0, 2.0}); }
StepDensity disjoint_b() { return StepDensity::with_boundary({2.0, 0.0}); }

Outcome bhattacharya_anchors() {
  const auto a = disjoint_a(), b = disjoint_b();
  const auto t0 = std::chrono::steady_clock::now();
  double he = 0, bh = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    he = hellinger(a, b);
    bh = bhattacharya(a, b);
  }
  const double per_call_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
  const double e_he = std::abs(he - std::sqrt(2.0)), e_bh = std::abs(bh - std::numbers::pi / 2);
  return {e_he <= 1e-10 && e_bh <= 1e-10 && per_call_ms < 1.0,
          fmt("|He-sqrt2|=%.1e |Bh-pi/2|=%.1e, %.4f ms per pair", e_he, e_bh, per_call_ms)};
}

Outcome optimizer_oracle() {
  const auto law = catalog_linear_k(4.0);
  Rng rng(20240101);
  const std::size_t Ns[] = {2, 4, 8, 16};
  double worst = 0.0;
  int failures = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 50; ++i) {
    const std::size_t N = Ns[i % 4];
    const auto a = sample_density(N, rng), b = sample_density(N, rng);
    const auto r = geodesic_distance(law, a, b);
    const double bh = bhattacharya(a, b);
    const double rel = std::abs(r.distance - bh) / bh;
    worst = std::max(worst, rel);
    if (rel > 1e-4) ++failures;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failures == 0 && secs < 120.0, fmt("50 pairs, worst relative error %.2e, %.1f s", worst, secs)};
}

Outcome sandwich() {
  const auto law = catalog_appendix_k(0.01);
  const double lo = lower_edge_distance_bound(law), hi = upper_edge_distance_bound(law);
  Rng rng(777);
  const std::size_t Ns[] = {2, 4, 8};
  int failures = 0;
  double worst_lo = 1e300, worst_hi = 1e300;
  for (int i = 0; i < 20; ++i) {
    // Spread the pairs across both sides of the viscosity jump at p = 2.
    const std::size_t N = Ns[i % 3];
    const auto a = sample_density(N, rng, 0.7), b = sample_density(N, rng, 0.7);
    const double bh = bhattacharya(a, b);
    const double d = geodesic_distance(law, a, b).distance;
    const double m_lo = d - lo * bh * (1.0 - 1e-3), m_hi = hi * bh - d;
    worst_lo = std::min(worst_lo, m_lo / bh);
    worst_hi = std::min(worst_hi, m_hi / bh);
    if (m_lo < 0.0 || m_hi < 0.0) ++failures;
  }
  return {failures == 0, fmt("20 pairs, C_low=%.4f C_upp=%.4f, min margins (lower %.3e, upper %.3e) x Bh", lo, hi,
                             worst_lo, worst_hi)};
}

Outcome counterexample() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto scan = scan_counterexample({8, 16, 32, 64, 128, 256, 512, 1024}, 0.01);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!scan.first_M) return {false, fmt("no M <= 1024 reaches margin 0.01 (%.1f s)", secs)};
  const auto it = std::find_if(scan.entries.begin(), scan.entries.end(),
                               [&](const auto& e) { return e.M == *scan.first_M; });
  return {secs < 300.0, fmt("first M=%zu: J=%.6f < pi/2-0.01=%.6f (%.1f s)", *scan.first_M, it->J,
                            std::numbers::pi / 2 - 0.01, secs)};
}

Outcome edb() {
  Rng rng(55);
  int failures = 0;
  double worst8 = 0.0, worst10 = 0.0, min_gain = 1e300;
  const MaterialLaw laws[] = {catalog_default(), catalog_double_well()};
  for (int i = 0; i < 20; ++i) {
    const auto& law = laws[i % 2];
    const std::size_t N = std::size_t{2} << (i % 5);  // 2..32
    const auto p0 = sample_density(N, rng);
    const auto G = sine_loading(i % 3 == 0 ? 0.3 : 0.0, N);

    // Stop time: first record at which the vector field has dropped below 1e-8. The
    // probe runs tight because at atol 1e-10 the state jitters at |V| ~ 1e-7.
    FlowConfig probe;
    probe.t_end = 200.0;
    probe.rtol = 1e-11;
    probe.atol = 1e-14;
    probe.record_every = 0.05;
    probe.steady_stop = false;
    const auto pr = solve(law, p0, probe, G);
    double T = -1.0;
    for (std::size_t k = 0; k < pr.times.size(); ++k) {
      const auto v = vector_field(law, pr.states[k], G);
      double n = 0.0;
      for (double x : v.cells()) n = std::max(n, std::abs(x));
      if (n < 1e-8) {
        T = pr.times[k];
        break;
      }
    }
    if (T < 0.0) return {false, fmt("flow %d: field stays above 1e-8 up to t=200", i)};

    FlowConfig c8;
    c8.t_end = T;
    c8.steady_stop = false;
    c8.rtol = 1e-8;
    c8.atol = 1e-10;
    FlowConfig c10 = c8;
    c10.rtol = 1e-10;
    c10.atol = 1e-12;
    const double r8 = edb_residual(solve(law, p0, c8, G));
    const double r10 = edb_residual(solve(law, p0, c10, G));
    worst8 = std::max(worst8, r8);
    worst10 = std::max(worst10, r10);
    min_gain = std::min(min_gain, r8 / std::max(r10, 1e-300));
    if (r8 > 1e-6) ++failures;
  }
  // Suite residual (worst over flows) must drop tenfold. Single flows can show
  // smaller ratios when the loose run's error components happen to cancel.
  const double gain = worst8 / worst10;
  return {failures == 0 && gain >= 10.0,
          fmt("20 flows, worst residual %.2e (rtol 1e-8) -> %.2e (rtol 1e-10), gain %.1fx; per-flow min %.1fx",
              worst8, worst10, gain, min_gain)};
}

struct TangentInstance {
  MaterialLaw law;
  StepDensity p0;
  TangentVector y0;
  Covector zeta;
  std::vector<double> G;
  Trajectory tr;
};

std::vector<TangentInstance> tangent_instances() {
  Rng rng(909);
  std::vector<TangentInstance> out;
  const MaterialLaw laws[] = {catalog_default(), catalog_double_well(), catalog_appendix_k(0.25)};
  for (int i = 0; i < 20; ++i) {
    TangentInstance inst;
    inst.law = laws[i % 3];
    const std::size_t N = std::size_t{2} << (i % 4);
    inst.p0 = sample_density(N, rng);
    inst.y0 = sample_tangent(N, rng, 0.5);
    inst.zeta = sample_covector(N, rng, i % 2 ? 0.2 : 0.0);
    inst.G = sine_loading(i % 4 == 1 ? 0.2 : 0.0, N);
    FlowConfig cfg;
    cfg.t_end = 1.0;
    cfg.rtol = 1e-12;
    cfg.atol = 1e-14;
    cfg.steady_stop = false;
    inst.tr = solve_with_tangent(inst.law, inst.p0, inst.y0, inst.zeta, cfg, inst.G);
    out.push_back(std::move(inst));
  }
  return out;
}

Outcome stretching(const std::vector<TangentInstance>& insts) {
  int failures = 0;
  double worst = 0.0;
  for (const auto& in : insts) {
    auto R = [&](double t) { return dissipation_primal(in.law, in.tr.state_at(t), in.tr.tangent_at(t)); };
    for (double t : {0.2, 0.5, 0.8}) {
      const double rate = stretching_rate(in.law, in.tr.state_at(t), in.G, in.tr.tangent_at(t), in.zeta);
      const double h = 2.5e-3;
      const double fd_h = (R(t + h) - R(t - h)) / (2 * h);
      const double fd_h2 = (R(t + h / 2) - R(t - h / 2)) / h;
      // Richardson combination of the halved pair cancels the h^2 term.
      const double rich = (4.0 * fd_h2 - fd_h) / 3.0;
      const double scale = std::max(std::abs(rate), 1e-12);
      const double err = std::abs(rich - rate) / scale;
      worst = std::max(worst, err);
      if (err > 1e-4 || std::abs(fd_h2 - rate) > std::abs(fd_h - rate) + 1e-12 * scale) ++failures;
    }
  }
  return {failures == 0, fmt("20 instances x 3 times, worst relative mismatch %.2e (h=2.5e-3 halved, extrapolated)", worst)};
}

Outcome growth(const std::vector<TangentInstance>& insts) {
  int failures = 0;
  double worst = -1e300;
  for (const auto& in : insts) {
    const double E = energy(in.law, in.p0, in.G);
    const double L = L_inf(in.law, E);
    double zinf = 0.0;
    for (double z : in.zeta.cells()) zinf = std::max(zinf, std::abs(z));
    const double y0n = g_norm(in.law, in.p0, in.y0);
    for (int j = 1; j <= 20; ++j) {
      const double t = j / 20.0;
      const double env = std::exp(-L * t) * y0n + M_lambda(L, t) * std::sqrt(in.law.constants.kappa_hi) * zinf;
      const double meas = g_norm(in.law, in.tr.state_at(t), in.tr.tangent_at(t));
      const double viol = (meas - env) / env;
      worst = std::max(worst, viol);
      if (viol > 1e-6) ++failures;
    }
  }
  return {failures == 0, fmt("20 instances x 20 times, worst (measured-envelope)/envelope %.3e", worst)};
}

Outcome contraction() {
  const auto law = catalog_double_well();
  Rng rng(4242);
  std::vector<double> tg;
  for (int j = 0; j <= 20; ++j) tg.push_back(0.1 * j);
  int failures = 0;
  double worst = 0.0, rate = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t N = std::size_t{2} << (i % 4);
    const auto a = sample_density(N, rng), b = sample_density(N, rng);
    const double E = std::max(energy(law, a), energy(law, b));
    ContractionOptions opts;
    opts.flow.rtol = 1e-10;
    opts.flow.atol = 1e-12;
    const auto rep = contraction_check(law, a, b, E, tg, opts);
    worst = std::max(worst, rep.max_ratio);
    rate = rep.rate;
    if (!rep.pass) ++failures;
  }
  return {failures == 0, fmt("20 pairs, worst Bh(t)/envelope %.6f (last rate %.3g)", worst, rate)};
}

Outcome evi() {
  const auto law = catalog_double_well();
  Rng rng(31337);
  int failures = 0;
  double worst = -1e300;
  std::vector<std::pair<double, double>> st;
  for (int j = 0; j < 20; ++j) {
    const double s = 0.05 * (j % 5);
    st.emplace_back(s, s + 0.1 * (1 + j / 5));
  }
  for (int i = 0; i < 10; ++i) {
    const std::size_t N = std::size_t{2} << (i % 3);
    const auto p0 = sample_density(N, rng), q = sample_density(N, rng);
    const double E = std::max(energy(law, p0), energy(law, q));
    FlowConfig cfg;
    cfg.t_end = 1.0;
    cfg.rtol = 1e-11;
    cfg.atol = 1e-13;
    cfg.steady_stop = false;
    const auto tr = solve(law, p0, cfg);
    const auto rep = evi_residual(law, tr, q, E, L_glob(law, E), st);
    worst = std::max(worst, rep.worst_normalized);
    if (!rep.pass) ++failures;
  }
  return {failures == 0, fmt("10 trajectories x 20 (s,t), worst normalized residual %.3e (lambda = L_glob(E))", worst)};
}

Outcome invariants() {
  std::size_t cases = 0, failures = 0;
  auto check = [&](bool ok) {
    ++cases;
    if (!ok) ++failures;
  };
  Rng rng(123456);
  const auto t0 = std::chrono::steady_clock::now();

  // Flow invariants: mass, positivity floor, energy monotonicity.
  const MaterialLaw laws[] = {catalog_default(), catalog_double_well(), catalog_appendix_k(0.25)};
  for (int i = 0; i < 60; ++i) {
    const auto& law = laws[i % 3];
    const std::size_t N = std::size_t{2} << (i % 5);
    const auto p0 = sample_density(N, rng, 1.0);
    FlowConfig cfg;
    cfg.t_end = 5.0;
    const auto tr = solve(law, p0, cfg);
    const double floor = sublevel_density_floor(law, N, energy(law, p0));
    bool mass_ok = true, pos_ok = true, mono_ok = true;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      mass_ok &= std::abs(average(tr.states[k].cells()) - 1.0) <= 1e-10;
      pos_ok &= tr.states[k].min_cell() >= floor;
      if (k > 0) mono_ok &= tr.energies[k] <= tr.energies[k - 1] + 1e-9 * (tr.times[k] - tr.times[k - 1]) + 1e-14;
    }
    check(mass_ok);
    check(pos_ok);
    check(mono_ok);
  }
  // Tangent zero mean.
  for (int i = 0; i < 40; ++i) {
    const auto& law = laws[i % 3];
    const std::size_t N = std::size_t{2} << (i % 4);
    const auto p0 = sample_density(N, rng);
    FlowConfig cfg;
    cfg.t_end = 1.0;
    const auto tr = solve_with_tangent(law, p0, sample_tangent(N, rng), sample_covector(N, rng, 0.3), cfg);
    bool ok = true;
    for (const auto& y : tr.tangents) ok &= std::abs(average(y.cells())) <= 1e-10;
    check(ok);
  }
  // Triangle inequality and symmetry.
  for (int i = 0; i < 200; ++i) {
    const std::size_t N = 1 + i % 16;
    const auto a = sample_density(N, rng), b = sample_density(N, rng), c = sample_density(N, rng);
    check(bhattacharya(a, c) <= bhattacharya(a, b) + bhattacharya(b, c) + 1e-12 &&
          bhattacharya(a, b) == bhattacharya(b, a));
  }
  // (8/pi^2) Bh^2 <= He^2 <= L1 <= 2 He <= 2 Bh.
  for (int i = 0; i < 200; ++i) {
    const std::size_t N = 1 + i % 16;
    const auto a = sample_density(N, rng, 0.5), b = sample_density(N, rng, 0.5);
    const double bh = bhattacharya(a, b), he = hellinger(a, b), l1 = l1_distance(a, b);
    const double tol = 1e-12;
    check(8.0 / (std::numbers::pi * std::numbers::pi) * bh * bh <= he * he + tol && he * he <= l1 + tol &&
          l1 <= 2 * he + tol && he <= bh + tol);
  }
  // min(p0,p1) <= gamma(s) <= 2 max(p0,p1) on 33 samples.
  std::vector<double> ss;
  for (int j = 0; j <= 32; ++j) ss.push_back(j / 32.0);
  for (int i = 0; i < 100; ++i) {
    const auto a = sample_density(8, rng, 0.5), b = sample_density(8, rng, 0.5);
    bool ok = true;
    try {
      ok = bh_geodesic_bounds_check(a, b, ss).worst_margin >= -1e-10;
    } catch (const Error&) {
      ok = false;
    }
    check(ok);
  }
  // lambda(s) nondecreasing along shots.
  for (int i = 0; i < 40; ++i) {
    const auto& law = laws[i % 3];
    const std::size_t N = std::size_t{2} << (i % 3);
    const auto p0 = sample_density(N, rng);
    const auto xi = sample_covector(N, rng, 0.3);
    bool ok = true;
    try {
      const auto shot = geodesic_shoot(law, p0, xi, 1.0);
      for (std::size_t k = 1; k < shot.size(); ++k)
        ok &= shot[k].lambda >= shot[k - 1].lambda - 1e-10 * (1.0 + std::abs(shot[k - 1].lambda));
    } catch (const LeftDomain&) {
      // Shots that leave P_N are not counted.
      continue;
    }
    check(ok);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failures == 0 && cases >= 500 && secs < 600.0,
          fmt("%zu property cases, %zu failures, %.1f s", cases, failures, secs)};
}

}  // namespace

int main() {
  const auto insts = tangent_instances();
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 Bhattacharya anchors", bhattacharya_anchors},
      {"2 optimizer vs closed form", optimizer_oracle},
      {"3 distance sandwich", sandwich},
      {"4 refinement counterexample", counterexample},
      {"5 energy-dissipation balance", edb},
      {"6 stretching relation", [&] { return stretching(insts); }},
      {"7 growth envelope", [&] { return growth(insts); }},
      {"8 Bhattacharya contraction", contraction},
      {"9 sublevel EVI", evi},
      {"10 invariant suite", invariants},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s  %-30s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
