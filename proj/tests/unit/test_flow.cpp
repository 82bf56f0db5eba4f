#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "viscogs/analysis.hpp"
#include "viscogs/error.hpp"
#include "viscogs/flow.hpp"
#include "viscogs/ode.hpp"

using namespace viscogs;
using namespace viscogs::testing;

TEST_CASE("dopri5 on linear decay") {
  ode::State y{1.0, 2.0};
  ode::Options o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  std::vector<ode::DenseSegment> segs;
  ode::Hooks hooks;
  hooks.on_accept = [&](const ode::DenseSegment& s, ode::State&) {
    segs.push_back(s);
    return ode::AfterStep::proceed;
  };
  const auto f = [](double, const ode::State& u, ode::State& du) {
    du[0] = -u[0];
    du[1] = -3.0 * u[1];
  };
  const auto st = ode::dopri5(f, 0.0, y, 2.0, o, hooks);
  CHECK(st.t_final == 2.0);
  CHECK(y[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
  CHECK(y[1] == doctest::Approx(2.0 * std::exp(-6.0)).epsilon(1e-8));
  CHECK(st.accepted == segs.size());
  // Dense output is 4th order; check mid-step values.
  for (const auto& s : segs) {
    const double t = s.t0 + 0.5 * s.h;
    CHECK(s.eval(t, 0) == doctest::Approx(std::exp(-t)).epsilon(1e-8));
    CHECK(s.eval(s.t0, 0) == doctest::Approx(std::exp(-s.t0)).epsilon(1e-9));
  }
}

TEST_CASE("dopri5 hooks: early stop and inadmissible steps") {
  ode::State y{1.0};
  ode::Hooks hooks;
  hooks.on_accept = [](const ode::DenseSegment& s, ode::State&) {
    return s.t1() > 0.3 ? ode::AfterStep::stop : ode::AfterStep::proceed;
  };
  const auto st = ode::dopri5([](double, const ode::State&, ode::State& d) { d[0] = 1.0; }, 0.0, y, 5.0, {}, hooks);
  CHECK(st.stopped_early);
  CHECK(st.t_final < 5.0);

  // A step that would drop below 0.9 in one go is refused and halved.
  ode::State z{1.0};
  ode::Options o;
  o.h_init = 1.0;
  ode::Hooks guard;
  double last = 1.0;
  guard.admissible = [&](const ode::State& u) { return last - u[0] < 0.05; };
  guard.on_accept = [&](const ode::DenseSegment&, ode::State& u) {
    last = u[0];
    return ode::AfterStep::proceed;
  };
  const auto s2 = ode::dopri5([](double, const ode::State&, ode::State& d) { d[0] = -1.0; }, 0.0, z, 0.5, o, guard);
  CHECK(s2.inadmissible > 0);
  CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("vector field: oracle, zero mean, derivative") {
  const auto law = catalog_appendix_k(0.25);
  for (std::uint64_t k = 0; k < 40; ++k) {
    auto rng = case_rng(41, k);
    const std::size_t N = draw_N(rng, 2, 24);
    const auto p = sample_density(N, rng, 1.0, 0.05);
    std::vector<double> g(N);
    for (auto& v : g) v = draw(rng, -0.3, 0.3);
    const auto V = vector_field(law, p, g);
    // -k (xi - [k xi]/[k]) with xi = W'(p) - G
    double kx = 0, kk = 0;
    for (std::size_t i = 0; i < N; ++i) kx += law.k(p[i]) * (law.W.d1(p[i]) - g[i]), kk += law.k(p[i]);
    double scale = 0, m = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double o = -law.k(p[i]) * ((law.W.d1(p[i]) - g[i]) - kx / kk);
      scale = std::max(scale, std::abs(o));
      CHECK(V[i] == doctest::Approx(o).epsilon(1e-11).scale(scale));
      m += V[i] / N;
    }
    CHECK(std::abs(m) <= 1e-13 * (1 + scale));

    const auto y = sample_tangent(N, rng, 0.1);
    const auto DV = vector_field_derivative(law, p, y, g);
    const double h = 1e-6;
    std::vector<double> up(N), dn(N);
    for (std::size_t i = 0; i < N; ++i) up[i] = p[i] + h * y[i], dn[i] = p[i] - h * y[i];
    const auto Vu = vector_field(law, StepDensity(up), g), Vd = vector_field(law, StepDensity(dn), g);
    for (std::size_t i = 0; i < N; ++i) CHECK(DV[i] == doctest::Approx((Vu[i] - Vd[i]) / (2 * h)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("equilibrium stays put with zero dissipation") {
  const auto law = catalog_default();
  FlowConfig cfg;
  cfg.t_end = 1.0;
  const auto tr = solve(law, StepDensity::uniform(4), cfg);
  for (const auto& s : tr.states)
    for (double v : s.cells()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tr.dissipation.back() == 0.0);
  CHECK(edb_residual(tr) == 0.0);
}

TEST_CASE("flows rejects boundary densities and bad tolerances") {
  const auto law = catalog_default();
  try {
    solve(law, StepDensity::with_boundary({0.0, 2.0}), {});
    FAIL("expected invariant error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invariant);
  }
  FlowConfig bad;
  bad.rtol = 0.0;
  CHECK_THROWS_AS(solve(law, StepDensity::uniform(2), bad), Error);
  CHECK_THROWS_AS(solve(law, StepDensity::uniform(2), {}, std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("property: mass, floor, energy decay and EDB along random flows") {
  for (std::uint64_t k = 0; k < 24; ++k) {
    auto rng = case_rng(42, k);
    const auto law = (k % 3 == 0) ? catalog_double_well() : (k % 3 == 1) ? catalog_default() : catalog_appendix_k(0.25);
    const std::size_t N = draw_N(rng, 2, 16);
    const auto p0 = sample_density(N, rng, 2.0, 0.05);
    FlowConfig cfg;
    cfg.t_end = draw(rng, 0.2, 2.0);
    cfg.record_every = 0.05;
    const auto tr = solve(law, p0, cfg);
    CAPTURE(law.id);
    CAPTURE(N);
    const double floor = sublevel_density_floor(law, N, tr.energies.front());
    for (std::size_t j = 0; j < tr.states.size(); ++j) {
      double m = 0;
      for (double v : tr.states[j].cells()) m += v / N;
      CHECK(std::abs(m - 1.0) <= 1e-9);
      CHECK(tr.states[j].min_cell() >= floor * (1 - 1e-6));
      if (j > 0) CHECK(tr.energies[j] <= tr.energies[j - 1] + 1e-9 * (tr.times[j] - tr.times[j - 1]) + 1e-14);
      if (j > 0) CHECK(tr.dissipation[j] >= tr.dissipation[j - 1]);
    }
    CHECK(edb_residual(tr) <= 1e-6);
  }
}

TEST_CASE("semigroup property") {
  const auto law = catalog_double_well();
  auto rng = case_rng(43, 0);
  const auto p0 = sample_density(6, rng);
  FlowConfig cfg;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  cfg.t_end = 0.7;
  const auto whole = solve(law, p0, cfg);
  cfg.t_end = 0.3;
  const auto first = solve(law, p0, cfg);
  cfg.t_end = 0.4;
  const auto second = solve(law, first.states.back(), cfg);
  // Within 10x the local tolerance rtol |p| + atol.
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::abs(second.states.back()[i] - whole.states.back()[i]) <= 10 * (1e-10 * whole.states.back()[i] + 1e-12));
  // Dense output at an interior time agrees with a run stopped there.
  const auto mid = whole.state_at(0.3);
  for (std::size_t i = 0; i < 6; ++i) CHECK(mid[i] == doctest::Approx(first.states.back()[i]).epsilon(1e-8));
}

TEST_CASE("tangent flow keeps zero mean") {
  const auto law = catalog_default();
  auto rng = case_rng(44, 0);
  const auto p0 = sample_density(5, rng);
  const auto y0 = sample_tangent(5, rng);
  const auto zeta = sample_covector(5, rng, 0.1);
  FlowConfig cfg;
  cfg.record_every = 0.1;
  const auto tr = solve_with_tangent(law, p0, y0, zeta, cfg);
  REQUIRE(tr.with_tangent);
  REQUIRE(tr.tangents.size() == tr.states.size());
  for (const auto& y : tr.tangents) {
    double m = 0;
    for (double v : y.cells()) m += v / 5;
    CHECK(std::abs(m) <= 1e-12);
  }
  CHECK(tr.diagnostics.max_tangent_mean <= 1e-12);
  CHECK_THROWS_AS(solve(law, p0, cfg).tangent_at(0.5), Error);
}

TEST_CASE("energy increase rate is zero along a gradient flow") {
  const auto law = catalog_default();
  auto rng = case_rng(45, 0);
  FlowConfig cfg;
  cfg.record_every = 0.05;
  const auto tr = solve(law, sample_density(8, rng), cfg);
  CHECK(energy_increase_rate(tr) <= 1e-9);
}
