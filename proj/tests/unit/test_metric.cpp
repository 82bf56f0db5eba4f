#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "viscogs/error.hpp"
#include "viscogs/experiments.hpp"
#include "viscogs/metric.hpp"

using namespace viscogs;
using namespace viscogs::testing;

namespace {

const double kPi = std::numbers::pi;

StepDensity disjoint_a() { return StepDensity::with_boundary({0.0, 2.0}); }
StepDensity disjoint_b() { return StepDensity::with_boundary({2.0, 0.0}); }

double affinity(const StepDensity& a, const StepDensity& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::sqrt(a[i] * b[i]);
  return s / a.size();
}

// Great circle through sqrt(a), sqrt(b) on the unit sphere of L2(0,1).
std::vector<double> slerp(const StepDensity& a, const StepDensity& b, double s) {
  const double th = std::acos(std::clamp(affinity(a, b), -1.0, 1.0));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = (std::sin((1 - s) * th) * std::sqrt(a[i]) + std::sin(s * th) * std::sqrt(b[i])) / std::sin(th);
    out[i] = r * r;
  }
  return out;
}

}  // namespace

TEST_CASE("Bhattacharya anchors for the disjoint-support pair") {
  CHECK(std::abs(hellinger(disjoint_a(), disjoint_b()) - std::sqrt(2.0)) <= 1e-15);
  CHECK(std::abs(bhattacharya(disjoint_a(), disjoint_b()) - kPi / 2) <= 1e-15);
  CHECK(l1_distance(disjoint_a(), disjoint_b()) == doctest::Approx(2.0));
}

TEST_CASE("Bhattacharya metric axioms on random triples") {
  for (std::uint64_t k = 0; k < 200; ++k) {
    auto rng = case_rng(31, k);
    const std::size_t N = draw_N(rng, 1, 16);
    const auto a = sample_density(N, rng), b = sample_density(N, rng), c = sample_density(N, rng);
    CHECK(bhattacharya(a, b) == bhattacharya(b, a));
    CHECK(bhattacharya(a, a) <= 1e-7);
    CHECK(bhattacharya(a, c) <= bhattacharya(a, b) + bhattacharya(b, c) + 1e-12);
    CHECK(bhattacharya(a, b) == doctest::Approx(std::acos(std::min(1.0, affinity(a, b)))).epsilon(1e-12));
  }
}

TEST_CASE("chain (8/pi^2) Bh^2 <= He^2 <= L1 <= 2 He <= 2 Bh") {
  for (std::uint64_t k = 0; k < 200; ++k) {
    auto rng = case_rng(32, k);
    const std::size_t N = draw_N(rng, 1, 32);
    const auto a = sample_density(N, rng, 0.5), b = sample_density(N, rng, 0.5);
    const double bh = bhattacharya(a, b), he = hellinger(a, b), l1 = l1_distance(a, b);
    CHECK(8.0 / (kPi * kPi) * bh * bh <= he * he * (1 + 1e-12) + 1e-15);
    CHECK(he * he <= l1 * (1 + 1e-12) + 1e-15);
    CHECK(l1 <= 2 * he * (1 + 1e-12) + 1e-15);
    CHECK(he <= bh * (1 + 1e-12) + 1e-15);
    // He^2 = 2 - 2 cos Bh
    CHECK(he * he == doctest::Approx(2 - 2 * std::cos(bh)).epsilon(1e-10));
  }
}

TEST_CASE("closed-form Bh geodesic") {
  SUBCASE("disjoint pair is uniform at the midpoint") {
    const auto m = bh_geodesic(disjoint_a(), disjoint_b(), 0.5);
    CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m[1] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("property: great circle at constant speed, in P_N, within cellwise bounds") {
    for (std::uint64_t k = 0; k < 60; ++k) {
      auto rng = case_rng(33, k);
      const std::size_t N = draw_N(rng, 2, 16);
      const auto a = sample_density(N, rng), b = sample_density(N, rng);
      const double d = bhattacharya(a, b);
      for (double s : {0.1, 0.37, 0.5, 0.9}) {
        const auto g = bh_geodesic(a, b, s);
        const auto o = slerp(a, b, s);
        for (std::size_t i = 0; i < N; ++i) CHECK(g[i] == doctest::Approx(o[i]).epsilon(1e-10));
        CHECK(bhattacharya(a, g) == doctest::Approx(s * d).epsilon(1e-8));
        double m = 0;
        for (double v : g.cells()) m += v / N;
        CHECK(m == doctest::Approx(1.0).epsilon(1e-13));
      }
      std::vector<double> samples;
      for (int j = 0; j <= 50; ++j) samples.push_back(j / 50.0);
      CHECK(bh_geodesic_bounds_check(a, b, samples).worst_margin >= -1e-10);
      const auto v = bh_geodesic_velocity(a, b);
      const auto g = bh_geodesic(a, b, 1e-6);
      for (std::size_t i = 0; i < N; ++i) CHECK(v[i] == doctest::Approx((g[i] - a[i]) / 1e-6).epsilon(1e-4));
    }
  }
}

TEST_CASE("shooting reproduces the Bh geodesic for k = 4p") {
  const auto law = catalog_linear_k(4.0);
  for (std::uint64_t k = 0; k < 10; ++k) {
    auto rng = case_rng(34, k);
    const std::size_t N = draw_N(rng, 2, 8);
    const auto a = sample_density(N, rng, 4.0), b = sample_density(N, rng, 4.0);
    const Covector xi0 = metric_apply(law, a, bh_geodesic_velocity(a, b));
    const auto shot = geodesic_shoot(law, a, xi0, 1.0);
    REQUIRE(shot.size() >= 2);
    for (const auto& st : shot) {
      const auto g = bh_geodesic(a, b, st.s);
      for (std::size_t i = 0; i < N; ++i) CHECK(std::abs(st.gamma[i] - g[i]) <= 1e-6);
    }
    const double bh = bhattacharya(a, b);
    CHECK(shooting_action(law, a, xi0) == doctest::Approx(bh * bh).epsilon(1e-8));
  }
}

TEST_CASE("discrete geodesic distance") {
  SUBCASE("k = 4p matches Bh, and 2/sqrt(kappa) Bh for other kappa") {
    for (std::uint64_t k = 0; k < 12; ++k) {
      auto rng = case_rng(35, k);
      const std::size_t N = draw_N(rng, 2, 8);
      const double kappa = (k % 2 == 0) ? 4.0 : 9.0;
      const auto law = catalog_linear_k(kappa);
      const auto a = sample_density(N, rng), b = sample_density(N, rng);
      const auto r = geodesic_distance(law, a, b);
      CHECK(r.converged);
      CHECK(r.distance == doctest::Approx(2.0 / std::sqrt(kappa) * bhattacharya(a, b)).epsilon(1e-4));
      CHECK(r.path.knots.size() == 34);
      CHECK(r.path.knots.front().cells() == a.cells());
      CHECK(r.path.knots.back().cells() == b.cells());
    }
  }
  SUBCASE("Richardson in the knot count removes the chord bias") {
    const auto law = catalog_linear_k(4.0);
    GeodesicOptions o;
    o.richardson = true;
    const auto r = geodesic_distance(law, disjoint_a(), disjoint_b(), o);
    CHECK(std::abs(r.distance - kPi / 2) <= 1e-6);
    REQUIRE(r.raw_distance.has_value());
    CHECK(*r.raw_distance < kPi / 2);
    CHECK(std::abs(*r.raw_distance - kPi / 2) > 1e-5);
  }
  SUBCASE("property: triangle inequality and Bh sandwich for the appendix law") {
    const auto law = catalog_appendix_k(0.25);
    for (std::uint64_t k = 0; k < 8; ++k) {
      auto rng = case_rng(36, k);
      const std::size_t N = draw_N(rng, 2, 4);
      const auto a = sample_density(N, rng, 0.8), b = sample_density(N, rng, 0.8), c = sample_density(N, rng, 0.8);
      const double ab = geodesic_distance(law, a, b).distance, bc = geodesic_distance(law, b, c).distance;
      const double ac = geodesic_distance(law, a, c).distance;
      CHECK(ac <= (ab + bc) * (1 + 1e-4));
      for (auto [x, y, d] : {std::tuple{a, b, ab}, std::tuple{b, c, bc}}) {
        const double bh = bhattacharya(x, y);
        CHECK(d >= lower_edge_distance_bound(law) * bh * (1 - 1e-3));
        CHECK(d <= upper_edge_distance_bound(law) * bh * (1 + 1e-9));
      }
    }
  }
  SUBCASE("boundary endpoints are accepted, mismatched sizes are not") {
    CHECK(geodesic_distance(catalog_default(), disjoint_a(), disjoint_b()).distance > 0.0);
    CHECK_THROWS_AS(geodesic_distance(catalog_default(), StepDensity::uniform(2), StepDensity::uniform(3)), Error);
  }
}

TEST_CASE("distance ladder") {
  SUBCASE("k = 4p: constant under replication and the m = 1 entry is the plain distance") {
    const auto law = catalog_linear_k(4.0);
    auto rng = case_rng(37, 0);
    const auto a = sample_density(3, rng), b = sample_density(3, rng);
    const auto ladder = refine_distance_ladder(law, a, b, {1, 2, 4});
    REQUIRE(ladder.size() == 3);
    CHECK(ladder[0].distance == doctest::Approx(geodesic_distance(law, a, b).distance).epsilon(1e-12));
    for (const auto& e : ladder) CHECK(e.distance == doctest::Approx(bhattacharya(a, b)).epsilon(1e-4));
    CHECK(ladder[2].cells == 12);
  }
  SUBCASE("appendix law: the competitor start pushes the ladder below the P_2 distance") {
    GeodesicOptions o;
    o.interior_knots = 8;
    const auto ladder = appendix_ladder(16, {1, 32}, o);
    REQUIRE(ladder.size() == 2);
    CHECK(ladder[1].cells == 64);
    CHECK(ladder[1].distance < ladder[0].distance - 0.01);
  }
}

TEST_CASE("discrete action is the squared length of a straight segment in b") {
  const auto law = catalog_linear_k(4.0);
  // For k = 4p, b = sqrt(p); two knots give (sqrt(b)-sqrt(a))^2 averaged over cells.
  const StepDensity a({0.5, 1.5}), b({1.5, 0.5});
  const double db = std::sqrt(1.5) - std::sqrt(0.5);
  CHECK(discrete_action(law, {a, b}) == doctest::Approx(db * db).epsilon(1e-12));
}
