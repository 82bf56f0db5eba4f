#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "config.hpp"

namespace fs = std::filesystem;
using namespace viscogs;
using namespace viscogs::cli;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("viscogs-cli-test-" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

struct Run {
  int status = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "viscogs-cli");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Run r;
  r.status = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("config schema") {
  SUBCASE("unknown keys are rejected with their position") {
    try {
      parse_config("law: default\nN: 4\nflow:\n  rtol: 1.0e-8\n  bogus: 1\n", ".");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()) == "config 5:3: unknown key 'bogus' in flow");
    }
    CHECK_THROWS_AS(parse_config("lawz: default\n", "."), ConfigError);
  }
  SUBCASE("type and range errors") {
    CHECK_THROWS_AS(parse_config("N: -2\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("N: four\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("flow: {rtol: 0}\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("law: nonsense\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("N: 2\ninitial: {cells: [1, 1, 1]}\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("contraction: {t_grid: [1, 0.5]}\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("law: {catalog: default, epsilon: 0.1}\n", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("key: [unclosed\n", "."), ConfigError);
  }
  SUBCASE("negative cells are a positivity error") {
    try {
      parse_config("N: 2\ninitial: [2.5, -0.5]\n", ".");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).rfind("invariant: positivity", 0) == 0);
    }
  }
  SUBCASE("laws and densities") {
    auto c = parse_config("law: {catalog: appendix, epsilon: 0.25}\nN: 3\ninitial: {profile: sine, amplitude: 0.2}\n", ".");
    const auto law = build_law(c);
    CHECK(law.constants.kappa_lo == doctest::Approx(4.0));
    const auto p = build_density(c.initial, 3, c.seed, false);
    CHECK(p.size() == 3);

    c = parse_config("law: {W: {-1: 1, 1: 1, 0: -2}, k: {kappas: [4]}}\n", ".");
    const auto custom = build_law(c);
    CHECK(custom.W(1.0) == doctest::Approx(0.0));
    CHECK(custom.k(2.0) == doctest::Approx(8.0));

    c = parse_config("N: 4\ninitial: {profile: random, alpha: 3}\n", ".");
    const auto r1 = build_density(c.initial, 4, 7, false), r2 = build_density(c.initial, 4, 7, false);
    CHECK(r1.cells() == r2.cells());

    c = parse_config("N: 2\ninitial: [0, 2]\n", ".");
    CHECK(build_density(c.initial, 2, 1, true).is_boundary());
    CHECK_THROWS_AS(build_density(c.initial, 2, 1, false), ConfigError);
    c = parse_config("N: 2\ninitial: [1, 2]\n", ".");
    CHECK_THROWS_AS(build_density(c.initial, 2, 1, true), ConfigError);
  }
}

TEST_CASE("simulate") {
  SUBCASE("equilibrium passes with zero dissipation") {
    const auto cfg = write_config("eq.yaml", "law: default\nN: 4\ninitial: {profile: uniform}\nflow: {t_end: 1}\n");
    const auto out = scratch() / "eq";
    const auto r = run({"simulate", cfg.string(), "--output-dir", out.string()});
    CHECK(r.status == 0);
    CHECK(value_after(r.out, "dissipation") == 0.0);
    const auto report = slurp(out / "report.json");
    CHECK(report.find("\"dissipation_total\": 0.0") != std::string::npos);
    CHECK(report.find("\"pass\": true") != std::string::npos);
    CHECK(report.find("\"version\": \"" VISCOGS_VERSION "\"") != std::string::npos);
    CHECK(report.find("\"config_hash\"") != std::string::npos);
    CHECK(fs::exists(out / "trajectory.csv"));
    CHECK(fs::exists(out / "run_info.json"));
  }
  SUBCASE("negative cell is a usage error") {
    const auto cfg = write_config("neg.yaml", "law: default\nN: 4\ninitial: {cells: [1.5, -0.5, 1.5, 1.5]}\n");
    const auto r = run({"simulate", cfg.string(), "--output-dir", (scratch() / "neg").string()});
    CHECK(r.status == 1);
    CHECK(r.err.find("invariant: positivity") != std::string::npos);
  }
  SUBCASE("default suite config meets the balance tolerance; reruns are byte-identical") {
    const auto cfg = write_config("sim.yaml",
                                  "law: default\nN: 8\ninitial: {profile: random}\nseed: 4\n"
                                  "flow: {rtol: 1.0e-8, atol: 1.0e-10, t_end: 5, record_every: 0.25}\n");
    const auto a = run({"simulate", cfg.string(), "--output-dir", (scratch() / "sim-a").string()});
    const auto b = run({"simulate", cfg.string(), "--output-dir", (scratch() / "sim-b").string()});
    CHECK(a.status == 0);
    CHECK(value_after(a.out, "edb_residual") <= 1e-6);
    CHECK(slurp(scratch() / "sim-a" / "report.json") == slurp(scratch() / "sim-b" / "report.json"));
    CHECK(slurp(scratch() / "sim-a" / "trajectory.csv") == slurp(scratch() / "sim-b" / "trajectory.csv"));

    // Overrides change the hash and the outcome.
    const auto c = run({"simulate", cfg.string(), "--seed", "5", "--rtol", "1e-10", "--output-dir",
                        (scratch() / "sim-c").string()});
    CHECK(c.status == 0);
    CHECK(slurp(scratch() / "sim-a" / "report.json") != slurp(scratch() / "sim-c" / "report.json"));
  }
  SUBCASE("output directory from the environment") {
    const auto cfg = write_config("env.yaml", "N: 2\ninitial: {profile: uniform}\n");
    const auto dir = scratch() / "from-env";
    ::setenv("VISCOGS_OUTPUT_DIR", dir.c_str(), 1);
    const auto r = run({"simulate", cfg.string()});
    ::unsetenv("VISCOGS_OUTPUT_DIR");
    CHECK(r.status == 0);
    CHECK(fs::exists(dir / "report.json"));
  }
}

TEST_CASE("distance prints pi/2 for k = 4p between the disjoint-support endpoints") {
  const auto cfg = write_config("dist.yaml",
                                "law: {kappa: 4}\nN: 2\ninitial: {cells: [0, 2]}\ntarget: {cells: [2, 0]}\n"
                                "geodesic: {richardson: true}\n");
  const auto r = run({"distance", cfg.string(), "--output-dir", (scratch() / "dist").string()});
  CHECK(r.status == 0);
  CHECK(std::abs(value_after(r.out, "distance") - std::numbers::pi / 2) <= 1e-6);
}

TEST_CASE("geodesic writes the path") {
  const auto cfg = write_config("geo.yaml",
                                "law: default\nN: 3\ninitial: [0.5, 1, 1.5]\ntarget: [1.5, 1, 0.5]\n"
                                "geodesic: {knots: 8, multiples: [1, 2]}\n");
  const auto out = scratch() / "geo";
  const auto r = run({"geodesic", cfg.string(), "--output-dir", out.string()});
  CHECK(r.status == 0);
  CHECK(slurp(out / "path.csv").rfind("s,cell_0,cell_1,cell_2\n", 0) == 0);
  CHECK(slurp(out / "report.json").find("\"ladder_nonincreasing\": true") != std::string::npos);
}

TEST_CASE("counterexample M=256 has positive margin") {
  const auto cfg = write_config("ce.yaml", "counterexample: {M: 256}\n");
  const auto out = scratch() / "ce";
  const auto r = run({"counterexample", cfg.string(), "--output-dir", out.string()});
  CHECK(r.status == 0);
  CHECK(value_after(r.out, "margin") > 0.0);
  CHECK(fs::exists(out / "curve.csv"));
}

TEST_CASE("contraction, evi and refine exit codes") {
  const auto c = write_config("con.yaml",
                              "law: double_well\nN: 4\ninitial: {profile: random, alpha: 4}\n"
                              "target: {profile: random, alpha: 4}\nflow: {rtol: 1.0e-10, atol: 1.0e-12}\n"
                              "contraction: {t_grid: [0, 0.5, 1]}\nevi: {pairs: [[0, 0.5], [0.5, 1]]}\n");
  CHECK(run({"contraction", c.string(), "--output-dir", (scratch() / "con").string()}).status == 0);
  CHECK(run({"evi", c.string(), "--output-dir", (scratch() / "evi").string()}).status == 0);
  // A level below both energies is a configuration error.
  const auto low = write_config("low.yaml",
                                "law: double_well\nN: 4\ninitial: {profile: random}\ntarget: {profile: random}\n"
                                "contraction: {E: -5}\n");
  CHECK(run({"contraction", low.string(), "--output-dir", (scratch() / "low").string()}).status == 1);

  const auto rf = write_config("ref.yaml",
                               "law: default\ninitial: {profile: sine, amplitude: 0.5}\n"
                               "flow: {rtol: 1.0e-10, atol: 1.0e-12}\nrefine: {N_ladder: [8, 16, 32], t_grid: [0, 0.5]}\n");
  const auto r = run({"refine", rf.string(), "--output-dir", (scratch() / "ref").string()});
  CHECK(r.status == 0);
  CHECK(r.out.find("all_monotone true") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(run({}).status == 1);
  CHECK(run({"simulate"}).status == 1);
  CHECK(run({"simulate", (scratch() / "missing.yaml").string()}).status == 1);
  CHECK(run({"frobnicate", "x"}).status == 1);
  CHECK(run({"--version"}).status == 0);
}
