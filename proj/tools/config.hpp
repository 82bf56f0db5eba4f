#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "viscogs/analysis.hpp"
#include "viscogs/experiments.hpp"
#include "viscogs/flow.hpp"
#include "viscogs/material.hpp"
#include "viscogs/metric.hpp"

namespace viscogs::cli {

// Rejected configuration; the message carries "line:column" when known.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LawSpec {
  std::string catalog = "default";  // "default", "double_well", "appendix", "linear", "custom"
  double epsilon = 0.01;
  double h = 1e-3;
  double kappa = 4.0;
  // custom: W as a Laurent polynomial, k = p r(p) with piecewise-constant r
  std::vector<std::pair<int, double>> W_coeffs;
  std::vector<double> k_breaks;
  std::vector<double> k_kappas;
};

struct LoadingSpec {
  double amplitude = 0.0;
  double frequency = 1.0;
  std::vector<double> cells;  // explicit G^N, overrides the sine profile
};

struct DensitySpec {
  enum class Kind { none, cells, uniform, sine, random, file } kind = Kind::none;
  std::vector<double> cells;
  double amplitude = 0.0;
  double frequency = 1.0;
  double alpha = 2.0;
  std::string file;
  std::string where;  // "line:col" for error messages
};

struct ContractionSpec {
  DistanceMode mode = DistanceMode::bhattacharya;
  std::optional<double> E;
  std::vector<double> t_grid{0.0, 0.25, 0.5, 1.0};
  double tolerance = 1e-3;
  std::optional<double> rate;
};

struct EviSpec {
  DistanceMode mode = DistanceMode::bhattacharya;
  std::optional<double> E;
  std::optional<double> lambda;
  std::vector<std::pair<double, double>> pairs{{0.0, 0.25}, {0.0, 0.5}, {0.25, 1.0}, {0.5, 1.0}};
  double tolerance = 1e-4;
};

struct CounterexampleSpec {
  std::size_t M = 256;
  std::vector<std::size_t> scan;
  double required_margin = 0.01;
  CounterexampleOptions options;
};

struct RefineSpec {
  std::vector<std::size_t> N_ladder{2, 4, 8, 16};
  std::vector<double> t_grid{0.0, 0.5, 1.0};
  std::size_t fine_cells = 0;  // 0 means the largest ladder entry
};

struct RunConfig {
  LawSpec law;
  LoadingSpec loading;
  std::size_t N = 4;
  DensitySpec initial;
  DensitySpec target;
  std::uint64_t seed = 1;
  std::string output_dir = "viscogs-out";
  FlowConfig flow;
  GeodesicOptions geodesic;
  std::vector<std::size_t> ladder;  // geodesic.multiples
  ContractionSpec contraction;
  EviSpec evi;
  CounterexampleSpec counterexample;
  RefineSpec refine;
};

RunConfig parse_config(const std::string& text, const std::string& base_dir);

MaterialLaw build_law(const RunConfig& cfg);
// Loading cells for N cells, empty when the law's own G is to be used.
std::vector<double> build_loading(const RunConfig& cfg, std::size_t N);
// Boundary densities are allowed only when allow_boundary is set.
StepDensity build_density(const DensitySpec& spec, std::size_t N, std::uint64_t seed, bool allow_boundary);

}  // namespace viscogs::cli
