#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "viscogs/error.hpp"
#include "viscogs/io.hpp"
#include "viscogs/sampling.hpp"

namespace viscogs::cli {

namespace {

std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.is_null()) return "?";
  return std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) {
  throw ConfigError("config " + where(n) + ": " + msg);
}

void check_keys(const YAML::Node& n, const std::string& block, const std::set<std::string>& allowed) {
  if (!n.IsMap()) fail(n, "'" + block + "' must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + block);
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& name) {
  if (!n.IsScalar()) fail(n, "'" + name + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, "'" + name + "' has the wrong type");
  }
}

double positive(const YAML::Node& n, const std::string& name) {
  const double v = scalar<double>(n, name);
  if (!(v > 0.0) || !std::isfinite(v)) fail(n, "'" + name + "' must be positive and finite");
  return v;
}

std::size_t count(const YAML::Node& n, const std::string& name) {
  const auto v = scalar<long long>(n, name);
  if (v <= 0) fail(n, "'" + name + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

template <typename T>
std::vector<T> list(const YAML::Node& n, const std::string& name) {
  if (!n.IsSequence()) fail(n, "'" + name + "' must be a list");
  std::vector<T> out;
  for (const auto& e : n) out.push_back(scalar<T>(e, name));
  return out;
}

std::vector<std::size_t> count_list(const YAML::Node& n, const std::string& name) {
  if (!n.IsSequence() || n.size() == 0) fail(n, "'" + name + "' must be a non-empty list");
  std::vector<std::size_t> out;
  for (const auto& e : n) out.push_back(count(e, name));
  return out;
}

std::vector<double> time_grid(const YAML::Node& n, const std::string& name) {
  auto t = list<double>(n, name);
  if (t.empty()) fail(n, "'" + name + "' must not be empty");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] < 0.0 || (i > 0 && t[i] <= t[i - 1])) fail(n, "'" + name + "' must be nonnegative and increasing");
  return t;
}

DistanceMode mode(const YAML::Node& n) {
  const auto s = scalar<std::string>(n, "mode");
  if (s == "bhattacharya") return DistanceMode::bhattacharya;
  if (s == "intrinsic") return DistanceMode::intrinsic;
  fail(n, "mode must be 'bhattacharya' or 'intrinsic'");
}

LawSpec parse_law(const YAML::Node& n) {
  LawSpec s;
  if (n.IsScalar()) {
    s.catalog = n.as<std::string>();
    if (s.catalog != "default" && s.catalog != "double_well" && s.catalog != "appendix")
      fail(n, "unknown catalog law '" + s.catalog + "'");
    return s;
  }
  check_keys(n, "law", {"catalog", "epsilon", "h", "kappa", "W", "k"});
  if (n["W"] || n["k"]) {
    if (!n["W"] || !n["k"]) fail(n, "a custom law needs both 'W' and 'k'");
    if (n["catalog"]) fail(n["catalog"], "'catalog' cannot be combined with a custom law");
    s.catalog = "custom";
    const auto W = n["W"];
    if (!W.IsMap() || W.size() == 0) fail(W, "'W' must map integer exponents to coefficients");
    for (const auto& kv : W) s.W_coeffs.emplace_back(scalar<int>(kv.first, "W exponent"), scalar<double>(kv.second, "W coefficient"));
    const auto k = n["k"];
    check_keys(k, "k", {"breaks", "kappas"});
    if (!k["kappas"]) fail(k, "'k' needs 'kappas'");
    s.k_kappas = list<double>(k["kappas"], "kappas");
    if (k["breaks"]) s.k_breaks = list<double>(k["breaks"], "breaks");
    if (s.k_kappas.size() != s.k_breaks.size() + 1) fail(k, "'kappas' needs one more entry than 'breaks'");
    for (double v : s.k_kappas)
      if (!(v > 0.0)) fail(k["kappas"], "'kappas' must be positive");
    if (n["h"]) s.h = positive(n["h"], "h");
    return s;
  }
  if (n["kappa"]) {
    if (n["catalog"]) fail(n["catalog"], "'catalog' cannot be combined with 'kappa'");
    s.catalog = "linear";
    s.kappa = positive(n["kappa"], "kappa");
    return s;
  }
  if (!n["catalog"]) fail(n, "'law' needs 'catalog', 'kappa' or a custom 'W'/'k'");
  s.catalog = scalar<std::string>(n["catalog"], "catalog");
  if (s.catalog != "default" && s.catalog != "double_well" && s.catalog != "appendix")
    fail(n["catalog"], "unknown catalog law '" + s.catalog + "'");
  if ((n["epsilon"] || n["h"]) && s.catalog != "appendix") fail(n, "'epsilon' and 'h' apply to the appendix law only");
  if (n["epsilon"]) s.epsilon = positive(n["epsilon"], "epsilon");
  if (n["h"]) s.h = positive(n["h"], "h");
  return s;
}

DensitySpec parse_density(const YAML::Node& n, const std::string& name, const std::string& base_dir) {
  DensitySpec d;
  d.where = where(n);
  if (n.IsSequence()) {
    d.kind = DensitySpec::Kind::cells;
    d.cells = list<double>(n, name);
  } else {
    check_keys(n, name, {"cells", "profile", "file", "amplitude", "frequency", "alpha"});
    const int given = (n["cells"] ? 1 : 0) + (n["profile"] ? 1 : 0) + (n["file"] ? 1 : 0);
    if (given != 1) fail(n, "'" + name + "' needs exactly one of 'cells', 'profile', 'file'");
    if (n["cells"]) {
      d.kind = DensitySpec::Kind::cells;
      d.cells = list<double>(n["cells"], "cells");
    } else if (n["file"]) {
      d.kind = DensitySpec::Kind::file;
      std::filesystem::path p = scalar<std::string>(n["file"], "file");
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      d.file = p.string();
    } else {
      const auto prof = scalar<std::string>(n["profile"], "profile");
      if (prof == "uniform") d.kind = DensitySpec::Kind::uniform;
      else if (prof == "sine") d.kind = DensitySpec::Kind::sine;
      else if (prof == "random") d.kind = DensitySpec::Kind::random;
      else fail(n["profile"], "profile must be 'uniform', 'sine' or 'random'");
    }
    if (n["amplitude"]) d.amplitude = scalar<double>(n["amplitude"], "amplitude");
    if (n["frequency"]) d.frequency = scalar<double>(n["frequency"], "frequency");
    if (n["alpha"]) d.alpha = positive(n["alpha"], "alpha");
    if ((n["amplitude"] || n["frequency"]) && d.kind != DensitySpec::Kind::sine)
      fail(n, "'amplitude' and 'frequency' apply to the sine profile only");
    if (n["alpha"] && d.kind != DensitySpec::Kind::random) fail(n, "'alpha' applies to the random profile only");
    if (d.kind == DensitySpec::Kind::sine && !(std::abs(d.amplitude) < 1.0))
      fail(n["amplitude"], "sine amplitude must lie in (-1, 1)");
  }
  if (d.kind == DensitySpec::Kind::cells) {
    if (d.cells.empty()) fail(n, "'" + name + "' has no cells");
    for (std::size_t i = 0; i < d.cells.size(); ++i)
      if (d.cells[i] < 0.0 || !std::isfinite(d.cells[i]))
        throw ConfigError("invariant: positivity: " + name + " cell " + std::to_string(i) + " is negative (config " +
                          d.where + ")");
  }
  return d;
}

void parse_flow(const YAML::Node& n, FlowConfig& f) {
  check_keys(n, "flow", {"rtol", "atol", "t_end", "max_step", "record_every", "positivity", "steady_stop", "steady_tol"});
  if (n["rtol"]) f.rtol = positive(n["rtol"], "rtol");
  if (n["atol"]) f.atol = positive(n["atol"], "atol");
  if (n["t_end"]) f.t_end = positive(n["t_end"], "t_end");
  if (n["max_step"]) f.max_step = positive(n["max_step"], "max_step");
  if (n["record_every"]) f.record_every = positive(n["record_every"], "record_every");
  if (n["steady_tol"]) f.steady_tol = positive(n["steady_tol"], "steady_tol");
  if (n["steady_stop"]) f.steady_stop = scalar<bool>(n["steady_stop"], "steady_stop");
  if (n["positivity"]) {
    const auto s = scalar<std::string>(n["positivity"], "positivity");
    if (s == "reject-step") f.positivity = PositivityPolicy::reject_step;
    else if (s == "error") f.positivity = PositivityPolicy::error;
    else fail(n["positivity"], "positivity must be 'reject-step' or 'error'");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config " + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError("config is empty");
  check_keys(root, "top level",
             {"law", "loading", "N", "initial", "target", "seed", "output_dir", "flow", "geodesic", "contraction",
              "evi", "counterexample", "refine"});

  RunConfig c;
  if (root["law"]) c.law = parse_law(root["law"]);
  if (root["N"]) c.N = count(root["N"], "N");
  if (root["seed"]) c.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["output_dir"]) c.output_dir = scalar<std::string>(root["output_dir"], "output_dir");
  if (root["initial"]) c.initial = parse_density(root["initial"], "initial", base_dir);
  if (root["target"]) c.target = parse_density(root["target"], "target", base_dir);
  if (c.initial.kind == DensitySpec::Kind::cells && c.initial.cells.size() != c.N)
    fail(root["initial"], "initial has " + std::to_string(c.initial.cells.size()) + " cells but N = " + std::to_string(c.N));
  if (c.target.kind == DensitySpec::Kind::cells && c.target.cells.size() != c.N)
    fail(root["target"], "target has " + std::to_string(c.target.cells.size()) + " cells but N = " + std::to_string(c.N));

  if (const auto n = root["loading"]) {
    check_keys(n, "loading", {"amplitude", "frequency", "cells"});
    if (n["cells"] && (n["amplitude"] || n["frequency"])) fail(n, "'cells' cannot be combined with a sine loading");
    if (n["amplitude"]) c.loading.amplitude = scalar<double>(n["amplitude"], "amplitude");
    if (n["frequency"]) c.loading.frequency = scalar<double>(n["frequency"], "frequency");
    if (n["cells"]) {
      c.loading.cells = list<double>(n["cells"], "cells");
      if (c.loading.cells.size() != c.N) fail(n["cells"], "loading needs N cells");
    }
  }

  if (root["flow"]) parse_flow(root["flow"], c.flow);

  if (const auto n = root["geodesic"]) {
    check_keys(n, "geodesic", {"knots", "max_iterations", "rel_tol", "richardson", "shooting_crosscheck", "multiples"});
    if (n["knots"]) c.geodesic.interior_knots = count(n["knots"], "knots");
    if (n["max_iterations"]) c.geodesic.max_iterations = count(n["max_iterations"], "max_iterations");
    if (n["rel_tol"]) c.geodesic.rel_tol = positive(n["rel_tol"], "rel_tol");
    if (n["richardson"]) c.geodesic.richardson = scalar<bool>(n["richardson"], "richardson");
    if (n["shooting_crosscheck"]) c.geodesic.shooting_crosscheck = scalar<bool>(n["shooting_crosscheck"], "shooting_crosscheck");
    if (n["multiples"]) c.ladder = count_list(n["multiples"], "multiples");
  }

  if (const auto n = root["contraction"]) {
    check_keys(n, "contraction", {"mode", "E", "t_grid", "tolerance", "rate"});
    if (n["mode"]) c.contraction.mode = mode(n["mode"]);
    if (n["E"]) c.contraction.E = scalar<double>(n["E"], "E");
    if (n["t_grid"]) c.contraction.t_grid = time_grid(n["t_grid"], "t_grid");
    if (n["tolerance"]) c.contraction.tolerance = positive(n["tolerance"], "tolerance");
    if (n["rate"]) c.contraction.rate = scalar<double>(n["rate"], "rate");
  }

  if (const auto n = root["evi"]) {
    check_keys(n, "evi", {"mode", "E", "lambda", "pairs", "tolerance"});
    if (n["mode"]) c.evi.mode = mode(n["mode"]);
    if (n["E"]) c.evi.E = scalar<double>(n["E"], "E");
    if (n["lambda"]) c.evi.lambda = scalar<double>(n["lambda"], "lambda");
    if (n["tolerance"]) c.evi.tolerance = positive(n["tolerance"], "tolerance");
    if (n["pairs"]) {
      if (!n["pairs"].IsSequence() || n["pairs"].size() == 0) fail(n["pairs"], "'pairs' must be a non-empty list");
      c.evi.pairs.clear();
      for (const auto& e : n["pairs"]) {
        const auto st = list<double>(e, "pairs");
        if (st.size() != 2 || st[0] < 0.0 || st[1] < st[0]) fail(e, "each pair must be [s, t] with 0 <= s <= t");
        c.evi.pairs.emplace_back(st[0], st[1]);
      }
    }
  }

  if (const auto n = root["counterexample"]) {
    check_keys(n, "counterexample", {"M", "scan", "required_margin", "s_points", "h", "curve_knots"});
    if (n["M"]) c.counterexample.M = count(n["M"], "M");
    if (n["scan"]) c.counterexample.scan = count_list(n["scan"], "scan");
    if (n["required_margin"]) c.counterexample.required_margin = scalar<double>(n["required_margin"], "required_margin");
    if (n["s_points"]) c.counterexample.options.s_points = count(n["s_points"], "s_points");
    if (n["h"]) c.counterexample.options.h = positive(n["h"], "h");
    if (n["curve_knots"]) c.counterexample.options.curve_knots = count(n["curve_knots"], "curve_knots");
  }

  if (const auto n = root["refine"]) {
    check_keys(n, "refine", {"N_ladder", "t_grid", "fine_cells"});
    if (n["N_ladder"]) c.refine.N_ladder = count_list(n["N_ladder"], "N_ladder");
    if (n["t_grid"]) c.refine.t_grid = time_grid(n["t_grid"], "t_grid");
    if (n["fine_cells"]) c.refine.fine_cells = count(n["fine_cells"], "fine_cells");
  }
  return c;
}

MaterialLaw build_law(const RunConfig& cfg) {
  const auto& s = cfg.law;
  MaterialLaw law;
  if (s.catalog == "appendix") law = catalog_appendix_k(s.epsilon, s.h);
  else if (s.catalog == "linear") law = catalog_linear_k(s.kappa);
  else if (s.catalog == "custom") {
    LaurentPolynomial W;
    for (const auto& [e, c] : s.W_coeffs) W.coeffs[e] += c;
    std::vector<double> breaks;
    for (double b : s.k_breaks) {
      breaks.push_back(b);
      breaks.push_back(b + s.h);
    }
    const std::optional<double> kappa = s.k_kappas.size() == 1 ? std::optional<double>(s.k_kappas[0]) : std::nullopt;
    law = make_law("custom", W.as_law(), piecewise_ratio_k(s.k_breaks, s.k_kappas, s.h), nullptr, breaks, kappa,
                   s.k_breaks.empty() ? 0.0 : s.h);
  } else law = catalog(s.catalog);

  if (cfg.loading.cells.empty() && cfg.loading.amplitude != 0.0) {
    const double a = cfg.loading.amplitude, f = cfg.loading.frequency;
    std::ostringstream tag;
    tag << "sine(" << a << "," << f << ")";
    law = with_loading(law, [a, f](double x) { return a * std::sin(2.0 * std::numbers::pi * f * x); }, tag.str());
  }
  return law;
}

std::vector<double> build_loading(const RunConfig& cfg, std::size_t N) {
  if (cfg.loading.cells.empty()) return {};
  if (cfg.loading.cells.size() != N)
    throw ConfigError("explicit loading has " + std::to_string(cfg.loading.cells.size()) + " cells, " +
                      std::to_string(N) + " needed");
  return cfg.loading.cells;
}

StepDensity build_density(const DensitySpec& spec, std::size_t N, std::uint64_t seed, bool allow_boundary) {
  std::vector<double> cells;
  switch (spec.kind) {
    case DensitySpec::Kind::none:
      throw ConfigError("density not configured");
    case DensitySpec::Kind::cells:
      if (spec.cells.size() != N)
        throw ConfigError("config " + spec.where + ": density has " + std::to_string(spec.cells.size()) +
                          " cells, " + std::to_string(N) + " needed");
      cells = spec.cells;
      break;
    case DensitySpec::Kind::uniform:
      return StepDensity::uniform(N);
    case DensitySpec::Kind::sine:
      cells.resize(N);
      for (std::size_t i = 0; i < N; ++i)
        cells[i] = 1.0 + spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.frequency * (i + 0.5) / N);
      return StepDensity::normalized(std::move(cells));
    case DensitySpec::Kind::random: {
      Rng rng(seed);
      return sample_density(N, rng, spec.alpha);
    }
    case DensitySpec::Kind::file: {
      std::ifstream in(spec.file, std::ios::binary);
      if (!in) throw ConfigError("config " + spec.where + ": cannot open density file '" + spec.file + "'");
      char magic[4] = {};
      in.read(magic, 4);
      in.clear();
      in.seekg(0);
      const StepDensity p = std::string(magic, 4) == "VGSD" ? io::read_density_binary(in) : io::read_density_csv(in);
      if (p.size() != N)
        throw ConfigError("config " + spec.where + ": density file has " + std::to_string(p.size()) + " cells, " +
                          std::to_string(N) + " needed");
      cells = p.cells();
      break;
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i] < 0.0) throw ConfigError("invariant: positivity: cell " + std::to_string(i) + " is negative");
  double mean = 0.0;
  for (double v : cells) mean += v;
  mean /= static_cast<double>(cells.size());
  if (std::abs(mean - 1.0) > kMassTolerance)
    throw ConfigError("config " + spec.where + ": density cells must have mean 1 (got " + io::format_double(mean) + ")");
  const bool boundary = std::any_of(cells.begin(), cells.end(), [](double v) { return v == 0.0; });
  if (boundary && !allow_boundary)
    throw ConfigError("config " + spec.where + ": zero cells are only allowed for distance endpoints");
  return boundary ? StepDensity::with_boundary(std::move(cells)) : StepDensity(std::move(cells));
}

}  // namespace viscogs::cli
