#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "viscogs/analysis.hpp"
#include "viscogs/error.hpp"
#include "viscogs/experiments.hpp"
#include "viscogs/io.hpp"

namespace viscogs::cli {

namespace {

using io::json;
namespace fs = std::filesystem;

constexpr double kEdbTolerance = 1e-6;

json base_report(const Context& ctx, const MaterialLaw* law) {
  json r = {{"command", ctx.command},
            {"version", VISCOGS_VERSION},
            {"config_hash", ctx.config_hash},
            {"seed", ctx.cfg.seed}};
  if (law) {
    r["law"] = law->id;
    r["constants"] = io::to_json(law->constants);
  }
  return r;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error(ErrorKind::invalid_parameter, "cannot write '" + file.string() + "'");
  os << text;
}

void write_report(const Context& ctx, const json& report) {
  write_text(ctx.out / "report.json", report.dump(2) + "\n");
}

template <typename Writer>
void write_csv(const fs::path& file, Writer&& w) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error(ErrorKind::invalid_parameter, "cannot write '" + file.string() + "'");
  w(os);
}

double level_or(const std::optional<double>& E, double fallback) { return E ? *E : fallback; }

}  // namespace

int cmd_simulate(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const MaterialLaw law = build_law(cfg);
  const StepDensity p0 = build_density(cfg.initial, cfg.N, cfg.seed, false);
  auto loading = build_loading(cfg, cfg.N);
  const Trajectory tr =
      loading.empty() ? solve(law, p0, cfg.flow) : solve(law, p0, cfg.flow, std::move(loading));

  const double residual = edb_residual(tr);
  const auto& d = tr.diagnostics;
  json violations = json::array();
  if (!(residual <= kEdbTolerance)) violations.push_back("energy-dissipation balance");
  if (d.max_mass_drift > kDriftLimit) violations.push_back("mass drift");
  if (d.min_cell < d.density_floor) violations.push_back("sublevel density floor");
  for (std::size_t k = 1; k < tr.energies.size(); ++k)
    if (tr.energies[k] > tr.energies[k - 1] + 1e-12 * (1.0 + std::abs(tr.energies[k - 1]))) {
      violations.push_back("energy monotonicity");
      break;
    }

  json r = base_report(ctx, &law);
  r["N"] = cfg.N;
  r["trajectory"] = io::trajectory_metadata(tr, cfg.flow);
  r["energy_initial"] = tr.energies.front();
  r["energy_final"] = tr.energies.back();
  r["dissipation_total"] = tr.dissipation.back();
  r["edb_residual"] = residual;
  r["edb_tolerance"] = kEdbTolerance;
  r["violations"] = violations;
  r["pass"] = violations.empty();
  write_csv(ctx.out / "trajectory.csv", [&](std::ostream& os) { io::write_trajectory_csv(os, tr); });
  write_report(ctx, r);

  std::cout << "edb_residual " << io::format_double(residual) << "\n"
            << "dissipation " << io::format_double(tr.dissipation.back()) << "\n";
  for (const auto& v : violations) std::cout << "violation " << v.get<std::string>() << "\n";
  return violations.empty() ? 0 : 2;
}

namespace {

json distance_json(const MaterialLaw& law, const StepDensity& p0, const StepDensity& p1, const DistanceResult& res) {
  json j = {{"distance", res.distance},
            {"status", res.status},
            {"converged", res.converged},
            {"path", io::path_header(res.path)},
            {"hellinger", hellinger(p0, p1)},
            {"bhattacharya", bhattacharya(p0, p1)},
            {"lower_bound", lower_edge_distance_bound(law) * bhattacharya(p0, p1)},
            {"upper_bound", upper_edge_distance_bound(law) * bhattacharya(p0, p1)}};
  j["raw_distance"] = res.raw_distance ? json(*res.raw_distance) : json(nullptr);
  j["shooting_distance"] = res.shooting_distance ? json(*res.shooting_distance) : json(nullptr);
  j["shooting_mismatch"] = res.shooting_mismatch ? json(*res.shooting_mismatch) : json(nullptr);
  return j;
}

struct Endpoints {
  StepDensity p0, p1;
};

Endpoints endpoints(const RunConfig& cfg) {
  return {build_density(cfg.initial, cfg.N, cfg.seed, true), build_density(cfg.target, cfg.N, cfg.seed + 1, true)};
}

}  // namespace

int cmd_distance(const Context& ctx) {
  const MaterialLaw law = build_law(ctx.cfg);
  const auto [p0, p1] = endpoints(ctx.cfg);
  const DistanceResult res = geodesic_distance(law, p0, p1, ctx.cfg.geodesic);
  json r = base_report(ctx, &law);
  r["N"] = ctx.cfg.N;
  r["result"] = distance_json(law, p0, p1, res);
  write_report(ctx, r);
  std::cout << "distance " << io::format_double(res.distance) << "\n";
  return 0;
}

int cmd_geodesic(const Context& ctx) {
  const MaterialLaw law = build_law(ctx.cfg);
  const auto [p0, p1] = endpoints(ctx.cfg);
  const DistanceResult res = geodesic_distance(law, p0, p1, ctx.cfg.geodesic);
  json r = base_report(ctx, &law);
  r["N"] = ctx.cfg.N;
  r["result"] = distance_json(law, p0, p1, res);
  write_csv(ctx.out / "path.csv", [&](std::ostream& os) { io::write_path_csv(os, res.path); });

  int status = 0;
  if (!ctx.cfg.ladder.empty()) {
    const auto ladder = refine_distance_ladder(law, p0, p1, ctx.cfg.ladder, ctx.cfg.geodesic);
    json rows = json::array();
    bool monotone = true;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      rows.push_back(io::to_json(ladder[i]));
      if (i > 0 && ladder[i].distance > ladder[i - 1].distance * (1.0 + 1e-9)) monotone = false;
    }
    r["ladder"] = rows;
    r["ladder_nonincreasing"] = monotone;
    if (!monotone) status = 2;
  }
  write_report(ctx, r);
  std::cout << "distance " << io::format_double(res.distance) << "\n";
  return status;
}

int cmd_contraction(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const MaterialLaw law = build_law(cfg);
  const StepDensity p0 = build_density(cfg.initial, cfg.N, cfg.seed, false);
  const StepDensity p1 = build_density(cfg.target, cfg.N, cfg.seed + 1, false);
  const double E = level_or(cfg.contraction.E, std::max(energy(law, p0), energy(law, p1)));
  ContractionOptions opts;
  opts.mode = cfg.contraction.mode;
  opts.tolerance = cfg.contraction.tolerance;
  opts.flow = cfg.flow;
  opts.flow.t_end = std::max(opts.flow.t_end, cfg.contraction.t_grid.back());
  opts.geodesic = cfg.geodesic;
  opts.rate_override = cfg.contraction.rate;
  const ContractionReport rep = contraction_check(law, p0, p1, E, cfg.contraction.t_grid, opts);
  json r = base_report(ctx, &law);
  r["N"] = cfg.N;
  r["result"] = io::to_json(rep);
  write_report(ctx, r);
  std::cout << "max_ratio " << io::format_double(rep.max_ratio) << "\n";
  return rep.pass ? 0 : 2;
}

int cmd_evi(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const MaterialLaw law = build_law(cfg);
  const StepDensity p0 = build_density(cfg.initial, cfg.N, cfg.seed, false);
  const StepDensity q = build_density(cfg.target, cfg.N, cfg.seed + 1, false);
  FlowConfig flow = cfg.flow;
  double t_max = 0.0;
  for (const auto& [s, t] : cfg.evi.pairs) t_max = std::max(t_max, t);
  flow.t_end = std::max(flow.t_end, t_max);
  flow.record_times.clear();
  for (const auto& [s, t] : cfg.evi.pairs) {
    flow.record_times.push_back(s);
    flow.record_times.push_back(t);
  }
  std::sort(flow.record_times.begin(), flow.record_times.end());
  flow.record_times.erase(std::unique(flow.record_times.begin(), flow.record_times.end()), flow.record_times.end());
  const Trajectory tr = solve(law, p0, flow);

  const double E = level_or(cfg.evi.E, std::max(energy(law, p0), energy(law, q)));
  const double lambda = cfg.evi.lambda ? *cfg.evi.lambda : L_glob(law, E);
  EviOptions opts;
  opts.mode = cfg.evi.mode;
  opts.tolerance = cfg.evi.tolerance;
  opts.geodesic = cfg.geodesic;
  const EviReport rep = evi_residual(law, tr, q, E, lambda, cfg.evi.pairs, opts);
  json r = base_report(ctx, &law);
  r["N"] = cfg.N;
  r["lambda_source"] = cfg.evi.lambda ? "config" : "L_glob(E)";
  r["result"] = io::to_json(rep);
  write_report(ctx, r);
  std::cout << "worst_normalized " << io::format_double(rep.worst_normalized) << "\n";
  return rep.pass ? 0 : 2;
}

int cmd_counterexample(const Context& ctx) {
  const auto& ce = ctx.cfg.counterexample;
  json r = base_report(ctx, nullptr);
  int status = 0;
  if (!ce.scan.empty()) {
    const CounterexampleScan scan = scan_counterexample(ce.scan, ce.required_margin, ce.options);
    json rows = json::array();
    for (const auto& e : scan.entries) rows.push_back(io::to_json(e));
    r["scan"] = {{"entries", rows},
                 {"required_margin", scan.required_margin},
                 {"first_M", scan.first_M ? json(*scan.first_M) : json(nullptr)}};
    if (scan.first_M) std::cout << "first_M " << *scan.first_M << "\n";
    else {
      std::cout << "first_M none\n";
      status = 2;
    }
  }
  const CounterexampleResult res = appendix_counterexample(ce.M, ce.options);
  r["result"] = io::to_json(res, true);
  r["pass"] = res.margin > 0.0 && status == 0;
  write_csv(ctx.out / "curve.csv", [&](std::ostream& os) { io::write_path_csv(os, res.curve); });
  write_report(ctx, r);
  std::cout << "J " << io::format_double(res.J) << "\n"
            << "margin " << io::format_double(res.margin) << "\n";
  return res.margin > 0.0 ? status : 2;
}

int cmd_refine(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& rs = cfg.refine;
  const MaterialLaw law = build_law(cfg);
  const std::size_t fine = rs.fine_cells ? rs.fine_cells : *std::max_element(rs.N_ladder.begin(), rs.N_ladder.end());
  for (std::size_t n : rs.N_ladder)
    if (fine % n != 0)
      throw ConfigError("refine: fine_cells " + std::to_string(fine) + " is not a multiple of ladder entry " +
                        std::to_string(n));
  const StepDensity p0 = build_density(cfg.initial, fine, cfg.seed, false);
  FlowConfig flow = cfg.flow;
  flow.t_end = std::max(flow.t_end, rs.t_grid.back());
  const RefinementReport rep = refinement_convergence(law, p0.cells(), rs.N_ladder, rs.t_grid, flow);
  json r = base_report(ctx, &law);
  r["fine_cells"] = fine;
  r["result"] = io::to_json(rep);
  write_report(ctx, r);
  std::cout << "all_monotone " << (rep.all_monotone ? "true" : "false") << "\n";
  return rep.all_monotone ? 0 : 2;
}

int cmd_constants(const Context& ctx) {
  const MaterialLaw law = build_law(ctx.cfg);
  json r = base_report(ctx, &law);
  r["lower_edge_distance_bound"] = lower_edge_distance_bound(law);
  r["upper_edge_distance_bound"] = upper_edge_distance_bound(law);
  write_report(ctx, r);
  std::cout << r["constants"].dump(2) << "\n";
  return law.constants.certified ? 0 : 2;
}

}  // namespace viscogs::cli
