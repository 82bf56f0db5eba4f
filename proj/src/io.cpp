#include "viscogs/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "viscogs/error.hpp"

namespace viscogs::io {

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw Error(ErrorKind::invalid_parameter, "truncated binary density");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_density_csv(std::ostream& os, const StepDensity& p) {
  os << "cell_index,value\n";
  for (std::size_t i = 0; i < p.size(); ++i) os << i << ',' << format_double(p[i]) << '\n';
}

StepDensity read_density_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("cell_index,value", 0) != 0)
    throw Error(ErrorKind::invalid_parameter, "density CSV must start with 'cell_index,value'");
  std::vector<double> cells;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::invalid_parameter, "density CSV line " + std::to_string(lineno) + ": missing comma");
    const std::size_t idx = std::stoul(line.substr(0, comma));
    if (idx != cells.size()) throw Error(ErrorKind::invalid_parameter, "density CSV line " + std::to_string(lineno) + ": cell index out of order");
    cells.push_back(std::stod(line.substr(comma + 1)));
  }
  return StepDensity::with_boundary(std::move(cells));
}

void write_density_binary(std::ostream& os, const StepDensity& p) {
  os.write("VGSD", 4);
  put_le<std::uint32_t>(os, kBinaryVersion);
  put_le<std::uint64_t>(os, p.size());
  for (double v : p.cells()) put_le<double>(os, v);
}

StepDensity read_density_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "VGSD", 4) != 0)
    throw Error(ErrorKind::invalid_parameter, "not a binary density dump");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kBinaryVersion)
    throw Error(ErrorKind::invalid_parameter, "unsupported binary density version " + std::to_string(version));
  const auto n = get_le<std::uint64_t>(is);
  if (n == 0 || n > (1ull << 32)) throw Error(ErrorKind::invalid_parameter, "implausible cell count in binary density");
  std::vector<double> cells(n);
  for (auto& v : cells) v = get_le<double>(is);
  return StepDensity::with_boundary(std::move(cells));
}

void write_path_csv(std::ostream& os, const GeodesicPath& path) {
  const std::size_t N = path.knots.empty() ? 0 : path.knots.front().size();
  os << 's';
  for (std::size_t i = 0; i < N; ++i) os << ",cell_" << i;
  os << '\n';
  for (std::size_t j = 0; j < path.knots.size(); ++j) {
    os << format_double(path.s[j]);
    for (double v : path.knots[j].cells()) os << ',' << format_double(v);
    os << '\n';
  }
}

json path_header(const GeodesicPath& path) {
  return {{"action", path.action},
          {"length", path.length()},
          {"iterations", path.iterations},
          {"tolerance", path.tolerance},
          {"method", path.method},
          {"knots", path.knots.size()},
          {"cells", path.knots.empty() ? 0 : path.knots.front().size()}};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,energy,dissipation_running,min_cell";
  for (std::size_t i = 0; i < tr.N; ++i) os << ",cell_" << i;
  os << '\n';
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    os << format_double(tr.times[k]) << ',' << format_double(tr.energies[k]) << ','
       << format_double(tr.dissipation[k]) << ',' << format_double(tr.states[k].min_cell());
    for (double v : tr.states[k].cells()) os << ',' << format_double(v);
    os << '\n';
  }
}

json to_json(const FlowConfig& cfg) {
  return {{"rtol", cfg.rtol},
          {"atol", cfg.atol},
          {"t_end", cfg.t_end},
          {"max_step", cfg.max_step},
          {"positivity_floor_policy", cfg.positivity == PositivityPolicy::reject_step ? "reject-step" : "error"},
          {"record_every", cfg.record_every},
          {"steady_stop", cfg.steady_stop}};
}

json trajectory_metadata(const Trajectory& tr, const FlowConfig& cfg) {
  const auto& d = tr.diagnostics;
  double energy_rise = 0.0;
  for (std::size_t k = 1; k < tr.energies.size(); ++k)
    energy_rise = std::max(energy_rise, tr.energies[k] - tr.energies[k - 1]);
  return {{"law", tr.law_id},
          {"N", tr.N},
          {"config", to_json(cfg)},
          {"records", tr.times.size()},
          {"t_final", d.t_final},
          {"steady_state", d.steady_state},
          {"steps", {{"accepted", d.accepted}, {"rejected", d.rejected}, {"positivity_rejections", d.positivity_rejections}, {"recenterings", d.recenterings}, {"rhs_evals", d.rhs_evals}}},
          {"margins",
           {{"max_mass_drift", d.max_mass_drift},
            {"max_tangent_mean", d.max_tangent_mean},
            {"min_cell", d.min_cell},
            {"density_floor", d.density_floor},
            {"floor_guard", d.floor_guard},
            {"max_energy_rise", energy_rise}}}};
}

json to_json(const LawConstants& c) {
  json j = {{"kappa_lo", c.kappa_lo}, {"kappa_hi", c.kappa_hi}, {"lambda_W", c.lambda_W}, {"C_k", c.C_k},
            {"B1", c.B1},         {"B2", c.B2},             {"B3", c.B3},             {"G_sup_norm", c.G_sup_norm},
            {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"points", c.grid.points}}}};
  j["C1"] = c.C1 ? json(*c.C1) : json(nullptr);
  j["C2"] = c.C2 ? json(*c.C2) : json(nullptr);
  j["p_star"] = c.p_star ? json(*c.p_star) : json(nullptr);
  return j;
}

json to_json(const StretchingReport& r) {
  json samples = json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"hessian", s.hessian}, {"onsager", s.onsager}, {"ratio", finite_or_null(s.ratio)}});
  return {{"H_diag", r.H_diag}, {"lambda_hat", r.lambda_hat}, {"L_inf_of_E", r.L_inf_of_E},
          {"min_ratio", finite_or_null(r.min_ratio)}, {"samples", samples}};
}

json to_json(const ContractionReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"t", row.t}, {"measured", row.measured}, {"envelope", finite_or_null(row.envelope)}, {"ratio", finite_or_null(row.ratio)}});
  return {{"mode", to_string(r.mode)},
          {"E", r.E},
          {"rate", r.rate},
          {"rate_kind", "certified bound (empirical rate along computed geodesics only)"},
          {"prefactor", r.prefactor},
          {"initial_distance", r.initial_distance},
          {"locality_threshold", r.locality_threshold},
          {"tolerance", r.tolerance},
          {"max_ratio", finite_or_null(r.max_ratio)},
          {"pass", r.pass},
          {"rows", rows}};
}

json to_json(const EviReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"s", row.s}, {"t", row.t}, {"lhs", row.lhs}, {"rhs", row.rhs}, {"residual", row.residual}});
  return {{"lambda_used", r.lambda_used},
          {"E_q", r.E_q},
          {"worst_residual", r.worst_residual},
          {"worst_normalized", r.worst_normalized},
          {"tolerance", r.tolerance},
          {"pass", r.pass},
          {"pairs", rows}};
}

json to_json(const CounterexampleResult& r, bool with_curve) {
  json j = {{"M", r.M},
            {"epsilon", r.epsilon},
            {"s_M", r.s_M},
            {"J", r.J},
            {"J_squared", r.J_squared},
            {"Bh_value", r.Bh_value},
            {"margin", r.margin},
            {"max_mass_error", r.max_mass_error},
            {"alpha_at_s_M", r.alpha_at_s_M},
            {"min_alpha_interior", finite_or_null(r.min_alpha_interior)},
            {"s_points", r.s_points}};
  if (with_curve) j["curve"] = path_header(r.curve);
  return j;
}

json to_json(const RefinementReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"t", row.t},
                    {"bh_differences", row.bh_differences},
                    {"energy_differences", row.energy_differences},
                    {"bh_monotone", row.bh_monotone}});
  return {{"N_ladder", r.N_ladder}, {"initial_energies", r.initial_energies}, {"all_monotone", r.all_monotone}, {"rows", rows}};
}

json to_json(const GrowthReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"pair", row.pair}, {"t", row.t}, {"measured", row.measured}, {"envelope", finite_or_null(row.envelope)}, {"ratio", finite_or_null(row.ratio)}});
  return {{"E", r.E}, {"rate", r.rate}, {"zeta_norm", r.zeta_norm}, {"max_ratio", finite_or_null(r.max_ratio)}, {"pass", r.pass}, {"rows", rows}};
}

json to_json(const LadderEntry& e) {
  return {{"multiple", e.multiple}, {"cells", e.cells}, {"distance", e.distance}, {"status", e.status}, {"path", path_header(e.path)}};
}

}  // namespace viscogs::io
