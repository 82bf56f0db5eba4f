#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "viscogs/analysis.hpp"
#include "viscogs/experiments.hpp"
#include "viscogs/flow.hpp"
#include "viscogs/material.hpp"
#include "viscogs/metric.hpp"
#include "viscogs/state.hpp"

namespace viscogs::io {

using nlohmann::json;

// Density CSV: header "cell_index,value", one row per cell.
void write_density_csv(std::ostream& os, const StepDensity& p);
StepDensity read_density_csv(std::istream& is);

// Binary dump, little-endian: magic "VGSD", u32 version (1), u64 N, N doubles.
inline constexpr std::uint32_t kBinaryVersion = 1;
void write_density_binary(std::ostream& os, const StepDensity& p);
StepDensity read_density_binary(std::istream& is);

// Path CSV: header "s,cell_0,...", one row per knot.
void write_path_csv(std::ostream& os, const GeodesicPath& path);
json path_header(const GeodesicPath& path);

// Trajectory CSV: t, energy, dissipation_running, min_cell, cells...
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);
json trajectory_metadata(const Trajectory& tr, const FlowConfig& cfg);

json to_json(const LawConstants& c);
json to_json(const FlowConfig& cfg);
json to_json(const StretchingReport& r);
json to_json(const ContractionReport& r);
json to_json(const EviReport& r);
json to_json(const CounterexampleResult& r, bool with_curve = false);
json to_json(const RefinementReport& r);
json to_json(const GrowthReport& r);
json to_json(const LadderEntry& e);

// Doubles printed with round-trip precision so reports are byte-stable.
std::string format_double(double v);

}  // namespace viscogs::io
