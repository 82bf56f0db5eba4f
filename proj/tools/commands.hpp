#pragma once

#include <filesystem>
#include <string>

#include "config.hpp"

namespace viscogs::cli {

struct Context {
  RunConfig cfg;
  std::string command;
  std::string config_hash;  // SHA-256 of the config bytes plus overrides
  std::filesystem::path out;
};

// Each returns the process exit status: 0 pass, 2 finding.
int cmd_simulate(const Context& ctx);
int cmd_distance(const Context& ctx);
int cmd_geodesic(const Context& ctx);
int cmd_contraction(const Context& ctx);
int cmd_evi(const Context& ctx);
int cmd_counterexample(const Context& ctx);
int cmd_refine(const Context& ctx);
int cmd_constants(const Context& ctx);

}  // namespace viscogs::cli
