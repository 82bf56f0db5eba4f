#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "commands.hpp"
#include "viscogs/error.hpp"
#include "viscogs/io.hpp"

namespace viscogs::cli {

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::integrity_failure, "SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream os;
  os << std::put_time(&utc, "%FT%TZ");
  return os.str();
}

// Usage-type failures are the caller's to fix; the rest are findings.
bool is_usage_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_parameter:
    case ErrorKind::dimension_mismatch:
    case ErrorKind::invalid_resolution:
    case ErrorKind::invalid_level:
    case ErrorKind::unsupported_law:
    case ErrorKind::assumption_violation:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Viscoelastic gradient-flow solver and metric verification tool", "viscogs-cli"};
  app.set_version_flag("--version", std::string(VISCOGS_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> rtol;
  std::optional<std::string> output_dir;

  const std::map<std::string, std::pair<std::string, std::function<int(const Context&)>>> commands = {
      {"simulate", {"Integrate the gradient flow and check the energy-dissipation balance", cmd_simulate}},
      {"distance", {"Discrete geodesic distance between two densities", cmd_distance}},
      {"geodesic", {"Geodesic path (and optional refinement ladder) between two densities", cmd_geodesic}},
      {"contraction", {"Compare distances along two flows with the exponential envelope", cmd_contraction}},
      {"evi", {"Evolution variational inequality residuals along a flow", cmd_evi}},
      {"counterexample", {"Length of the appendix competitor curve", cmd_counterexample}},
      {"refine", {"Convergence of flows under grid refinement", cmd_refine}},
      {"constants", {"Certified constants of the configured law", cmd_constants}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--rtol", rtol, "Override flow.rtol")->check(CLI::PositiveNumber);
    sub->add_option("--output-dir", output_dir, "Override output_dir and VISCOGS_OUTPUT_DIR");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  Context ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  try {
    std::ifstream in(config_path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    ctx.cfg = parse_config(text, std::filesystem::path(config_path).parent_path().string());

    std::string overrides;
    if (seed) {
      ctx.cfg.seed = *seed;
      overrides += "\nseed=" + std::to_string(*seed);
    }
    if (rtol) {
      ctx.cfg.flow.rtol = *rtol;
      overrides += "\nrtol=" + io::format_double(*rtol);
    }
    ctx.config_hash = sha256_hex(text + overrides);

    std::filesystem::path out = ctx.cfg.output_dir;
    if (const char* env = std::getenv("VISCOGS_OUTPUT_DIR"); env && *env) out = env;
    if (output_dir) out = *output_dir;
    std::filesystem::create_directories(out);
    ctx.out = out;

    // The only nondeterministic output; kept out of report.json.
    const io::json info = {{"command", ctx.command},
                           {"config", config_path},
                           {"config_hash", ctx.config_hash},
                           {"version", VISCOGS_VERSION},
                           {"started_utc", utc_timestamp()}};
    std::ofstream(out / "run_info.json", std::ios::binary) << info.dump(2) << "\n";

    return commands.at(ctx.command).second(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const LeftDomain& e) {
    std::cerr << "finding: " << e.what() << " (s = " << io::format_double(e.s_exit()) << ")\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << (is_usage_error(e.kind()) ? "error: " : "finding: ") << e.what() << "\n";
    return is_usage_error(e.kind()) ? 1 : 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace viscogs::cli
