// Command-line front end: `hte run <config>` executes a configured analysis
// and writes its artifact files, `hte simulate <dgp-config>` emits synthetic
// data with a truth sidecar, `hte report <tree.json>` re-renders the node
// table and DOT graph from a stored tree.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hte/common.hpp"
#include "hte/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw hte::ConfigError("cannot open config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void fail(int code, const char* kind, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') {
      c = ' ';
    }
  }
  std::cerr << "ERROR code=" << code << " kind=" << kind << " msg=\"" << line << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous treatment effect estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int64_t seed_override = -1;
  int workers = 0;

  CLI::App* run = app.add_subcommand("run", "Run a configured analysis");
  run->add_option("config", config_path, "JSON run configuration")->required();
  run->add_option("--seed", seed_override, "Override the config seed");
  run->add_option("--workers", workers, "Worker thread count (0 = all cores)");
  run->add_option("--out", out_override, "Override the output directory");

  std::string sim_config_path;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate synthetic data with known truth");
  simulate->add_option("config", sim_config_path, "JSON DGP configuration")->required();
  simulate->add_option("--seed", seed_override, "Override the config seed");

  std::string tree_path;
  std::string report_out = "out";
  CLI::App* report = app.add_subcommand("report", "Re-render tables from a stored tree.json");
  report->add_option("tree", tree_path, "tree.json produced by run")->required();
  report->add_option("--out", report_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      hte::RunConfig config = hte::parse_run_config(slurp(config_path));
      if (seed_override >= 0) {
        config.seed = static_cast<uint64_t>(seed_override);
      }
      if (workers > 0) {
        config.workers = workers;
      }
      if (!out_override.empty()) {
        config.out_dir = out_override;
      }
      hte::RunResult result = hte::run_pipeline(config);
      for (const auto& line : result.log) {
        std::cerr << line << "\n";
      }
      for (const auto& path : result.artifacts) {
        std::cout << path << "\n";
      }
    } else if (*simulate) {
      hte::SimulateConfig config = hte::parse_simulate_config(slurp(sim_config_path));
      if (seed_override >= 0) {
        config.dgp.seed = static_cast<uint64_t>(seed_override);
      }
      hte::RunResult result = hte::run_simulate(config);
      for (const auto& path : result.artifacts) {
        std::cout << path << "\n";
      }
    } else if (*report) {
      hte::RunResult result = hte::run_report(tree_path, report_out);
      for (const auto& path : result.artifacts) {
        std::cout << path << "\n";
      }
    }
  } catch (const hte::ConfigError& e) {
    fail(kExitConfig, "config", e.what());
    return kExitConfig;
  } catch (const hte::DataError& e) {
    fail(kExitData, "data", e.what());
    return kExitData;
  } catch (const hte::NumericError& e) {
    fail(kExitNumeric, "numeric", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    fail(kExitNumeric, "internal", e.what());
    return kExitNumeric;
  }
  return 0;
}
