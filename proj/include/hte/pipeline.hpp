#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/ddrct.hpp"
#include "hte/report.hpp"
#include "hte/synthetic.hpp"

namespace hte {

// Arm grouping rules mirroring the shipped analysis presets: collapse maps
// target arms to 1 and baseline arms to 0 (other arms dropped); keep filters
// to a subset of arms and remaps them to contiguous ids by ascending value.
struct ArmGrouping {
  enum class Kind { kCollapse, kKeep };
  Kind kind = Kind::kCollapse;
  std::vector<int> targets;
  std::vector<int> baseline;
  std::vector<int> keep_arms;
  bool operator==(const ArmGrouping&) const = default;
};

struct GroupedData {
  Dataset dataset;
  std::vector<uint32_t> kept_rows;  // original row per new row
  std::vector<int> arm_map;         // original arm per new arm id
};

GroupedData arm_grouping(const Dataset& dataset, const ArmGrouping& rule);

// As written in the config: either a named preset or an explicit contrast.
// Presets expand against the loaded arm count, so resolution happens at run
// time and is recorded in the manifest.
struct AnalysisConfig {
  std::string preset;  // "any-vs-control", "conditioning-vs-labelling",
                       // "biometric-vs-labelling"; empty = explicit
  std::string name;
  std::vector<int> targets;
  std::vector<int> baseline;
  std::optional<int> per_arm_baseline;
};

struct AnalysisPlan {
  std::string name;
  // Main contrast: dataset view plus the contrast estimated with the forest
  // and the surrogate tree.
  ArmGrouping main_grouping;
  Contrast main_contrast;  // in grouped arm ids
  // Optional per-arm table rows: each kept arm against the baseline.
  bool per_arm = false;
  ArmGrouping per_arm_grouping;
  int per_arm_baseline = 0;  // in grouped arm ids
};

AnalysisPlan resolve_analysis(const AnalysisConfig& config, int n_arms);

struct RunConfig {
  std::string input_path;
  Schema schema;
  AnalysisConfig analysis;
  ForestParams forest;          // CATE/teacher forest
  ForestParams nuisance_forest;
  DdrctParams ddrct;
  double clip = 0.01;
  int k_folds = 5;
  enum class ClusterMode { kAuto, kOn, kOff };
  ClusterMode cluster_mode = ClusterMode::kAuto;
  HistogramSpec histogram;
  uint64_t seed = 0;
  int workers = 0;
  std::string out_dir = "out";
  bool export_forest_summary = false;
};

RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);

struct RunResult {
  std::vector<std::string> artifacts;  // paths written
  std::vector<std::string> log;        // screening lines etc.
};

// Executes the full analysis and writes ate.csv, nodes.csv, tree.dot,
// tree.json, cate_histogram.csv and run_manifest.json into out_dir. Partial
// outputs are removed if anything fails.
RunResult run_pipeline(const RunConfig& config);

struct SimulateConfig {
  DgpSpec dgp;
  std::string out_data = "data.csv";
  std::string out_truth;  // empty: no sidecar
};

SimulateConfig parse_simulate_config(const std::string& json_text);
RunResult run_simulate(const SimulateConfig& config);

// Re-renders nodes.csv and tree.dot from a stored tree.json.
RunResult run_report(const std::string& tree_json_path, const std::string& out_dir);

}  // namespace hte
