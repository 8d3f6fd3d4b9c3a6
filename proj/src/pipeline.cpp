#include "hte/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hte/common.hpp"
#include "hte/csv.hpp"

namespace hte {

namespace {
using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError("config: " + where + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

GroupedData arm_grouping(const Dataset& dataset, const ArmGrouping& rule) {
  int k = dataset.n_arms();
  auto require_arms = [&](const std::vector<int>& arms, const char* what) {
    if (arms.empty()) {
      throw ConfigError(std::string("arm grouping: empty ") + what + " group");
    }
    for (int a : arms) {
      if (a < 0 || a >= k) {
        throw ConfigError("arm grouping: arm " + std::to_string(a) + " absent from dataset");
      }
    }
  };

  GroupedData out;
  std::vector<int> new_arm_of(k, -1);
  if (rule.kind == ArmGrouping::Kind::kCollapse) {
    require_arms(rule.targets, "target");
    require_arms(rule.baseline, "baseline");
    for (int a : rule.baseline) {
      new_arm_of[a] = 0;
    }
    for (int a : rule.targets) {
      if (new_arm_of[a] == 0) {
        throw ConfigError("arm grouping: arm " + std::to_string(a) + " in both groups");
      }
      new_arm_of[a] = 1;
    }
    out.arm_map = {-1, -1};  // collapsed groups have no single source arm
  } else {
    require_arms(rule.keep_arms, "keep");
    std::vector<int> keep = rule.keep_arms;
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    if (keep.size() < 2) {
      throw ConfigError("arm grouping: need at least 2 kept arms");
    }
    for (std::size_t i = 0; i < keep.size(); ++i) {
      new_arm_of[keep[i]] = static_cast<int>(i);
    }
    out.arm_map = keep;
  }

  Dataset& ds = out.dataset;
  for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
    if (new_arm_of[dataset.treatment[i]] < 0) {
      continue;
    }
    out.kept_rows.push_back(static_cast<uint32_t>(i));
  }
  if (out.kept_rows.empty()) {
    throw ConfigError("arm grouping: no rows kept");
  }
  std::size_t n = out.kept_rows.size();
  ds.outcome.resize(n);
  ds.treatment.resize(n);
  ds.covariates = Matrix(n, dataset.covariates.cols());
  ds.column_names = dataset.column_names;
  for (std::size_t j = 0; j < n; ++j) {
    uint32_t row = out.kept_rows[j];
    ds.outcome[j] = dataset.outcome[row];
    ds.treatment[j] = new_arm_of[dataset.treatment[row]];
    for (std::size_t c = 0; c < dataset.covariates.cols(); ++c) {
      ds.covariates(j, c) = dataset.covariates(row, c);
    }
  }
  if (dataset.cluster) {
    // Recompact cluster codes over the surviving rows.
    std::vector<int> code_map(dataset.cluster_labels.size(), -1);
    std::vector<int> codes(n);
    std::vector<std::string> labels;
    for (std::size_t j = 0; j < n; ++j) {
      int old_code = (*dataset.cluster)[out.kept_rows[j]];
      if (code_map[old_code] < 0) {
        code_map[old_code] = static_cast<int>(labels.size());
        labels.push_back(dataset.cluster_labels[old_code]);
      }
      codes[j] = code_map[old_code];
    }
    ds.cluster = std::move(codes);
    ds.cluster_labels = std::move(labels);
  }
  ds.validate();
  return out;
}

AnalysisPlan resolve_analysis(const AnalysisConfig& config, int n_arms) {
  AnalysisPlan plan;
  auto range_arms = [](int from, int to) {
    std::vector<int> arms;
    for (int a = from; a < to; ++a) {
      arms.push_back(a);
    }
    return arms;
  };

  if (config.preset.empty()) {
    if (config.targets.empty() || config.baseline.empty()) {
      throw ConfigError("analysis: explicit analysis needs targets and baseline");
    }
    plan.name = config.name.empty() ? "custom_contrast" : config.name;
    plan.main_grouping = {ArmGrouping::Kind::kCollapse, config.targets, config.baseline, {}};
    plan.main_contrast = {1, 0};
    if (config.per_arm_baseline) {
      if (n_arms < 3) {
        throw ConfigError("analysis: per-arm rows need at least 3 arms");
      }
      plan.per_arm = true;
      plan.per_arm_grouping = {ArmGrouping::Kind::kKeep, {}, {}, range_arms(0, n_arms)};
      plan.per_arm_baseline = *config.per_arm_baseline;
    }
    return plan;
  }

  if (config.preset == "any-vs-control") {
    plan.name = "any_treatment_vs_control";
    plan.main_grouping = {ArmGrouping::Kind::kCollapse, range_arms(1, n_arms), {0}, {}};
    plan.main_contrast = {1, 0};
    if (n_arms >= 3) {
      plan.per_arm = true;
      plan.per_arm_grouping = {ArmGrouping::Kind::kKeep, {}, {}, range_arms(0, n_arms)};
      plan.per_arm_baseline = 0;
    }
  } else if (config.preset == "conditioning-vs-labelling") {
    if (n_arms < 3) {
      throw ConfigError("analysis: conditioning-vs-labelling needs arms {control, labelled, "
                        "conditioned...}");
    }
    plan.name = "all_conditioning_vs_labelling";
    plan.main_grouping = {ArmGrouping::Kind::kCollapse, range_arms(2, n_arms), {1}, {}};
    plan.main_contrast = {1, 0};
    if (n_arms >= 4) {
      plan.per_arm = true;
      plan.per_arm_grouping = {ArmGrouping::Kind::kKeep, {}, {}, range_arms(1, n_arms)};
      plan.per_arm_baseline = 0;  // labelled arm after remap
    }
  } else if (config.preset == "biometric-vs-labelling") {
    if (n_arms < 3) {
      throw ConfigError("analysis: biometric-vs-labelling needs arms {control, labelled, "
                        "conditioned...}");
    }
    plan.name = "biometric_vs_labelling";
    plan.main_grouping = {ArmGrouping::Kind::kKeep, {}, {}, range_arms(1, n_arms)};
    plan.main_contrast = {n_arms - 2, 0};  // highest arm vs labelled, remapped
    if (n_arms >= 4) {
      plan.per_arm = true;
      plan.per_arm_grouping = plan.main_grouping;
      plan.per_arm_baseline = 0;
    }
  } else {
    throw ConfigError("analysis: unknown preset \"" + config.preset + "\"");
  }
  return plan;
}

namespace {

ForestParams parse_forest_params(const json& obj, const ForestParams& defaults,
                                 const std::string& where) {
  check_keys(obj, {"n_trees", "subsample_fraction", "honesty_fraction", "mtry", "min_leaf",
                   "max_depth"},
             where);
  ForestParams params = defaults;
  params.n_trees = obj.value("n_trees", defaults.n_trees);
  params.subsample_fraction = obj.value("subsample_fraction", defaults.subsample_fraction);
  params.honesty_fraction = obj.value("honesty_fraction", defaults.honesty_fraction);
  params.mtry = obj.value("mtry", defaults.mtry);
  params.min_leaf = obj.value("min_leaf", defaults.min_leaf);
  params.max_depth = obj.value("max_depth", defaults.max_depth);
  return params;
}

json forest_params_to_json(const ForestParams& params) {
  return {{"n_trees", params.n_trees},
          {"subsample_fraction", params.subsample_fraction},
          {"honesty_fraction", params.honesty_fraction},
          {"mtry", params.mtry},
          {"min_leaf", params.min_leaf},
          {"max_depth", params.max_depth}};
}

Schema parse_schema(const json& obj) {
  check_keys(obj, {"outcome", "maths_index", "treatment", "cluster", "covariates"},
             "input.schema");
  Schema schema;
  if (obj.contains("maths_index") && obj.contains("outcome")) {
    throw ConfigError("config: schema takes outcome or maths_index, not both");
  }
  if (obj.contains("maths_index")) {
    const json& mi = obj.at("maths_index");
    check_keys(mi, {"categories"}, "input.schema.maths_index");
    const json& cats = mi.at("categories");
    if (!cats.is_array() || cats.size() != 4) {
      throw ConfigError("config: maths_index.categories must list exactly 4 categories");
    }
    MathsIndexColumns cols;
    for (std::size_t c = 0; c < 4; ++c) {
      check_keys(cats[c], {"earned", "max_column", "max_value"},
                 "input.schema.maths_index.categories");
      cols.earned[c] = cats[c].at("earned").get<std::string>();
      if (cats[c].contains("max_column")) {
        cols.max_column[c] = cats[c].at("max_column").get<std::string>();
      } else if (cats[c].contains("max_value")) {
        cols.max_value[c] = cats[c].at("max_value").get<double>();
        if (cols.max_value[c] <= 0.0) {
          throw ConfigError("config: maths_index max_value must be positive");
        }
      } else {
        throw ConfigError("config: maths_index category needs max_column or max_value");
      }
    }
    schema.maths_index = cols;
  } else if (obj.contains("outcome")) {
    schema.outcome_column = obj.at("outcome").get<std::string>();
  } else {
    throw ConfigError("config: schema needs outcome or maths_index");
  }
  schema.treatment_column = obj.at("treatment").get<std::string>();
  if (obj.contains("cluster")) {
    schema.cluster_column = obj.at("cluster").get<std::string>();
  }
  if (obj.contains("covariates")) {
    const json& cov = obj.at("covariates");
    check_keys(cov, {"mode", "columns", "prefixes"}, "input.schema.covariates");
    std::string mode = cov.value("mode", "all_numeric");
    if (mode == "all_numeric") {
      schema.covariate_mode = Schema::CovariateMode::kAllNumeric;
    } else if (mode == "list") {
      schema.covariate_mode = Schema::CovariateMode::kList;
      schema.covariate_columns = cov.at("columns").get<std::vector<std::string>>();
    } else if (mode == "prefix") {
      schema.covariate_mode = Schema::CovariateMode::kPrefix;
      schema.covariate_prefixes = cov.at("prefixes").get<std::vector<std::string>>();
    } else {
      throw ConfigError("config: covariates.mode must be all_numeric, list, or prefix");
    }
  }
  return schema;
}

json schema_to_json(const Schema& schema) {
  json obj;
  if (schema.maths_index) {
    json cats = json::array();
    for (std::size_t c = 0; c < 4; ++c) {
      json cat{{"earned", schema.maths_index->earned[c]}};
      if (!schema.maths_index->max_column[c].empty()) {
        cat["max_column"] = schema.maths_index->max_column[c];
      } else {
        cat["max_value"] = schema.maths_index->max_value[c];
      }
      cats.push_back(std::move(cat));
    }
    obj["maths_index"] = {{"categories", std::move(cats)}};
  } else {
    obj["outcome"] = schema.outcome_column;
  }
  obj["treatment"] = schema.treatment_column;
  if (schema.cluster_column) {
    obj["cluster"] = *schema.cluster_column;
  }
  json cov;
  switch (schema.covariate_mode) {
    case Schema::CovariateMode::kAllNumeric:
      cov = {{"mode", "all_numeric"}};
      break;
    case Schema::CovariateMode::kList:
      cov = {{"mode", "list"}, {"columns", schema.covariate_columns}};
      break;
    case Schema::CovariateMode::kPrefix:
      cov = {{"mode", "prefix"}, {"prefixes", schema.covariate_prefixes}};
      break;
  }
  obj["covariates"] = std::move(cov);
  return obj;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root = parse_json(json_text, "config");
  // A manifest wraps the config under "config"; accept both shapes.
  if (root.contains("config")) {
    check_keys(root, {"artifact", "config"}, "manifest");
    root = root.at("config");
  }
  check_keys(root,
             {"input", "analysis", "forest", "nuisance_forest", "ddrct", "clip", "k_folds",
              "cluster_mode", "histogram", "seed", "workers", "out", "export_forest_summary"},
             "config");

  RunConfig config;
  const json& input = root.at("input");
  check_keys(input, {"path", "schema"}, "input");
  config.input_path = input.at("path").get<std::string>();
  config.schema = parse_schema(input.at("schema"));

  const json& analysis = root.at("analysis");
  check_keys(analysis, {"preset", "name", "targets", "baseline", "per_arm_baseline"}, "analysis");
  config.analysis.preset = analysis.value("preset", "");
  config.analysis.name = analysis.value("name", "");
  if (analysis.contains("targets")) {
    config.analysis.targets = analysis.at("targets").get<std::vector<int>>();
  }
  if (analysis.contains("baseline")) {
    config.analysis.baseline = analysis.at("baseline").get<std::vector<int>>();
  }
  if (analysis.contains("per_arm_baseline")) {
    config.analysis.per_arm_baseline = analysis.at("per_arm_baseline").get<int>();
  }
  if (config.analysis.preset.empty() && config.analysis.targets.empty()) {
    throw ConfigError("config: analysis needs a preset or explicit targets/baseline");
  }

  ForestParams forest_defaults;
  config.forest = root.contains("forest")
                      ? parse_forest_params(root.at("forest"), forest_defaults, "forest")
                      : forest_defaults;
  ForestParams nuisance_defaults;
  nuisance_defaults.n_trees = 2000;
  config.nuisance_forest =
      root.contains("nuisance_forest")
          ? parse_forest_params(root.at("nuisance_forest"), nuisance_defaults, "nuisance_forest")
          : nuisance_defaults;

  if (root.contains("ddrct")) {
    const json& dd = root.at("ddrct");
    check_keys(dd,
               {"max_depth", "n_candidates", "candidate_subsample", "n_bootstrap", "min_leaf",
                "alpha"},
               "ddrct");
    config.ddrct.max_depth = dd.value("max_depth", config.ddrct.max_depth);
    config.ddrct.n_candidates = dd.value("n_candidates", config.ddrct.n_candidates);
    config.ddrct.candidate_subsample =
        dd.value("candidate_subsample", config.ddrct.candidate_subsample);
    config.ddrct.n_bootstrap = dd.value("n_bootstrap", config.ddrct.n_bootstrap);
    config.ddrct.min_leaf = dd.value("min_leaf", config.ddrct.min_leaf);
    config.ddrct.alpha = dd.value("alpha", config.ddrct.alpha);
  }

  config.clip = root.value("clip", config.clip);
  config.k_folds = root.value("k_folds", config.k_folds);
  std::string cluster_mode = root.value("cluster_mode", "auto");
  if (cluster_mode == "auto") {
    config.cluster_mode = RunConfig::ClusterMode::kAuto;
  } else if (cluster_mode == "on") {
    config.cluster_mode = RunConfig::ClusterMode::kOn;
  } else if (cluster_mode == "off") {
    config.cluster_mode = RunConfig::ClusterMode::kOff;
  } else {
    throw ConfigError("config: cluster_mode must be auto, on, or off");
  }
  if (root.contains("histogram")) {
    const json& hist = root.at("histogram");
    check_keys(hist, {"bins", "bin_width"}, "histogram");
    config.histogram.bins = hist.value("bins", config.histogram.bins);
    config.histogram.bin_width = hist.value("bin_width", config.histogram.bin_width);
  }
  config.seed = root.value("seed", config.seed);
  config.workers = root.value("workers", config.workers);
  config.out_dir = root.value("out", config.out_dir);
  config.export_forest_summary = root.value("export_forest_summary", false);
  return config;
}

std::string run_config_to_json(const RunConfig& config) {
  json root;
  root["input"] = {{"path", config.input_path}, {"schema", schema_to_json(config.schema)}};
  json analysis;
  if (!config.analysis.preset.empty()) {
    analysis["preset"] = config.analysis.preset;
  } else {
    analysis["name"] = config.analysis.name;
    analysis["targets"] = config.analysis.targets;
    analysis["baseline"] = config.analysis.baseline;
    if (config.analysis.per_arm_baseline) {
      analysis["per_arm_baseline"] = *config.analysis.per_arm_baseline;
    }
  }
  root["analysis"] = std::move(analysis);
  root["forest"] = forest_params_to_json(config.forest);
  root["nuisance_forest"] = forest_params_to_json(config.nuisance_forest);
  root["ddrct"] = {{"max_depth", config.ddrct.max_depth},
                   {"n_candidates", config.ddrct.n_candidates},
                   {"candidate_subsample", config.ddrct.candidate_subsample},
                   {"n_bootstrap", config.ddrct.n_bootstrap},
                   {"min_leaf", config.ddrct.min_leaf},
                   {"alpha", config.ddrct.alpha}};
  root["clip"] = config.clip;
  root["k_folds"] = config.k_folds;
  switch (config.cluster_mode) {
    case RunConfig::ClusterMode::kAuto:
      root["cluster_mode"] = "auto";
      break;
    case RunConfig::ClusterMode::kOn:
      root["cluster_mode"] = "on";
      break;
    case RunConfig::ClusterMode::kOff:
      root["cluster_mode"] = "off";
      break;
  }
  json hist;
  if (config.histogram.bin_width > 0.0) {
    hist["bin_width"] = config.histogram.bin_width;
  } else {
    hist["bins"] = config.histogram.bins;
  }
  root["histogram"] = std::move(hist);
  root["seed"] = config.seed;
  root["workers"] = config.workers;
  root["out"] = config.out_dir;
  root["export_forest_summary"] = config.export_forest_summary;
  return root.dump(2) + "\n";
}

namespace {

// Writes every artifact or none: paths are recorded as they land and removed
// on failure.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(const fs::path& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) {
      throw DataError("cannot create output directory: " + dir_.string());
    }
  }

  void write(const std::string& name, const std::string& content) {
    fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw DataError("cannot write artifact: " + path.string());
    }
    out << content;
    out.close();
    written_.push_back(path.string());
  }

  void rollback() {
    for (const auto& path : written_) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    written_.clear();
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

std::string contrast_row_name(int target_orig, int baseline_orig) {
  return "arm" + std::to_string(target_orig) + "_vs_arm" + std::to_string(baseline_orig);
}

}  // namespace

RunResult run_pipeline(const RunConfig& config) {
  if (config.workers > 0) {
    set_default_workers(config.workers);
  }

  LoadedTable loaded = load_table(config.input_path, config.schema);
  const Dataset& dataset = loaded.dataset;
  AnalysisPlan plan = resolve_analysis(config.analysis, dataset.n_arms());

  GroupedData main = arm_grouping(dataset, plan.main_grouping);
  bool cluster_respecting;
  switch (config.cluster_mode) {
    case RunConfig::ClusterMode::kOn:
      if (!main.dataset.cluster) {
        throw ConfigError("cluster_mode on, but no cluster column configured");
      }
      cluster_respecting = true;
      break;
    case RunConfig::ClusterMode::kOff:
      cluster_respecting = false;
      break;
    default:
      cluster_respecting = main.dataset.cluster.has_value();
      break;
  }
  const std::vector<int>* main_clusters =
      cluster_respecting && main.dataset.cluster ? &*main.dataset.cluster : nullptr;

  // Main contrast: nuisances, scores, forest, surrogate tree.
  uint64_t seed = config.seed;
  SplitPlan split_plan =
      make_split_plan(main.dataset, config.k_folds, derive_seed(seed, 1), cluster_respecting);
  ForestParams nuisance_params = config.nuisance_forest;
  nuisance_params.seed = derive_seed(seed, 2);
  NuisanceEstimates nuisance =
      crossfit_nuisances(main.dataset, split_plan, nuisance_params, config.clip);
  DrScoreSet scores = dr_scores(main.dataset, nuisance, plan.main_contrast);
  AteEstimate ate = dr_ate(scores, main_clusters);

  ForestParams forest_params = config.forest;
  forest_params.seed = derive_seed(seed, 3);
  CausalForest forest = fit_causal_forest(main.dataset, nuisance, plan.main_contrast,
                                          forest_params);
  CateEstimates cate = predict_cate(forest, main.dataset);

  DdrctParams ddrct_params = config.ddrct;
  ddrct_params.seed = derive_seed(seed, 4);
  DdrctTree tree = stability_select(main.dataset, cate, scores, ddrct_params, cluster_respecting);

  std::vector<std::pair<std::string, AteEstimate>> ate_rows;
  ate_rows.emplace_back(plan.name, ate);

  if (plan.per_arm) {
    GroupedData per_arm = plan.per_arm_grouping == plan.main_grouping
                              ? GroupedData{}  // reuse main below
                              : arm_grouping(dataset, plan.per_arm_grouping);
    const GroupedData& view = plan.per_arm_grouping == plan.main_grouping ? main : per_arm;
    const std::vector<int>* view_clusters =
        cluster_respecting && view.dataset.cluster ? &*view.dataset.cluster : nullptr;

    std::vector<DrScoreSet> arm_scores;
    if (plan.per_arm_grouping == plan.main_grouping) {
      arm_scores = multi_arm_scores(view.dataset, nuisance, plan.per_arm_baseline);
    } else {
      SplitPlan per_plan = make_split_plan(view.dataset, config.k_folds, derive_seed(seed, 5),
                                           cluster_respecting);
      ForestParams per_params = config.nuisance_forest;
      per_params.seed = derive_seed(seed, 6);
      NuisanceEstimates per_nuisance =
          crossfit_nuisances(view.dataset, per_plan, per_params, config.clip);
      arm_scores = multi_arm_scores(view.dataset, per_nuisance, plan.per_arm_baseline);
    }
    int baseline_orig = view.arm_map[plan.per_arm_baseline];
    for (const DrScoreSet& s : arm_scores) {
      AteEstimate arm_ate = dr_ate(s, view_clusters);
      ate_rows.emplace_back(
          contrast_row_name(view.arm_map[s.contrast.target], baseline_orig), arm_ate);
    }
  }

  // Assemble artifacts before anything lands on disk.
  std::string ate_csv = ate_table_csv(ate_rows);
  std::string nodes_csv = nodes_table_csv(tree);
  std::string dot = tree_dot(tree);
  std::string tree_json = tree_to_json(tree, main.dataset.column_names, &ate);
  std::string hist_csv = histogram_csv(cate, ate, config.histogram);

  json manifest;
  manifest["artifact"] = {
      {"name", "hte"},
      {"version", kVersion},
      {"treatment_levels", loaded.report.treatment_levels},
      {"rows_dropped", loaded.report.rows_dropped},
      {"screening", loaded.report.log},
      {"analysis_resolved",
       {{"name", plan.name},
        {"main_contrast",
         {{"target", plan.main_contrast.target}, {"baseline", plan.main_contrast.baseline}}},
        {"per_arm", plan.per_arm},
        {"cluster_respecting", cluster_respecting}}},
  };
  manifest["config"] = parse_json(run_config_to_json(config), "config");

  ArtifactWriter writer(config.out_dir);
  RunResult result;
  result.log = loaded.report.log;
  try {
    writer.write("ate.csv", ate_csv);
    writer.write("nodes.csv", nodes_csv);
    writer.write("tree.dot", dot);
    writer.write("tree.json", tree_json);
    writer.write("cate_histogram.csv", hist_csv);
    if (config.export_forest_summary) {
      writer.write("forest_summary.csv", forest_summary_csv(forest.trees));
      writer.write("importance.csv",
                   importance_csv(variable_importance(forest), main.dataset.column_names));
    }
    writer.write("run_manifest.json", manifest.dump(2) + "\n");
  } catch (...) {
    writer.rollback();
    throw;
  }
  result.artifacts = writer.written();
  return result;
}

SimulateConfig parse_simulate_config(const std::string& json_text) {
  json root = parse_json(json_text, "simulate config");
  check_keys(root,
             {"n", "p", "arms", "propensity", "baseline", "cate", "noise_sd", "missing_rate",
              "clusters", "corr_copy", "seed", "out_data", "out_truth"},
             "simulate config");
  SimulateConfig config;
  DgpSpec& dgp = config.dgp;
  dgp.n = root.at("n").get<std::size_t>();
  dgp.p = root.value("p", dgp.p);
  dgp.arms = root.value("arms", dgp.arms);

  if (root.contains("propensity")) {
    const json& prop = root.at("propensity");
    if (prop.is_array()) {
      dgp.propensity.probs = prop.get<std::vector<double>>();
      dgp.propensity.softmax_col = -1;
    } else {
      check_keys(prop, {"softmax_col", "slopes"}, "simulate.propensity");
      dgp.propensity.softmax_col = prop.at("softmax_col").get<int>() - 1;
      dgp.propensity.slopes = prop.at("slopes").get<std::vector<double>>();
      dgp.propensity.probs.clear();
    }
  } else {
    dgp.propensity.probs.assign(dgp.arms, 1.0 / static_cast<double>(dgp.arms));
  }

  std::string baseline = root.value("baseline", "zero");
  if (baseline == "zero") {
    dgp.baseline.kind = BaselineFn::Kind::kZero;
  } else if (baseline == "linear") {
    dgp.baseline.kind = BaselineFn::Kind::kLinear;
  } else if (baseline == "step") {
    dgp.baseline.kind = BaselineFn::Kind::kStep;
  } else if (baseline == "sine") {
    dgp.baseline.kind = BaselineFn::Kind::kSine;
  } else {
    throw ConfigError("simulate: baseline must be zero, linear, step, or sine");
  }

  if (!root.contains("cate")) {
    throw ConfigError("simulate: cate functions required, one per non-control arm");
  }
  for (const json& fn : root.at("cate")) {
    check_keys(fn, {"kind", "value", "coef", "col", "threshold"}, "simulate.cate");
    CateFn cate;
    std::string kind = fn.at("kind").get<std::string>();
    if (kind == "constant") {
      cate.kind = CateFn::Kind::kConstant;
      cate.value = fn.at("value").get<double>();
    } else if (kind == "step") {
      cate.kind = CateFn::Kind::kStep;
      cate.value = fn.at("value").get<double>();
      cate.col = fn.at("col").get<int>() - 1;
      cate.threshold = fn.value("threshold", 0.0);
    } else if (kind == "linear") {
      cate.kind = CateFn::Kind::kLinear;
      cate.value = fn.at("coef").get<double>();
      cate.col = fn.at("col").get<int>() - 1;
    } else {
      throw ConfigError("simulate: cate kind must be constant, step, or linear");
    }
    dgp.cate.push_back(cate);
  }

  dgp.noise_sd = root.value("noise_sd", dgp.noise_sd);
  dgp.missing_rate = root.value("missing_rate", dgp.missing_rate);
  dgp.cluster_count = root.value("clusters", 0);
  if (root.contains("corr_copy")) {
    const json& cc = root.at("corr_copy");
    check_keys(cc, {"source_col", "targets", "noise_sd"}, "simulate.corr_copy");
    CorrelatedCopies copies;
    copies.source_col = cc.at("source_col").get<int>() - 1;
    for (int t : cc.at("targets").get<std::vector<int>>()) {
      copies.targets.push_back(t - 1);
    }
    copies.noise_sd = cc.value("noise_sd", copies.noise_sd);
    dgp.corr_copy = copies;
  }
  dgp.seed = root.value("seed", dgp.seed);
  config.out_data = root.value("out_data", config.out_data);
  config.out_truth = root.value("out_truth", "");
  return config;
}

RunResult run_simulate(const SimulateConfig& config) {
  SyntheticTruth truth = generate(config.dgp);
  RunResult result;
  csv::write_file(config.out_data, dataset_to_csv(truth.dataset));
  result.artifacts.push_back(config.out_data);
  if (!config.out_truth.empty()) {
    csv::write_file(config.out_truth, truth_to_csv(truth));
    result.artifacts.push_back(config.out_truth);
  }
  return result;
}

RunResult run_report(const std::string& tree_json_path, const std::string& out_dir) {
  std::ifstream in(tree_json_path, std::ios::binary);
  if (!in) {
    throw DataError("report: missing file: " + tree_json_path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  LoadedTree loaded = tree_from_json(buf.str());

  ArtifactWriter writer(out_dir);
  try {
    writer.write("nodes.csv", nodes_table_csv(loaded.tree));
    writer.write("tree.dot", tree_dot(loaded.tree));
  } catch (...) {
    writer.rollback();
    throw;
  }
  RunResult result;
  result.artifacts = writer.written();
  return result;
}

}  // namespace hte
