#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/forest.hpp"
#include "hte/scores.hpp"

namespace hte {

struct DdrctParams {
  int max_depth = 3;
  int n_candidates = 1000;
  double candidate_subsample = 0.5;
  int n_bootstrap = 2000;
  int min_leaf = 5;
  uint64_t seed = 0;
  double alpha = 0.05;

  void validate() const;
};

// One node of the surrogate tree. Estimates exist at every node, not only
// leaves; a node left empty by honesty carries n = 0 and a NaN estimate.
struct DdrctNode {
  int id = 0;
  int depth = 0;
  std::vector<std::string> rule_path;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
  bool significant = false;
  bool flagged_empty = false;
  int bootstrap_skipped = 0;

  int split_var = -1;
  double threshold = 0.0;
  bool missing_left = true;
  std::unique_ptr<DdrctNode> left;
  std::unique_ptr<DdrctNode> right;

  bool is_leaf() const { return !left; }
};

struct DdrctTree {
  DdrctNode root;
  std::vector<uint32_t> fit_half;       // sorted
  std::vector<uint32_t> estimate_half;  // sorted
  std::vector<int> estimate_leaf;       // leaf node id per estimate_half entry
  std::vector<double> candidate_losses;  // out-of-subsample MSE per candidate
  int chosen_candidate = 0;
  DdrctParams params;
  Contrast contrast;

  std::size_t node_count() const;
  // Structure fingerprint: ids, depths, split variables and thresholds only.
  std::string topology_string() const;
};

// Depth-limited CART on (covariates of fit units, teacher predictions) using
// the shared split machinery; all columns are considered at every split.
TreeNodes distill_tree(const Matrix& covariates, std::span<const uint32_t> fit_units,
                       std::span<const double> teacher_tau, const DdrctParams& params);

// Builds the estimated node tree: every estimate-half unit is routed to its
// leaf and node estimates are assembled bottom-up, so a parent's estimate is
// exactly the n-weighted mean of its children.
DdrctTree estimate_nodes(const TreeNodes& structure, const Matrix& covariates,
                         const DrScoreSet& scores, std::span<const uint32_t> fit_half,
                         std::span<const uint32_t> estimate_half, const DdrctParams& params,
                         std::span<const std::string> column_names);

// Fixed-structure bootstrap: resamples estimate-half units (or their
// clusters) with replacement, re-averages every node, and attaches se,
// percentile CI at 1 - alpha, and the significance flag. Replicates that
// leave a node empty are skipped for that node and counted.
void bootstrap_nodes(DdrctTree& tree, const DrScoreSet& scores, int n_bootstrap, uint64_t seed,
                     const std::vector<int>* cluster = nullptr);

// Fits n_candidates distilled trees, each on a candidate_subsample share of
// units split half fit / half estimate, scores each by MSE against the
// forest's out-of-bag predictions on the units outside its subsample, and
// returns the minimum-loss candidate estimated on its own half and
// bootstrapped. Ties resolve to the lowest candidate index.
DdrctTree stability_select(const Dataset& dataset, const CausalForest& forest,
                           const DrScoreSet& scores, const DdrctParams& params,
                           std::optional<bool> cluster_respecting = std::nullopt);

// As above with the forest's out-of-bag predictions already in hand.
DdrctTree stability_select(const Dataset& dataset, const CateEstimates& teacher,
                           const DrScoreSet& scores, const DdrctParams& params,
                           std::optional<bool> cluster_respecting = std::nullopt);

struct PipelineOptions {
  int k_folds = 5;
  double clip = 0.01;
  std::optional<bool> cluster_respecting;       // default: on when clusters exist
  std::optional<ForestParams> nuisance_params;  // default: same as the CATE forest
  uint64_t seed = 0;
};

struct DdrctPipelineResult {
  DdrctTree tree;
  AteEstimate ate;
  CateEstimates cate;
};

// crossfit_nuisances -> dr_scores -> fit_causal_forest -> predict_cate ->
// stability_select -> bootstrap_nodes. All component seeds derive from
// options.seed; the seeds inside the param structs are ignored.
DdrctPipelineResult run_ddrct_pipeline(const Dataset& dataset, Contrast contrast,
                                       const ForestParams& forest_params,
                                       const DdrctParams& ddrct_params,
                                       const PipelineOptions& options = {});

// Parent n = sum of child n, parent estimate = weighted child mean (1e-10),
// depth bound respected, fit/estimate halves disjoint.
AuditResult audit_ddrct(const DdrctTree& tree);

// Leaf estimate of the node each row routes to.
std::vector<double> predict_node_estimates(const DdrctTree& tree, const Matrix& x);

}  // namespace hte
