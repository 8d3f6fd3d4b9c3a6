#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/matrix.hpp"

namespace hte {

struct ForestParams {
  int n_trees = 10000;
  double subsample_fraction = 0.5;
  double honesty_fraction = 0.5;   // share of each subsample used to pick splits
  int mtry = 0;                    // 0 = ceil(sqrt(p) + 20), capped at p
  int min_leaf = 5;
  int max_depth = 0;               // 0 = unlimited
  uint64_t seed = 0;

  int resolved_mtry(std::size_t p) const;
  void validate() const;
};

// Flat tree storage; split_var < 0 marks a leaf. Units with a missing value
// on the split variable follow missing_left.
struct TreeNodes {
  std::vector<int32_t> split_var;
  std::vector<double> threshold;
  std::vector<uint8_t> missing_left;
  std::vector<int32_t> left;
  std::vector<int32_t> right;
  std::vector<double> value;     // leaf payload; NaN when not estimable
  std::vector<int32_t> n_value;  // units behind each leaf value
  std::vector<int32_t> depth;

  std::size_t size() const { return split_var.size(); }
  bool is_leaf(std::size_t node) const { return split_var[node] < 0; }
  int add_node(int depth_of_node);
};

// Walks a row to its leaf; total by construction, including all-missing rows.
int leaf_of(const TreeNodes& tree, const Matrix& x, std::size_t row);
bool route_left(double value, double threshold, bool missing_left);

struct HonestTree {
  TreeNodes nodes;
  std::vector<uint32_t> split_units;  // sorted; chose the structure
  std::vector<uint32_t> est_units;    // sorted; produced the leaf values
  bool in_bag(uint32_t unit) const;
};

struct RegressionForest {
  ForestParams params;
  std::vector<HonestTree> trees;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
};

struct Contrast {
  int target = 1;
  int baseline = 0;
  bool operator==(const Contrast&) const = default;
};

struct CausalForest {
  ForestParams params;
  std::vector<HonestTree> trees;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  Contrast contrast;
  std::vector<uint32_t> train_units;  // rows in the contrast's two arms
};

struct CateEstimates {
  std::vector<double> tau_hat;     // NaN when no tree could score the unit
  std::vector<int> n_oob_trees;    // contributing out-of-bag trees
};

struct OobPredictions {
  std::vector<double> values;
  std::vector<int> n_oob_trees;
};

// Honest regression forest: splits minimize within-child variance on the
// split half of each subsample, leaf values are estimation-half means.
// `units` restricts training to a subset of rows (empty = all rows).
RegressionForest fit_regression_forest(const Matrix& x, std::span<const double> y,
                                       const ForestParams& params,
                                       std::span<const uint32_t> units = {});

std::vector<double> predict(const RegressionForest& forest, const Matrix& x);
std::vector<double> predict(const RegressionForest& forest, const Matrix& x,
                            std::span<const uint32_t> rows);
OobPredictions predict_oob(const RegressionForest& forest, const Matrix& x);

struct NuisanceEstimates;  // scores.hpp

// Causal forest on residualized data for a binary contrast; trees are grown
// on the units in the two contrast arms only.
CausalForest fit_causal_forest(const Dataset& dataset, const NuisanceEstimates& nuisance,
                               Contrast contrast, const ForestParams& params);

// Out-of-bag CATE per dataset row. Rows outside the contrast arms were never
// subsampled, so every tree counts as out-of-bag for them.
CateEstimates predict_cate(const CausalForest& forest, const Dataset& dataset);

// Depth-weighted split counts, decayed by (1/2)^depth and normalized to sum
// one; descending weight, ties by column index. The measure inherits the
// usual bias toward variables with many distinct values; read it as a
// split-usage summary, not an effect size.
std::vector<std::pair<int, double>> variable_importance(std::span<const HonestTree> trees,
                                                        std::size_t n_cols);
std::vector<std::pair<int, double>> variable_importance(const RegressionForest& forest);
std::vector<std::pair<int, double>> variable_importance(const CausalForest& forest);

// --- split search -----------------------------------------------------------

struct SplitCandidate {
  int var = -1;
  double threshold = 0.0;
  bool missing_left = true;
  double criterion = 0.0;
  bool valid() const { return var >= 0; }
};

// Best (variable, midpoint threshold, missing direction) by the mean-shift
// criterion n_l * n_r * (mean_l - mean_r)^2 over `units`. Children need at
// least min_leaf units and, when aux is given, a positive aux sum (used for
// the causal criterion's treatment-variation requirement). Ties resolve to
// the lowest variable index, then lowest threshold, then missing-left.
SplitCandidate best_split(const Matrix& x, std::span<const uint32_t> units,
                          std::span<const double> response, const double* aux,
                          std::span<const int> vars, int min_leaf);

// Causal pseudo-outcomes for one node: rho_i = w~_i (y~_i - w~_i beta) /
// (sum w~^2 / n) with beta = sum(w~ y~) / sum(w~^2) over the node's units.
// Returns false when the node has no treatment variation.
bool causal_pseudo_outcomes(std::span<const uint32_t> units, std::span<const double> y_tilde,
                            std::span<const double> w_tilde, std::span<double> rho_out);

// Single depth-limited CART structure plus training-sample leaf means; used
// for distillation. Considers every column at every split.
TreeNodes build_cart_tree(const Matrix& x, std::span<const double> response,
                          std::span<const uint32_t> units, int min_leaf, int max_depth);

double predict_tree(const TreeNodes& tree, const Matrix& x, std::size_t row);

// --- diagnostics ------------------------------------------------------------

struct AuditResult {
  bool ok = true;
  std::string detail;
};

// Split/estimation disjointness for every tree.
AuditResult audit_honesty(std::span<const HonestTree> trees);
// Every row reaches exactly one leaf in every tree.
AuditResult audit_routing(std::span<const HonestTree> trees, const Matrix& x);

// Per-tree node counts and a depth histogram, as delimited text.
std::string forest_summary_csv(std::span<const HonestTree> trees);
std::string importance_csv(const std::vector<std::pair<int, double>>& importance,
                           std::span<const std::string> column_names);

}  // namespace hte
