#include "hte/ddrct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "hte/common.hpp"

namespace hte {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream tags under the ddrct seed.
enum Stream : uint64_t {
  kCandidate = 0xC0,
  kBootstrap = 0xB0,
};
}  // namespace

void DdrctParams::validate() const {
  if (max_depth < 0) {
    throw ConfigError("ddrct: max_depth must be >= 0");
  }
  if (n_candidates < 1) {
    throw ConfigError("ddrct: n_candidates must be >= 1");
  }
  if (!(candidate_subsample > 0.0 && candidate_subsample <= 1.0)) {
    throw ConfigError("ddrct: candidate_subsample must be in (0, 1]");
  }
  if (n_bootstrap < 2) {
    throw ConfigError("ddrct: n_bootstrap must be >= 2");
  }
  if (min_leaf < 1) {
    throw ConfigError("ddrct: min_leaf must be >= 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("ddrct: alpha must be in (0, 1)");
  }
}

std::size_t DdrctTree::node_count() const {
  std::size_t count = 0;
  std::vector<const DdrctNode*> stack{&root};
  while (!stack.empty()) {
    const DdrctNode* node = stack.back();
    stack.pop_back();
    ++count;
    if (!node->is_leaf()) {
      stack.push_back(node->left.get());
      stack.push_back(node->right.get());
    }
  }
  return count;
}

std::string DdrctTree::topology_string() const {
  std::ostringstream out;
  std::vector<const DdrctNode*> stack{&root};
  while (!stack.empty()) {
    const DdrctNode* node = stack.back();
    stack.pop_back();
    out << node->id << ':' << node->depth;
    if (!node->is_leaf()) {
      out << ":v" << node->split_var << ":t" << format_double(node->threshold) << ":m"
          << (node->missing_left ? 'L' : 'R');
      stack.push_back(node->right.get());
      stack.push_back(node->left.get());
    }
    out << ';';
  }
  return out.str();
}

TreeNodes distill_tree(const Matrix& covariates, std::span<const uint32_t> fit_units,
                       std::span<const double> teacher_tau, const DdrctParams& params) {
  params.validate();
  for (uint32_t u : fit_units) {
    if (is_missing(teacher_tau[u])) {
      throw NumericError("distill: teacher prediction missing for unit " + std::to_string(u));
    }
  }
  return build_cart_tree(covariates, teacher_tau, fit_units, params.min_leaf, params.max_depth);
}

namespace {

// Rule strings are presentation: thresholds are rounded for readability, the
// exact split values stay on the node.
std::string rule_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

std::string rule_text(const std::string& name, double threshold, bool left, bool missing_here) {
  std::string rule = name + (left ? " <= " : " > ") + rule_number(threshold);
  if (missing_here) {
    rule += " (or missing)";
  }
  return rule;
}

bool node_route_left(const DdrctNode& node, const Matrix& x, std::size_t row) {
  return route_left(x(row, node.split_var), node.threshold, node.missing_left);
}

void collect_nodes(DdrctNode& node, std::vector<DdrctNode*>& out) {
  out.push_back(&node);
  if (!node.is_leaf()) {
    collect_nodes(*node.left, out);
    collect_nodes(*node.right, out);
  }
}

void collect_leaves(DdrctNode& node, std::vector<DdrctNode*>& out) {
  if (node.is_leaf()) {
    out.push_back(&node);
    return;
  }
  collect_leaves(*node.left, out);
  collect_leaves(*node.right, out);
}

// Level-order conversion of the flat structure; ids start at 1 at the root
// so node tables read top-down.
DdrctNode convert_structure(const TreeNodes& structure,
                            std::span<const std::string> column_names) {
  struct Item {
    int structure_node;
    DdrctNode* out;
  };
  DdrctNode root;
  std::vector<Item> queue{{0, &root}};
  int next_id = 1;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    Item item = queue[q];
    int s = item.structure_node;
    DdrctNode* node = item.out;
    node->id = next_id++;
    node->depth = structure.depth[s];
    node->estimate = kNaN;
    node->se = kNaN;
    node->ci_lo = kNaN;
    node->ci_hi = kNaN;
    if (structure.is_leaf(s)) {
      continue;
    }
    node->split_var = structure.split_var[s];
    node->threshold = structure.threshold[s];
    node->missing_left = structure.missing_left[s] != 0;
    node->left = std::make_unique<DdrctNode>();
    node->right = std::make_unique<DdrctNode>();
    const std::string name = static_cast<std::size_t>(node->split_var) < column_names.size()
                                 ? column_names[node->split_var]
                                 : "x" + std::to_string(node->split_var + 1);
    node->left->rule_path = node->rule_path;
    node->left->rule_path.push_back(rule_text(name, node->threshold, true, node->missing_left));
    node->right->rule_path = node->rule_path;
    node->right->rule_path.push_back(rule_text(name, node->threshold, false, !node->missing_left));
    queue.push_back({structure.left[s], node->left.get()});
    queue.push_back({structure.right[s], node->right.get()});
  }
  return root;
}

struct NodeSums {
  double sum = 0.0;
  std::size_t n = 0;
};

// Aggregates leaf sums up the tree; the parent identity
// estimate_p = (n_l est_l + n_r est_r) / n_p is then exact by construction.
NodeSums assign_estimates(DdrctNode& node, const std::unordered_map<int, NodeSums>& leaf_sums) {
  NodeSums sums;
  if (node.is_leaf()) {
    auto it = leaf_sums.find(node.id);
    if (it != leaf_sums.end()) {
      sums = it->second;
    }
  } else {
    NodeSums l = assign_estimates(*node.left, leaf_sums);
    NodeSums r = assign_estimates(*node.right, leaf_sums);
    sums.sum = l.sum + r.sum;
    sums.n = l.n + r.n;
  }
  node.n = sums.n;
  if (sums.n == 0) {
    node.estimate = kNaN;
    node.flagged_empty = true;
  } else {
    node.estimate = sums.sum / static_cast<double>(sums.n);
    node.flagged_empty = false;
  }
  return sums;
}

}  // namespace

DdrctTree estimate_nodes(const TreeNodes& structure, const Matrix& covariates,
                         const DrScoreSet& scores, std::span<const uint32_t> fit_half,
                         std::span<const uint32_t> estimate_half, const DdrctParams& params,
                         std::span<const std::string> column_names) {
  DdrctTree tree;
  tree.params = params;
  tree.contrast = scores.contrast;
  tree.fit_half.assign(fit_half.begin(), fit_half.end());
  tree.estimate_half.assign(estimate_half.begin(), estimate_half.end());
  std::sort(tree.fit_half.begin(), tree.fit_half.end());
  std::sort(tree.estimate_half.begin(), tree.estimate_half.end());
  tree.root = convert_structure(structure, column_names);

  tree.estimate_leaf.resize(tree.estimate_half.size());
  std::unordered_map<int, NodeSums> leaf_sums;
  for (std::size_t j = 0; j < tree.estimate_half.size(); ++j) {
    uint32_t u = tree.estimate_half[j];
    DdrctNode* node = &tree.root;
    while (!node->is_leaf()) {
      node = node_route_left(*node, covariates, u) ? node->left.get() : node->right.get();
    }
    tree.estimate_leaf[j] = node->id;
    NodeSums& sums = leaf_sums[node->id];
    sums.sum += scores.gamma[u];
    sums.n += 1;
  }
  assign_estimates(tree.root, leaf_sums);
  return tree;
}

void bootstrap_nodes(DdrctTree& tree, const DrScoreSet& scores, int n_bootstrap, uint64_t seed,
                     const std::vector<int>* cluster) {
  if (n_bootstrap < 2) {
    throw ConfigError("bootstrap: n_bootstrap must be >= 2");
  }
  const std::vector<uint32_t>& units = tree.estimate_half;
  std::size_t n_units = units.size();
  if (n_units == 0) {
    throw DataError("bootstrap: empty estimation half");
  }
  if (tree.estimate_leaf.size() != n_units) {
    throw DataError("bootstrap: tree has no recorded leaf assignments; run estimate_nodes first");
  }

  std::vector<DdrctNode*> nodes;
  collect_nodes(tree.root, nodes);
  std::vector<DdrctNode*> leaves;
  collect_leaves(tree.root, leaves);
  std::size_t n_leaves = leaves.size();

  std::unordered_map<int, int> leaf_pos;
  for (std::size_t l = 0; l < n_leaves; ++l) {
    leaf_pos[leaves[l]->id] = static_cast<int>(l);
  }
  std::vector<int> unit_leaf(n_units);
  for (std::size_t j = 0; j < n_units; ++j) {
    unit_leaf[j] = leaf_pos.at(tree.estimate_leaf[j]);
  }

  // Descendant-leaf lists, so each node's replicate estimate is a sum over a
  // handful of leaf accumulators.
  std::vector<std::vector<int>> node_leaves(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::vector<DdrctNode*> sub;
    collect_leaves(*nodes[i], sub);
    for (DdrctNode* leaf : sub) {
      node_leaves[i].push_back(leaf_pos.at(leaf->id));
    }
  }

  // Optional cluster resampling: draw clusters with replacement, keep all of
  // each drawn cluster's units.
  std::vector<int> unit_cluster;
  std::vector<std::vector<uint32_t>> cluster_members;  // positions into units
  if (cluster != nullptr) {
    std::unordered_map<int, int> code_pos;
    for (std::size_t j = 0; j < n_units; ++j) {
      int code = (*cluster)[units[j]];
      auto [it, inserted] = code_pos.emplace(code, static_cast<int>(cluster_members.size()));
      if (inserted) {
        cluster_members.emplace_back();
      }
      cluster_members[it->second].push_back(static_cast<uint32_t>(j));
    }
  }
  std::size_t n_groups = cluster != nullptr ? cluster_members.size() : n_units;

  std::size_t b_total = static_cast<std::size_t>(n_bootstrap);
  std::vector<double> replicate_estimates(b_total * nodes.size(), kNaN);

  parallel_for(b_total, 0, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, kBootstrap, b));
    std::uniform_int_distribution<std::size_t> dist(0, n_groups - 1);
    std::vector<double> leaf_sum(n_leaves, 0.0);
    std::vector<std::size_t> leaf_count(n_leaves, 0);
    for (std::size_t draw = 0; draw < n_groups; ++draw) {
      std::size_t g = dist(rng);
      if (cluster != nullptr) {
        for (uint32_t j : cluster_members[g]) {
          leaf_sum[unit_leaf[j]] += scores.gamma[units[j]];
          ++leaf_count[unit_leaf[j]];
        }
      } else {
        leaf_sum[unit_leaf[g]] += scores.gamma[units[g]];
        ++leaf_count[unit_leaf[g]];
      }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      double sum = 0.0;
      std::size_t count = 0;
      for (int l : node_leaves[i]) {
        sum += leaf_sum[l];
        count += leaf_count[l];
      }
      if (count > 0) {
        replicate_estimates[b * nodes.size() + i] = sum / static_cast<double>(count);
      }
    }
  });

  double q_lo = tree.params.alpha / 2.0;
  double q_hi = 1.0 - tree.params.alpha / 2.0;
  std::vector<double> collected;
  collected.reserve(b_total);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    DdrctNode* node = nodes[i];
    collected.clear();
    for (std::size_t b = 0; b < b_total; ++b) {
      double v = replicate_estimates[b * nodes.size() + i];
      if (!is_missing(v)) {
        collected.push_back(v);
      }
    }
    node->bootstrap_skipped = static_cast<int>(b_total - collected.size());
    if (collected.empty()) {
      node->se = kNaN;
      node->ci_lo = kNaN;
      node->ci_hi = kNaN;
      node->significant = false;
      continue;
    }
    node->se = sample_sd(collected);
    std::sort(collected.begin(), collected.end());
    node->ci_lo = quantile_sorted(collected, q_lo);
    node->ci_hi = quantile_sorted(collected, q_hi);
    node->significant = !(node->ci_lo <= 0.0 && 0.0 <= node->ci_hi);
  }
}

namespace {

// Candidate draw: a subsample of roughly candidate_subsample * n units split
// into fit/estimate halves, plus the untouched out-of-subsample units.
struct CandidateDraw {
  std::vector<uint32_t> fit_half;
  std::vector<uint32_t> est_half;
  std::vector<uint32_t> out_of_subsample;
};

// Greedy fractional-target assignment of clusters to two bins.
std::vector<int> greedy_two_bins(const std::vector<std::size_t>& sizes, double target_first,
                                 std::mt19937_64& rng) {
  std::vector<int> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sizes[a] > sizes[b]; });
  double target[2] = {target_first, 1.0 - target_first};
  double load[2] = {0.0, 0.0};
  std::vector<int> bin_of(sizes.size(), 0);
  for (int c : order) {
    double score0 = (load[0] + static_cast<double>(sizes[c])) / target[0];
    double score1 = (load[1] + static_cast<double>(sizes[c])) / target[1];
    int bin = score1 < score0 ? 1 : 0;
    bin_of[c] = bin;
    load[bin] += static_cast<double>(sizes[c]);
  }
  return bin_of;
}

CandidateDraw draw_candidate(std::size_t n, double subsample_fraction,
                             const std::vector<int>* cluster_codes, std::mt19937_64& rng) {
  CandidateDraw draw;
  if (cluster_codes == nullptr) {
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(subsample_fraction * static_cast<double>(n))), 2, n);
    std::size_t fit_m = (m + 1) / 2;
    draw.fit_half.assign(order.begin(), order.begin() + fit_m);
    draw.est_half.assign(order.begin() + fit_m, order.begin() + m);
    draw.out_of_subsample.assign(order.begin() + m, order.end());
    return draw;
  }

  int n_clusters = 1 + *std::max_element(cluster_codes->begin(), cluster_codes->end());
  std::vector<std::size_t> sizes(n_clusters, 0);
  for (int c : *cluster_codes) {
    ++sizes[c];
  }
  std::vector<int> in_subsample = greedy_two_bins(sizes, subsample_fraction, rng);
  // Split the subsampled clusters into halves with a second greedy pass.
  std::vector<int> sub_clusters;
  for (int c = 0; c < n_clusters; ++c) {
    if (in_subsample[c] == 0) {
      sub_clusters.push_back(c);
    }
  }
  std::vector<std::size_t> sub_sizes;
  sub_sizes.reserve(sub_clusters.size());
  for (int c : sub_clusters) {
    sub_sizes.push_back(sizes[c]);
  }
  std::vector<int> half_bin = greedy_two_bins(sub_sizes, 0.5, rng);
  std::vector<int> role(n_clusters, 2);  // 0 fit, 1 estimate, 2 out
  for (std::size_t j = 0; j < sub_clusters.size(); ++j) {
    role[sub_clusters[j]] = half_bin[j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    switch (role[(*cluster_codes)[i]]) {
      case 0:
        draw.fit_half.push_back(static_cast<uint32_t>(i));
        break;
      case 1:
        draw.est_half.push_back(static_cast<uint32_t>(i));
        break;
      default:
        draw.out_of_subsample.push_back(static_cast<uint32_t>(i));
        break;
    }
  }
  return draw;
}

}  // namespace

DdrctTree stability_select(const Dataset& dataset, const CateEstimates& teacher,
                           const DrScoreSet& scores, const DdrctParams& params,
                           std::optional<bool> cluster_respecting) {
  params.validate();
  std::size_t n = dataset.n_rows();
  if (teacher.tau_hat.size() != n || scores.gamma.size() != n) {
    throw DataError("stability select: teacher/score lengths do not match dataset");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (is_missing(teacher.tau_hat[i])) {
      throw NumericError("stability select: no out-of-bag prediction for unit " +
                         std::to_string(i) + "; increase n_trees or lower subsample_fraction");
    }
  }
  bool use_clusters = cluster_respecting.value_or(dataset.cluster.has_value()) &&
                      dataset.cluster.has_value();
  const std::vector<int>* cluster_codes = use_clusters ? &*dataset.cluster : nullptr;
  const Matrix& x = dataset.covariates;
  const std::vector<double>& tau = teacher.tau_hat;

  std::size_t n_cand = static_cast<std::size_t>(params.n_candidates);
  std::vector<double> losses(n_cand, kInf);
  parallel_for(n_cand, 0, [&](std::size_t c) {
    std::mt19937_64 rng(derive_seed(params.seed, kCandidate, c));
    CandidateDraw draw = draw_candidate(n, params.candidate_subsample, cluster_codes, rng);
    if (draw.fit_half.size() < 2 * static_cast<std::size_t>(params.min_leaf) ||
        draw.est_half.empty() || draw.out_of_subsample.empty()) {
      return;  // loss stays infinite
    }
    TreeNodes structure =
        build_cart_tree(x, tau, draw.fit_half, params.min_leaf, params.max_depth);
    double sum_sq = 0.0;
    for (uint32_t u : draw.out_of_subsample) {
      double diff = predict_tree(structure, x, u) - tau[u];
      sum_sq += diff * diff;
    }
    losses[c] = sum_sq / static_cast<double>(draw.out_of_subsample.size());
  });

  std::size_t chosen = 0;
  for (std::size_t c = 1; c < n_cand; ++c) {
    if (losses[c] < losses[chosen]) {
      chosen = c;
    }
  }
  if (!(losses[chosen] < kInf)) {
    throw DataError("stability select: no candidate produced a scorable tree");
  }

  // Re-derive the chosen candidate and materialize its tree.
  std::mt19937_64 rng(derive_seed(params.seed, kCandidate, chosen));
  CandidateDraw draw = draw_candidate(n, params.candidate_subsample, cluster_codes, rng);
  TreeNodes structure = build_cart_tree(x, tau, draw.fit_half, params.min_leaf, params.max_depth);
  DdrctTree tree = estimate_nodes(structure, x, scores, draw.fit_half, draw.est_half, params,
                                  dataset.column_names);
  tree.candidate_losses = std::move(losses);
  tree.chosen_candidate = static_cast<int>(chosen);
  bootstrap_nodes(tree, scores, params.n_bootstrap, derive_seed(params.seed, kBootstrap),
                  cluster_codes);
  return tree;
}

DdrctTree stability_select(const Dataset& dataset, const CausalForest& forest,
                           const DrScoreSet& scores, const DdrctParams& params,
                           std::optional<bool> cluster_respecting) {
  CateEstimates teacher = predict_cate(forest, dataset);
  return stability_select(dataset, teacher, scores, params, cluster_respecting);
}

DdrctPipelineResult run_ddrct_pipeline(const Dataset& dataset, Contrast contrast,
                                       const ForestParams& forest_params,
                                       const DdrctParams& ddrct_params,
                                       const PipelineOptions& options) {
  bool cluster_respecting =
      options.cluster_respecting.value_or(dataset.cluster.has_value()) &&
      dataset.cluster.has_value();

  SplitPlan plan =
      make_split_plan(dataset, options.k_folds, derive_seed(options.seed, 1), cluster_respecting);

  ForestParams nuisance_params = options.nuisance_params.value_or(forest_params);
  nuisance_params.seed = derive_seed(options.seed, 2);
  NuisanceEstimates nuisance = crossfit_nuisances(dataset, plan, nuisance_params, options.clip);

  DrScoreSet scores = dr_scores(dataset, nuisance, contrast);
  const std::vector<int>* cluster_codes =
      cluster_respecting ? &*dataset.cluster : nullptr;
  AteEstimate ate = dr_ate(scores, cluster_codes);

  ForestParams cf_params = forest_params;
  cf_params.seed = derive_seed(options.seed, 3);
  CausalForest forest = fit_causal_forest(dataset, nuisance, contrast, cf_params);
  CateEstimates cate = predict_cate(forest, dataset);

  DdrctParams dd_params = ddrct_params;
  dd_params.seed = derive_seed(options.seed, 4);
  DdrctTree tree = stability_select(dataset, cate, scores, dd_params, cluster_respecting);

  return {std::move(tree), ate, std::move(cate)};
}

AuditResult audit_ddrct(const DdrctTree& tree) {
  // Halves must be disjoint.
  {
    auto it_a = tree.fit_half.begin();
    auto it_b = tree.estimate_half.begin();
    while (it_a != tree.fit_half.end() && it_b != tree.estimate_half.end()) {
      if (*it_a == *it_b) {
        return {false, "unit " + std::to_string(*it_a) + " in both halves"};
      }
      if (*it_a < *it_b) {
        ++it_a;
      } else {
        ++it_b;
      }
    }
  }
  std::vector<const DdrctNode*> stack{&tree.root};
  std::size_t leaf_n = 0;
  while (!stack.empty()) {
    const DdrctNode* node = stack.back();
    stack.pop_back();
    if (tree.params.max_depth > 0 && node->depth > tree.params.max_depth) {
      return {false, "node " + std::to_string(node->id) + " exceeds max depth"};
    }
    if (node->rule_path.size() != static_cast<std::size_t>(node->depth)) {
      return {false, "node " + std::to_string(node->id) + " rule path length != depth"};
    }
    if (node->is_leaf()) {
      leaf_n += node->n;
      continue;
    }
    const DdrctNode* l = node->left.get();
    const DdrctNode* r = node->right.get();
    if (node->n != l->n + r->n) {
      return {false, "node " + std::to_string(node->id) + " n != sum of child n"};
    }
    if (node->n > 0) {
      double weighted = (static_cast<double>(l->n) * (l->n > 0 ? l->estimate : 0.0) +
                         static_cast<double>(r->n) * (r->n > 0 ? r->estimate : 0.0)) /
                        static_cast<double>(node->n);
      if (std::abs(weighted - node->estimate) > 1e-10) {
        return {false, "node " + std::to_string(node->id) + " estimate != weighted child mean"};
      }
    }
    stack.push_back(l);
    stack.push_back(r);
  }
  if (leaf_n != tree.root.n) {
    return {false, "leaf n does not sum to root n"};
  }
  return {};
}

std::vector<double> predict_node_estimates(const DdrctTree& tree, const Matrix& x) {
  std::vector<double> out(x.rows(), kNaN);
  for (std::size_t row = 0; row < x.rows(); ++row) {
    const DdrctNode* node = &tree.root;
    while (!node->is_leaf()) {
      node = node_route_left(*node, x, row) ? node->left.get() : node->right.get();
    }
    out[row] = node->estimate;
  }
  return out;
}

}  // namespace hte
