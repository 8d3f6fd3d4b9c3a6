#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "hte/common.hpp"
#include "hte/ddrct.hpp"
#include "hte/synthetic.hpp"

using namespace hte;

namespace {

DdrctParams lean_ddrct(int candidates, int bootstrap, uint64_t seed) {
  DdrctParams params;
  params.n_candidates = candidates;
  params.n_bootstrap = bootstrap;
  params.seed = seed;
  return params;
}

// Scores where every unit carries a fixed value; node estimates must then be
// that value with zero spread.
DrScoreSet constant_scores(std::size_t n, double value) {
  DrScoreSet scores;
  scores.contrast = {1, 0};
  scores.gamma.assign(n, value);
  return scores;
}

TreeNodes single_root_structure() {
  TreeNodes tree;
  tree.add_node(0);
  return tree;
}

}  // namespace

TEST_CASE("shipped defaults") {
  DdrctParams defaults;
  CHECK(defaults.max_depth == 3);
  CHECK(defaults.n_candidates == 1000);
  CHECK(defaults.candidate_subsample == doctest::Approx(0.5));
  CHECK(defaults.n_bootstrap == 2000);
  CHECK(defaults.alpha == doctest::Approx(0.05));
}

TEST_CASE("distill: constant teacher collapses to the root") {
  auto x = testutil::random_matrix(100, 3, 1);
  std::vector<double> teacher(100, 0.42);
  auto units = testutil::iota_units(100);
  TreeNodes tree = distill_tree(x, units, teacher, lean_ddrct(1, 2, 2));
  CHECK(tree.size() == 1);
  CHECK(tree.is_leaf(0));
}

TEST_CASE("distill: exact step teacher splits on the signal column at a separating midpoint") {
  const std::size_t n = 200;
  auto x = testutil::random_matrix(n, 4, 3);
  std::vector<double> teacher(n);
  double below = -2.0, above = 2.0;  // closest observed values around 0
  for (std::size_t i = 0; i < n; ++i) {
    teacher[i] = x(i, 0) > 0.0 ? 1.0 : 0.0;
    if (x(i, 0) > 0.0) {
      above = std::min(above, x(i, 0));
    } else {
      below = std::max(below, x(i, 0));
    }
  }
  auto units = testutil::iota_units(n);
  DdrctParams params = lean_ddrct(1, 2, 4);
  params.max_depth = 1;
  TreeNodes tree = distill_tree(x, units, teacher, params);
  REQUIRE(tree.size() == 3);
  CHECK(tree.split_var[0] == 0);
  CHECK(tree.threshold[0] == doctest::Approx(below + 0.5 * (above - below)));

  // Exhaustive oracle agrees.
  testutil::OracleSplit want = testutil::brute_force_split(x, units, teacher, nullptr, 5);
  CHECK(tree.split_var[0] == want.var);
  CHECK(tree.threshold[0] == doctest::Approx(want.threshold));

  std::vector<double> with_missing = teacher;
  CHECK_THROWS_AS(
      [&] {
        with_missing[3] = std::numeric_limits<double>::quiet_NaN();
        return distill_tree(x, units, with_missing, params);
      }(),
      NumericError);
}

TEST_CASE("estimate_nodes: constant scores, exact accounting") {
  const std::size_t n = 300;
  auto x = testutil::random_matrix(n, 3, 5);
  std::vector<double> teacher(n);
  for (std::size_t i = 0; i < n; ++i) {
    teacher[i] = (x(i, 0) > 0.0 ? 1.0 : 0.0) + (x(i, 1) > 0.3 ? 0.5 : 0.0);
  }
  std::vector<uint32_t> fit_half, est_half;
  for (uint32_t i = 0; i < n; ++i) {
    (i % 2 == 0 ? fit_half : est_half).push_back(i);
  }
  DdrctParams params = lean_ddrct(1, 2, 6);
  TreeNodes structure = distill_tree(x, fit_half, teacher, params);
  DrScoreSet scores = constant_scores(n, 0.31);
  std::vector<std::string> names{"a", "b", "c"};
  DdrctTree tree = estimate_nodes(structure, x, scores, fit_half, est_half, params, names);

  CHECK(tree.root.n == est_half.size());
  std::vector<const DdrctNode*> stack{&tree.root};
  while (!stack.empty()) {
    const DdrctNode* node = stack.back();
    stack.pop_back();
    if (node->n > 0) {
      CHECK(node->estimate == doctest::Approx(0.31));
    }
    if (!node->is_leaf()) {
      stack.push_back(node->left.get());
      stack.push_back(node->right.get());
    }
  }
  CHECK(audit_ddrct(tree).ok);
}

TEST_CASE("estimate_nodes: empty node is flagged, parent mean is the weighted child mean") {
  // Hand-built depth-1 structure on one column; estimation units all route
  // left, so the right child is empty and flagged.
  TreeNodes structure;
  structure.add_node(0);
  structure.add_node(1);
  structure.add_node(1);
  structure.split_var[0] = 0;
  structure.threshold[0] = 0.0;
  structure.missing_left[0] = 1;
  structure.left[0] = 1;
  structure.right[0] = 2;

  Matrix x(6, 1, -1.0);  // every unit routes left
  DrScoreSet scores;
  scores.contrast = {1, 0};
  scores.gamma = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  std::vector<uint32_t> fit{0, 1};
  std::vector<uint32_t> est{2, 3, 4, 5};
  std::vector<std::string> names{"x1"};
  DdrctTree tree = estimate_nodes(structure, x, scores, fit, est, lean_ddrct(1, 2, 7), names);
  CHECK(tree.root.n == 4);
  CHECK(tree.root.estimate == doctest::Approx(4.5));
  CHECK(tree.root.left->n == 4);
  CHECK(tree.root.left->estimate == doctest::Approx(4.5));
  CHECK(tree.root.right->n == 0);
  CHECK(tree.root.right->flagged_empty);
  CHECK(audit_ddrct(tree).ok);

  // The weighted-mean identity is exact, not approximate.
  double weighted = (static_cast<double>(tree.root.left->n) * tree.root.left->estimate) /
                    static_cast<double>(tree.root.n);
  CHECK(std::abs(weighted - tree.root.estimate) <= 1e-10);
}

TEST_CASE("bootstrap: degenerate scores give zero-width intervals") {
  const std::size_t n = 80;
  Matrix x(n, 1, 0.5);
  DrScoreSet scores = constant_scores(n, 2.5);
  std::vector<uint32_t> fit, est;
  for (uint32_t i = 0; i < n; ++i) {
    (i < n / 2 ? fit : est).push_back(i);
  }
  DdrctTree tree = estimate_nodes(single_root_structure(), x, scores, fit, est,
                                  lean_ddrct(1, 500, 8), std::vector<std::string>{"x1"});
  bootstrap_nodes(tree, scores, 500, 9);
  CHECK(tree.root.se == doctest::Approx(0.0));
  CHECK(tree.root.ci_lo == doctest::Approx(2.5));
  CHECK(tree.root.ci_hi == doctest::Approx(2.5));
  CHECK(tree.root.significant);  // interval {2.5} excludes zero
  CHECK(tree.root.bootstrap_skipped == 0);
}

TEST_CASE("bootstrap: iid normal scores match the analytic standard error") {
  const std::size_t n = 1000;
  const std::size_t est_n = 500;
  Matrix x(n, 1, 0.0);
  DrScoreSet scores;
  scores.contrast = {1, 0};
  scores.gamma.resize(n);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& g : scores.gamma) {
    g = dist(rng);
  }
  std::vector<uint32_t> fit, est;
  for (uint32_t i = 0; i < n; ++i) {
    (i < n - est_n ? fit : est).push_back(i);
  }
  DdrctParams params = lean_ddrct(1, 2000, 11);
  DdrctTree tree = estimate_nodes(single_root_structure(), x, scores, fit, est, params,
                                  std::vector<std::string>{"x1"});
  bootstrap_nodes(tree, scores, 2000, 12);
  // Analytic oracle: sd of the estimation-half scores over sqrt(n).
  std::vector<double> est_scores;
  for (uint32_t u : tree.estimate_half) {
    est_scores.push_back(scores.gamma[u]);
  }
  double expected = sample_sd(est_scores) / std::sqrt(static_cast<double>(est_n));
  CHECK(std::abs(tree.root.se - expected) <= 0.15 * expected);
  CHECK(tree.root.ci_lo < tree.root.ci_hi);
}

TEST_CASE("bootstrap: fixed structure, cluster draws, skip accounting") {
  const std::size_t n = 120;
  auto x = testutil::random_matrix(n, 2, 13);
  std::vector<double> teacher(n);
  for (std::size_t i = 0; i < n; ++i) {
    teacher[i] = x(i, 0) > 0.0 ? 1.0 : 0.0;
  }
  std::vector<uint32_t> fit, est;
  for (uint32_t i = 0; i < n; ++i) {
    (i % 2 == 0 ? fit : est).push_back(i);
  }
  DdrctParams params = lean_ddrct(1, 200, 14);
  params.max_depth = 2;
  TreeNodes structure = distill_tree(x, fit, teacher, params);
  std::mt19937_64 rng(15);
  std::normal_distribution<double> dist(0.0, 1.0);
  DrScoreSet scores;
  scores.contrast = {1, 0};
  scores.gamma.resize(n);
  for (double& g : scores.gamma) {
    g = dist(rng);
  }
  std::vector<std::string> names{"a", "b"};
  DdrctTree tree = estimate_nodes(structure, x, scores, fit, est, params, names);
  std::string topology_before = tree.topology_string();

  std::vector<int> clusters(n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i] = static_cast<int>(i / 10);
  }
  bootstrap_nodes(tree, scores, 200, 16, &clusters);
  CHECK(tree.topology_string() == topology_before);
  CHECK(tree.root.bootstrap_skipped == 0);
  CHECK(tree.root.se > 0.0);

  CHECK_THROWS_AS(bootstrap_nodes(tree, scores, 1, 17), ConfigError);
}

TEST_CASE("stability selection") {
  DgpSpec spec;
  spec.n = 1200;
  spec.p = 5;
  spec.cate = {CateFn{CateFn::Kind::kStep, 0.8, 0, 0.0}};
  spec.baseline.kind = BaselineFn::Kind::kZero;
  spec.noise_sd = 0.5;
  spec.seed = 18;
  SyntheticTruth truth = generate(spec);
  Matrix mu(spec.n, 2);
  for (std::size_t i = 0; i < spec.n; ++i) {
    mu(i, 0) = 0.0;
    mu(i, 1) = truth.true_cate(i, 0);
  }
  NuisanceEstimates nuisance = testutil::oracle_nuisances(spec.n, 2, {0.5, 0.5}, mu);
  DrScoreSet scores = dr_scores(truth.dataset, nuisance, {1, 0});
  ForestParams forest_params;
  forest_params.n_trees = 200;
  forest_params.min_leaf = 10;
  forest_params.seed = 19;
  CausalForest forest = fit_causal_forest(truth.dataset, nuisance, {1, 0}, forest_params);

  SUBCASE("single candidate is returned regardless of loss") {
    DdrctTree tree = stability_select(truth.dataset, forest, scores, lean_ddrct(1, 50, 20));
    CHECK(tree.chosen_candidate == 0);
    CHECK(tree.candidate_losses.size() == 1);
    CHECK(audit_ddrct(tree).ok);
  }

  SUBCASE("the lower-loss candidate wins and the argmin is reproducible") {
    DdrctParams params = lean_ddrct(16, 50, 21);
    DdrctTree tree = stability_select(truth.dataset, forest, scores, params);
    REQUIRE(tree.candidate_losses.size() == 16);
    std::size_t argmin = 0;
    for (std::size_t c = 1; c < 16; ++c) {
      if (tree.candidate_losses[c] < tree.candidate_losses[argmin]) {
        argmin = c;
      }
    }
    CHECK(tree.chosen_candidate == static_cast<int>(argmin));
    // Rerunning reproduces the same selection and the same losses.
    DdrctTree again = stability_select(truth.dataset, forest, scores, params);
    CHECK(again.chosen_candidate == tree.chosen_candidate);
    CHECK(again.candidate_losses == tree.candidate_losses);
    CHECK(again.topology_string() == tree.topology_string());

    // The selected tree recovers the step: root split on x1 near 0.
    CHECK(tree.root.split_var == 0);
    CHECK(std::abs(tree.root.threshold) < 0.2);
  }

  SUBCASE("halves are disjoint and depth is bounded") {
    DdrctParams params = lean_ddrct(8, 50, 22);
    DdrctTree tree = stability_select(truth.dataset, forest, scores, params);
    CHECK(audit_ddrct(tree).ok);
    std::vector<const DdrctNode*> stack{&tree.root};
    while (!stack.empty()) {
      const DdrctNode* node = stack.back();
      stack.pop_back();
      CHECK(node->depth <= params.max_depth);
      if (!node->is_leaf()) {
        stack.push_back(node->left.get());
        stack.push_back(node->right.get());
      }
    }
    // Estimation sample is about a quarter of the data under the default
    // candidate subsample of one half.
    double share = static_cast<double>(tree.root.n) / static_cast<double>(spec.n);
    CHECK(share > 0.15);
    CHECK(share < 0.35);
  }
}

TEST_CASE("full pipeline on a synthetic step effect") {
  DgpSpec spec;
  spec.n = 900;
  spec.p = 4;
  spec.cate = {CateFn{CateFn::Kind::kStep, 1.0, 0, 0.0}};
  spec.noise_sd = 0.4;
  spec.seed = 23;
  SyntheticTruth truth = generate(spec);

  ForestParams forest_params;
  forest_params.n_trees = 150;
  forest_params.min_leaf = 10;
  ForestParams nuisance_params = forest_params;
  nuisance_params.n_trees = 60;
  nuisance_params.min_leaf = 25;
  DdrctParams ddrct_params = lean_ddrct(30, 200, 0);

  PipelineOptions options;
  options.seed = 24;
  options.nuisance_params = nuisance_params;
  DdrctPipelineResult result =
      run_ddrct_pipeline(truth.dataset, {1, 0}, forest_params, ddrct_params, options);

  CHECK(audit_ddrct(result.tree).ok);
  CHECK(std::abs(result.ate.estimate - truth.true_ate[0]) <= 4.0 * result.ate.se);
  CHECK(result.cate.tau_hat.size() == spec.n);
  CHECK(result.tree.root.split_var == 0);

  // Tree predictions separate the two effect groups.
  std::vector<double> preds = predict_node_estimates(result.tree, truth.dataset.covariates);
  double mean_high = 0.0, mean_low = 0.0;
  std::size_t n_high = 0, n_low = 0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (truth.true_cate(i, 0) > 0.5) {
      mean_high += preds[i];
      ++n_high;
    } else {
      mean_low += preds[i];
      ++n_low;
    }
  }
  CHECK(mean_high / static_cast<double>(n_high) > mean_low / static_cast<double>(n_low));
}

TEST_CASE("pipeline respects clusters end to end") {
  DgpSpec spec;
  spec.n = 800;
  spec.p = 3;
  spec.cate = {CateFn{CateFn::Kind::kConstant, 0.5, 0, 0.0}};
  spec.cluster_count = 40;
  spec.noise_sd = 0.5;
  spec.seed = 25;
  SyntheticTruth truth = generate(spec);

  ForestParams forest_params;
  forest_params.n_trees = 100;
  forest_params.min_leaf = 10;
  ForestParams nuisance_params = forest_params;
  nuisance_params.n_trees = 50;
  nuisance_params.min_leaf = 25;
  PipelineOptions options;
  options.seed = 26;
  options.nuisance_params = nuisance_params;
  DdrctPipelineResult result =
      run_ddrct_pipeline(truth.dataset, {1, 0}, forest_params, lean_ddrct(10, 100, 0), options);
  CHECK(audit_ddrct(result.tree).ok);
  CHECK(std::abs(result.ate.estimate - 0.5) <= 4.0 * result.ate.se);

  // The selected candidate's halves respect cluster boundaries.
  const auto& cluster = *truth.dataset.cluster;
  std::vector<int> half_of_cluster(40, -1);
  for (uint32_t u : result.tree.fit_half) {
    half_of_cluster[cluster[u]] = 0;
  }
  for (uint32_t u : result.tree.estimate_half) {
    CHECK(half_of_cluster[cluster[u]] != 0);
  }
}
