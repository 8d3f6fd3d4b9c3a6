#include "hte/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hte/common.hpp"
#include "hte/scores.hpp"

namespace hte {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

int ForestParams::resolved_mtry(std::size_t p) const {
  if (mtry > 0) {
    return std::min<int>(mtry, static_cast<int>(p));
  }
  int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)) + 20.0));
  return std::min<int>(m, static_cast<int>(p));
}

void ForestParams::validate() const {
  if (n_trees < 1) {
    throw ConfigError("forest: n_trees must be >= 1");
  }
  if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
    throw ConfigError("forest: subsample_fraction must be in (0, 1]");
  }
  if (!(honesty_fraction > 0.0 && honesty_fraction < 1.0)) {
    throw ConfigError("forest: honesty_fraction must be in (0, 1)");
  }
  if (min_leaf < 1) {
    throw ConfigError("forest: min_leaf must be >= 1");
  }
  if (mtry < 0 || max_depth < 0) {
    throw ConfigError("forest: mtry and max_depth must be >= 0");
  }
}

int TreeNodes::add_node(int depth_of_node) {
  split_var.push_back(-1);
  threshold.push_back(0.0);
  missing_left.push_back(1);
  left.push_back(-1);
  right.push_back(-1);
  value.push_back(kNaN);
  n_value.push_back(0);
  depth.push_back(depth_of_node);
  return static_cast<int>(split_var.size()) - 1;
}

bool route_left(double value, double threshold, bool missing_left) {
  if (is_missing(value)) {
    return missing_left;
  }
  return value <= threshold;
}

int leaf_of(const TreeNodes& tree, const Matrix& x, std::size_t row) {
  int node = 0;
  while (!tree.is_leaf(node)) {
    double v = x(row, tree.split_var[node]);
    node = route_left(v, tree.threshold[node], tree.missing_left[node] != 0) ? tree.left[node]
                                                                             : tree.right[node];
  }
  return node;
}

double predict_tree(const TreeNodes& tree, const Matrix& x, std::size_t row) {
  return tree.value[leaf_of(tree, x, row)];
}

bool HonestTree::in_bag(uint32_t unit) const {
  return std::binary_search(split_units.begin(), split_units.end(), unit) ||
         std::binary_search(est_units.begin(), est_units.end(), unit);
}

SplitCandidate best_split(const Matrix& x, std::span<const uint32_t> units,
                          std::span<const double> response, const double* aux,
                          std::span<const int> vars, int min_leaf) {
  SplitCandidate best;
  std::size_t m = units.size();
  if (m < 2 * static_cast<std::size_t>(min_leaf)) {
    return best;
  }

  struct Entry {
    double value;
    double resp;
    double aux;
  };
  std::vector<Entry> present;
  present.reserve(m);

  for (int var : vars) {
    present.clear();
    std::size_t n_miss = 0;
    double miss_resp = 0.0;
    double miss_aux = 0.0;
    double total_resp = 0.0;
    double total_aux = 0.0;
    for (uint32_t u : units) {
      double v = x(u, var);
      double r = response[u];
      double a = aux ? aux[u] : 0.0;
      total_resp += r;
      total_aux += a;
      if (is_missing(v)) {
        ++n_miss;
        miss_resp += r;
        miss_aux += a;
      } else {
        present.push_back({v, r, a});
      }
    }
    if (present.size() < 2) {
      continue;
    }
    std::sort(present.begin(), present.end(),
              [](const Entry& a, const Entry& b) { return a.value < b.value; });

    double run_resp = 0.0;
    double run_aux = 0.0;
    std::size_t n_present = present.size();
    for (std::size_t k = 0; k + 1 < n_present; ++k) {
      run_resp += present[k].resp;
      run_aux += present[k].aux;
      if (present[k].value >= present[k + 1].value) {
        continue;
      }
      double thr = present[k].value + 0.5 * (present[k + 1].value - present[k].value);
      // Missing units go left first; if there are none the two directions
      // coincide and only the canonical left form is scored.
      int n_dirs = n_miss > 0 ? 2 : 1;
      for (int d = 0; d < n_dirs; ++d) {
        bool miss_left = d == 0;
        std::size_t n_l = k + 1 + (miss_left ? n_miss : 0);
        std::size_t n_r = m - n_l;
        if (n_l < static_cast<std::size_t>(min_leaf) || n_r < static_cast<std::size_t>(min_leaf)) {
          continue;
        }
        double sum_l = run_resp + (miss_left ? miss_resp : 0.0);
        double sum_r = total_resp - sum_l;
        if (aux) {
          double aux_l = run_aux + (miss_left ? miss_aux : 0.0);
          double aux_r = total_aux - aux_l;
          if (!(aux_l > 0.0) || !(aux_r > 0.0)) {
            continue;
          }
        }
        double diff = sum_l / static_cast<double>(n_l) - sum_r / static_cast<double>(n_r);
        double crit = static_cast<double>(n_l) * static_cast<double>(n_r) * diff * diff;
        if (crit > best.criterion) {
          best.var = var;
          best.threshold = thr;
          best.missing_left = miss_left;
          best.criterion = crit;
        }
      }
    }
  }
  return best;
}

bool causal_pseudo_outcomes(std::span<const uint32_t> units, std::span<const double> y_tilde,
                            std::span<const double> w_tilde, std::span<double> rho_out) {
  double sum_wy = 0.0;
  double sum_ww = 0.0;
  for (uint32_t u : units) {
    sum_wy += w_tilde[u] * y_tilde[u];
    sum_ww += w_tilde[u] * w_tilde[u];
  }
  if (!(sum_ww > 0.0)) {
    return false;
  }
  double beta = sum_wy / sum_ww;
  double denom = sum_ww / static_cast<double>(units.size());
  for (uint32_t u : units) {
    rho_out[u] = w_tilde[u] * (y_tilde[u] - w_tilde[u] * beta) / denom;
  }
  return true;
}

namespace {

struct GrowSpec {
  const Matrix& x;
  const double* response;       // regression responses, by row
  const double* y_tilde;        // causal residuals, by row
  const double* w_tilde;
  const double* aux_ww;         // w~^2, by row; doubles as the causal marker
  int min_leaf;
  int mtry;
  int max_depth;                // <= 0: unlimited
  bool causal() const { return aux_ww != nullptr; }
};

bool all_equal(std::span<const uint32_t> units, const double* values) {
  double first = values[units[0]];
  for (uint32_t u : units) {
    if (values[u] != first) {
      return false;
    }
  }
  return true;
}

// Samples `mtry` distinct column indices, ascending. When mtry == p no draw
// is made, so callers without randomness stay deterministic.
void sample_vars(std::size_t p, int mtry, std::mt19937_64& rng, std::vector<int>& pool,
                 std::vector<int>& out) {
  out.clear();
  if (static_cast<std::size_t>(mtry) >= p) {
    for (std::size_t v = 0; v < p; ++v) {
      out.push_back(static_cast<int>(v));
    }
    return;
  }
  pool.resize(p);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < mtry; ++i) {
    std::uniform_int_distribution<std::size_t> dist(i, p - 1);
    std::swap(pool[i], pool[dist(rng)]);
    out.push_back(pool[i]);
  }
  std::sort(out.begin(), out.end());
}

TreeNodes grow_structure(const GrowSpec& spec, std::vector<uint32_t>& units, std::mt19937_64& rng,
                         std::vector<double>& rho_scratch) {
  TreeNodes tree;
  struct Work {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
  };
  std::vector<Work> stack;
  stack.push_back({tree.add_node(0), 0, units.size(), 0});
  std::vector<int> var_pool;
  std::vector<int> vars;

  while (!stack.empty()) {
    Work w = stack.back();
    stack.pop_back();
    std::size_t m = w.end - w.begin;
    std::span<const uint32_t> node_units(units.data() + w.begin, m);

    bool can_split = m >= 2 * static_cast<std::size_t>(spec.min_leaf) &&
                     (spec.max_depth <= 0 || w.depth < spec.max_depth);
    const double* resp = spec.response;
    if (can_split && spec.causal()) {
      if (causal_pseudo_outcomes(node_units, {spec.y_tilde, spec.x.rows()},
                                 {spec.w_tilde, spec.x.rows()}, rho_scratch)) {
        resp = rho_scratch.data();
      } else {
        can_split = false;
      }
    }

    SplitCandidate split;
    if (can_split && !all_equal(node_units, resp)) {
      sample_vars(spec.x.cols(), spec.mtry, rng, var_pool, vars);
      split = best_split(spec.x, node_units, {resp, spec.x.rows()},
                         spec.causal() ? spec.aux_ww : nullptr, vars, spec.min_leaf);
    }
    if (!split.valid()) {
      continue;  // leaf
    }

    uint32_t* begin_ptr = units.data() + w.begin;
    uint32_t* end_ptr = units.data() + w.end;
    uint32_t* mid_ptr = std::partition(begin_ptr, end_ptr, [&](uint32_t u) {
      return route_left(spec.x(u, split.var), split.threshold, split.missing_left);
    });
    std::size_t mid = w.begin + static_cast<std::size_t>(mid_ptr - begin_ptr);

    tree.split_var[w.node] = split.var;
    tree.threshold[w.node] = split.threshold;
    tree.missing_left[w.node] = split.missing_left ? 1 : 0;
    int left = tree.add_node(w.depth + 1);
    int right = tree.add_node(w.depth + 1);
    tree.left[w.node] = left;
    tree.right[w.node] = right;
    stack.push_back({right, mid, w.end, w.depth + 1});
    stack.push_back({left, w.begin, mid, w.depth + 1});
  }
  return tree;
}

void set_leaf_values_regression(TreeNodes& tree, const Matrix& x, std::span<const uint32_t> units,
                                const double* y) {
  std::vector<double> sums(tree.size(), 0.0);
  std::vector<int32_t> counts(tree.size(), 0);
  for (uint32_t u : units) {
    int leaf = leaf_of(tree, x, u);
    sums[leaf] += y[u];
    ++counts[leaf];
  }
  for (std::size_t node = 0; node < tree.size(); ++node) {
    if (!tree.is_leaf(node)) {
      continue;
    }
    tree.n_value[node] = counts[node];
    tree.value[node] = counts[node] > 0 ? sums[node] / counts[node] : kNaN;
  }
}

void set_leaf_values_causal(TreeNodes& tree, const Matrix& x, std::span<const uint32_t> units,
                            const double* y_tilde, const double* w_tilde) {
  std::vector<double> sum_wy(tree.size(), 0.0);
  std::vector<double> sum_ww(tree.size(), 0.0);
  std::vector<int32_t> counts(tree.size(), 0);
  for (uint32_t u : units) {
    int leaf = leaf_of(tree, x, u);
    sum_wy[leaf] += w_tilde[u] * y_tilde[u];
    sum_ww[leaf] += w_tilde[u] * w_tilde[u];
    ++counts[leaf];
  }
  for (std::size_t node = 0; node < tree.size(); ++node) {
    if (!tree.is_leaf(node)) {
      continue;
    }
    tree.n_value[node] = counts[node];
    tree.value[node] = sum_ww[node] > 0.0 ? sum_wy[node] / sum_ww[node] : kNaN;
  }
}

struct SubsampleSizes {
  std::size_t subsample;
  std::size_t split_role;
  std::size_t est_role;
};

SubsampleSizes resolve_sizes(const ForestParams& params, std::size_t n_avail) {
  std::size_t m = static_cast<std::size_t>(std::llround(params.subsample_fraction * n_avail));
  m = std::clamp<std::size_t>(m, 2, n_avail);
  std::size_t split_m = static_cast<std::size_t>(std::llround(params.honesty_fraction * m));
  split_m = std::clamp<std::size_t>(split_m, 1, m - 1);
  return {m, split_m, m - split_m};
}

HonestTree grow_one_tree(const GrowSpec& spec, const ForestParams& params,
                         std::span<const uint32_t> train_units, uint64_t tree_seed) {
  std::mt19937_64 rng(tree_seed);
  std::size_t n_avail = train_units.size();
  SubsampleSizes sizes = resolve_sizes(params, n_avail);

  std::vector<uint32_t> pool(train_units.begin(), train_units.end());
  for (std::size_t i = 0; i < sizes.subsample; ++i) {
    std::uniform_int_distribution<std::size_t> dist(i, n_avail - 1);
    std::swap(pool[i], pool[dist(rng)]);
  }

  HonestTree tree;
  tree.split_units.assign(pool.begin(), pool.begin() + sizes.split_role);
  tree.est_units.assign(pool.begin() + sizes.split_role, pool.begin() + sizes.subsample);

  std::vector<uint32_t> grow_units = tree.split_units;
  std::vector<double> rho_scratch;
  if (spec.causal()) {
    rho_scratch.resize(spec.x.rows());
  }
  tree.nodes = grow_structure(spec, grow_units, rng, rho_scratch);

  if (spec.causal()) {
    set_leaf_values_causal(tree.nodes, spec.x, tree.est_units, spec.y_tilde, spec.w_tilde);
  } else {
    set_leaf_values_regression(tree.nodes, spec.x, tree.est_units, spec.response);
  }

  std::sort(tree.split_units.begin(), tree.split_units.end());
  std::sort(tree.est_units.begin(), tree.est_units.end());
  return tree;
}

std::vector<HonestTree> grow_forest(const GrowSpec& spec, const ForestParams& params,
                                    std::span<const uint32_t> train_units) {
  params.validate();
  std::size_t n_avail = train_units.size();
  if (n_avail < 2 * static_cast<std::size_t>(params.min_leaf)) {
    throw DataError("forest: need at least 2*min_leaf training units, have " +
                    std::to_string(n_avail));
  }
  SubsampleSizes sizes = resolve_sizes(params, n_avail);
  if (sizes.split_role < static_cast<std::size_t>(params.min_leaf) ||
      sizes.est_role < static_cast<std::size_t>(params.min_leaf)) {
    throw ConfigError("forest: honesty split leaves fewer than min_leaf units in a role");
  }
  std::vector<HonestTree> trees(params.n_trees);
  parallel_for(static_cast<std::size_t>(params.n_trees), 0, [&](std::size_t t) {
    trees[t] = grow_one_tree(spec, params, train_units, derive_seed(params.seed, 0x7265ULL, t));
  });
  return trees;
}

std::vector<uint32_t> all_rows(std::size_t n) {
  std::vector<uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

RegressionForest fit_regression_forest(const Matrix& x, std::span<const double> y,
                                       const ForestParams& params,
                                       std::span<const uint32_t> units) {
  if (y.size() != x.rows()) {
    throw DataError("forest: response length != rows");
  }
  std::vector<uint32_t> default_units;
  if (units.empty()) {
    default_units = all_rows(x.rows());
    units = default_units;
  }
  GrowSpec spec{x,       y.data(),          nullptr, nullptr,
                nullptr, params.min_leaf,   params.resolved_mtry(x.cols()),
                params.max_depth};
  RegressionForest forest;
  forest.params = params;
  forest.n_rows = x.rows();
  forest.n_cols = x.cols();
  forest.trees = grow_forest(spec, params, units);
  return forest;
}

namespace {

template <typename Forest>
double predict_row(const Forest& forest, const Matrix& x, std::size_t row) {
  double sum = 0.0;
  int count = 0;
  for (const auto& tree : forest.trees) {
    double v = predict_tree(tree.nodes, x, row);
    if (!is_missing(v)) {
      sum += v;
      ++count;
    }
  }
  return count > 0 ? sum / count : kNaN;
}

}  // namespace

std::vector<double> predict(const RegressionForest& forest, const Matrix& x,
                            std::span<const uint32_t> rows) {
  std::vector<double> out(rows.size(), kNaN);
  parallel_for(rows.size(), 0, [&](std::size_t i) { out[i] = predict_row(forest, x, rows[i]); });
  return out;
}

std::vector<double> predict(const RegressionForest& forest, const Matrix& x) {
  auto rows = all_rows(x.rows());
  return predict(forest, x, rows);
}

OobPredictions predict_oob(const RegressionForest& forest, const Matrix& x) {
  OobPredictions out;
  out.values.assign(x.rows(), kNaN);
  out.n_oob_trees.assign(x.rows(), 0);
  parallel_for(x.rows(), 0, [&](std::size_t row) {
    double sum = 0.0;
    int count = 0;
    for (const auto& tree : forest.trees) {
      if (tree.in_bag(static_cast<uint32_t>(row))) {
        continue;
      }
      double v = predict_tree(tree.nodes, x, row);
      if (!is_missing(v)) {
        sum += v;
        ++count;
      }
    }
    out.n_oob_trees[row] = count;
    if (count > 0) {
      out.values[row] = sum / count;
    }
  });
  return out;
}

CausalForest fit_causal_forest(const Dataset& dataset, const NuisanceEstimates& nuisance,
                               Contrast contrast, const ForestParams& params) {
  std::size_t n = dataset.n_rows();
  int k = dataset.n_arms();
  if (contrast.target == contrast.baseline) {
    throw ConfigError("causal forest: contrast arms must differ");
  }
  if (contrast.target < 0 || contrast.target >= k || contrast.baseline < 0 ||
      contrast.baseline >= k) {
    throw ConfigError("causal forest: contrast arm out of range");
  }
  if (nuisance.propensity.rows() != n || nuisance.mu.rows() != n) {
    throw DataError("causal forest: nuisance dimensions do not match dataset");
  }

  CausalForest forest;
  forest.params = params;
  forest.n_rows = n;
  forest.n_cols = dataset.covariates.cols();
  forest.contrast = contrast;

  // Residualize: y~ = y - sum_k e_k mu_k, w~ = 1{W=t} - e_t.
  std::vector<double> y_tilde(n), w_tilde(n), aux_ww(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m_hat = 0.0;
    for (int a = 0; a < k; ++a) {
      m_hat += nuisance.propensity(i, a) * nuisance.mu(i, a);
    }
    y_tilde[i] = dataset.outcome[i] - m_hat;
    w_tilde[i] = (dataset.treatment[i] == contrast.target ? 1.0 : 0.0) -
                 nuisance.propensity(i, contrast.target);
    aux_ww[i] = w_tilde[i] * w_tilde[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dataset.treatment[i] == contrast.target || dataset.treatment[i] == contrast.baseline) {
      forest.train_units.push_back(static_cast<uint32_t>(i));
    }
  }

  GrowSpec spec{dataset.covariates,
                nullptr,
                y_tilde.data(),
                w_tilde.data(),
                aux_ww.data(),
                params.min_leaf,
                params.resolved_mtry(dataset.covariates.cols()),
                params.max_depth};
  forest.trees = grow_forest(spec, params, forest.train_units);
  return forest;
}

CateEstimates predict_cate(const CausalForest& forest, const Dataset& dataset) {
  const Matrix& x = dataset.covariates;
  if (x.cols() != forest.n_cols) {
    throw DataError("predict_cate: column count mismatch");
  }
  CateEstimates out;
  out.tau_hat.assign(x.rows(), kNaN);
  out.n_oob_trees.assign(x.rows(), 0);
  parallel_for(x.rows(), 0, [&](std::size_t row) {
    double sum = 0.0;
    int count = 0;
    for (const auto& tree : forest.trees) {
      if (tree.in_bag(static_cast<uint32_t>(row))) {
        continue;
      }
      double v = predict_tree(tree.nodes, x, row);
      if (!is_missing(v)) {
        sum += v;
        ++count;
      }
    }
    out.n_oob_trees[row] = count;
    if (count > 0) {
      out.tau_hat[row] = sum / count;
    }
  });
  return out;
}

std::vector<std::pair<int, double>> variable_importance(std::span<const HonestTree> trees,
                                                        std::size_t n_cols) {
  std::vector<double> weights(n_cols, 0.0);
  double total = 0.0;
  for (const auto& tree : trees) {
    for (std::size_t node = 0; node < tree.nodes.size(); ++node) {
      if (tree.nodes.is_leaf(node)) {
        continue;
      }
      double w = std::pow(0.5, tree.nodes.depth[node]);
      weights[tree.nodes.split_var[node]] += w;
      total += w;
    }
  }
  if (total > 0.0) {
    for (double& w : weights) {
      w /= total;
    }
  }
  std::vector<std::pair<int, double>> ranked;
  ranked.reserve(n_cols);
  for (std::size_t v = 0; v < n_cols; ++v) {
    ranked.emplace_back(static_cast<int>(v), weights[v]);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) {
      return a.second > b.second;
    }
    return a.first < b.first;
  });
  return ranked;
}

std::vector<std::pair<int, double>> variable_importance(const RegressionForest& forest) {
  return variable_importance(forest.trees, forest.n_cols);
}

std::vector<std::pair<int, double>> variable_importance(const CausalForest& forest) {
  return variable_importance(forest.trees, forest.n_cols);
}

TreeNodes build_cart_tree(const Matrix& x, std::span<const double> response,
                          std::span<const uint32_t> units, int min_leaf, int max_depth) {
  if (response.size() != x.rows()) {
    throw DataError("cart: response length != rows");
  }
  if (units.size() < 2 * static_cast<std::size_t>(min_leaf)) {
    throw DataError("cart: need at least 2*min_leaf units");
  }
  GrowSpec spec{x,       response.data(),              nullptr, nullptr,
                nullptr, min_leaf,                     static_cast<int>(x.cols()),
                max_depth};
  std::vector<uint32_t> grow_units(units.begin(), units.end());
  std::mt19937_64 rng(0);  // unused: all columns are considered
  std::vector<double> rho_unused;
  TreeNodes tree = grow_structure(spec, grow_units, rng, rho_unused);
  set_leaf_values_regression(tree, x, units, response.data());
  return tree;
}

AuditResult audit_honesty(std::span<const HonestTree> trees) {
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& tree = trees[t];
    auto it_a = tree.split_units.begin();
    auto it_b = tree.est_units.begin();
    while (it_a != tree.split_units.end() && it_b != tree.est_units.end()) {
      if (*it_a == *it_b) {
        return {false, "tree " + std::to_string(t) + ": unit " + std::to_string(*it_a) +
                           " appears in both roles"};
      }
      if (*it_a < *it_b) {
        ++it_a;
      } else {
        ++it_b;
      }
    }
  }
  return {};
}

AuditResult audit_routing(std::span<const HonestTree> trees, const Matrix& x) {
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const TreeNodes& tree = trees[t].nodes;
    for (std::size_t row = 0; row < x.rows(); ++row) {
      int node = 0;
      std::size_t steps = 0;
      while (!tree.is_leaf(node)) {
        if (++steps > tree.size()) {
          return {false, "tree " + std::to_string(t) + ": routing cycle at row " +
                             std::to_string(row)};
        }
        double v = x(row, tree.split_var[node]);
        int next = route_left(v, tree.threshold[node], tree.missing_left[node] != 0)
                       ? tree.left[node]
                       : tree.right[node];
        if (next < 0 || next >= static_cast<int>(tree.size())) {
          return {false, "tree " + std::to_string(t) + ": dangling child"};
        }
        node = next;
      }
    }
  }
  return {};
}

std::string forest_summary_csv(std::span<const HonestTree> trees) {
  std::ostringstream out;
  out << "tree,n_nodes,n_leaves,max_depth\n";
  std::vector<std::size_t> leaf_depth_counts;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const TreeNodes& tree = trees[t].nodes;
    std::size_t leaves = 0;
    int max_depth = 0;
    for (std::size_t node = 0; node < tree.size(); ++node) {
      max_depth = std::max(max_depth, tree.depth[node]);
      if (tree.is_leaf(node)) {
        ++leaves;
        if (leaf_depth_counts.size() <= static_cast<std::size_t>(tree.depth[node])) {
          leaf_depth_counts.resize(tree.depth[node] + 1, 0);
        }
        ++leaf_depth_counts[tree.depth[node]];
      }
    }
    out << t << ',' << tree.size() << ',' << leaves << ',' << max_depth << '\n';
  }
  out << "# leaf_depth,count\n";
  for (std::size_t d = 0; d < leaf_depth_counts.size(); ++d) {
    out << d << ',' << leaf_depth_counts[d] << '\n';
  }
  return out.str();
}

std::string importance_csv(const std::vector<std::pair<int, double>>& importance,
                           std::span<const std::string> column_names) {
  std::ostringstream out;
  out << "column,name,weight\n";
  for (const auto& [col, weight] : importance) {
    out << col << ',';
    if (static_cast<std::size_t>(col) < column_names.size()) {
      out << column_names[col];
    }
    out << ',' << format_double(weight) << '\n';
  }
  return out.str();
}

}  // namespace hte
