#include "hte/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hte/common.hpp"
#include "hte/csv.hpp"

namespace hte {

int Dataset::n_arms() const {
  int max_arm = -1;
  for (int w : treatment) {
    max_arm = std::max(max_arm, w);
  }
  return max_arm + 1;
}

void Dataset::validate() const {
  std::size_t n = n_rows();
  if (treatment.size() != n) {
    throw DataError("dataset: treatment length " + std::to_string(treatment.size()) +
                    " != n_rows " + std::to_string(n));
  }
  if (covariates.rows() != n) {
    throw DataError("dataset: covariate rows != n_rows");
  }
  if (column_names.size() != covariates.cols()) {
    throw DataError("dataset: column name count != covariate columns");
  }
  if (cluster) {
    if (cluster->size() != n) {
      throw DataError("dataset: cluster length != n_rows");
    }
    for (int c : *cluster) {
      if (c < 0 || c >= n_clusters()) {
        throw DataError("dataset: cluster code out of range");
      }
    }
  }
  for (double y : outcome) {
    if (std::isnan(y)) {
      throw DataError("dataset: outcome contains missing values");
    }
  }
  int k = n_arms();
  if (k < 2) {
    throw DataError("dataset: fewer than 2 treatment arms");
  }
  std::vector<std::size_t> arm_counts(k, 0);
  for (int w : treatment) {
    if (w < 0 || w >= k) {
      throw DataError("dataset: treatment arm out of range");
    }
    ++arm_counts[w];
  }
  for (int a = 0; a < k; ++a) {
    if (arm_counts[a] == 0) {
      throw DataError("dataset: arm " + std::to_string(a) + " has no units");
    }
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : column_names) {
    if (name.empty()) {
      throw DataError("dataset: empty covariate name");
    }
    if (!seen.insert(name).second) {
      throw DataError("dataset: duplicate covariate name: " + name);
    }
  }
}

std::vector<uint32_t> SplitPlan::fold_units(int fold) const {
  std::vector<uint32_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) {
      out.push_back(static_cast<uint32_t>(i));
    }
  }
  return out;
}

std::vector<uint32_t> SplitPlan::complement_units(int fold) const {
  std::vector<uint32_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) {
      out.push_back(static_cast<uint32_t>(i));
    }
  }
  return out;
}

std::vector<uint32_t> SplitPlan::half_units(Half half) const {
  std::vector<uint32_t> out;
  for (std::size_t i = 0; i < half_of.size(); ++i) {
    if (half_of[i] == half) {
      out.push_back(static_cast<uint32_t>(i));
    }
  }
  return out;
}

namespace {

// Greedy balanced assignment of whole clusters to bins; cluster order is
// pre-shuffled so ties between equal-size clusters are randomized.
std::vector<int> greedy_cluster_bins(const std::vector<std::size_t>& cluster_sizes, int n_bins,
                                     std::mt19937_64& rng) {
  std::size_t n_clusters = cluster_sizes.size();
  std::vector<int> order(n_clusters);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return cluster_sizes[a] > cluster_sizes[b]; });
  std::vector<std::size_t> bin_load(n_bins, 0);
  std::vector<int> bin_of(n_clusters, -1);
  for (int c : order) {
    int best = 0;
    for (int b = 1; b < n_bins; ++b) {
      if (bin_load[b] < bin_load[best]) {
        best = b;
      }
    }
    bin_of[c] = best;
    bin_load[best] += cluster_sizes[c];
  }
  return bin_of;
}

}  // namespace

SplitPlan make_split_plan(const Dataset& dataset, int k_folds, uint64_t seed,
                          bool cluster_respecting) {
  if (k_folds < 2) {
    throw ConfigError("split plan: k_folds must be >= 2");
  }
  std::size_t n = dataset.n_rows();
  if (n < 2 * static_cast<std::size_t>(k_folds)) {
    throw DataError("split plan: need at least 2*k_folds rows");
  }

  SplitPlan plan;
  plan.k_folds = k_folds;
  plan.seed = seed;
  plan.fold_of.assign(n, -1);
  plan.half_of.assign(n, Half::kFit);

  bool clustered = cluster_respecting && dataset.cluster.has_value();
  if (clustered) {
    int n_clusters = dataset.n_clusters();
    if (n_clusters < k_folds) {
      throw DataError("split plan: fewer clusters than folds");
    }
    std::vector<std::size_t> sizes(n_clusters, 0);
    for (int c : *dataset.cluster) {
      ++sizes[c];
    }
    std::mt19937_64 fold_rng(derive_seed(seed, 1));
    std::vector<int> fold_bin = greedy_cluster_bins(sizes, k_folds, fold_rng);
    std::mt19937_64 half_rng(derive_seed(seed, 2));
    std::vector<int> half_bin = greedy_cluster_bins(sizes, 2, half_rng);
    for (std::size_t i = 0; i < n; ++i) {
      int c = (*dataset.cluster)[i];
      plan.fold_of[i] = fold_bin[c];
      plan.half_of[i] = half_bin[c] == 0 ? Half::kFit : Half::kEstimate;
    }
  } else {
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 fold_rng(derive_seed(seed, 1));
    std::shuffle(order.begin(), order.end(), fold_rng);
    for (std::size_t i = 0; i < n; ++i) {
      plan.fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k_folds));
    }
    std::mt19937_64 half_rng(derive_seed(seed, 2));
    std::shuffle(order.begin(), order.end(), half_rng);
    std::size_t fit_count = (n + 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      plan.half_of[order[i]] = i < fit_count ? Half::kFit : Half::kEstimate;
    }
  }

  // Every fold must be populated, whatever the cluster layout did.
  std::vector<std::size_t> fold_counts(k_folds, 0);
  for (int f : plan.fold_of) {
    ++fold_counts[f];
  }
  for (int f = 0; f < k_folds; ++f) {
    if (fold_counts[f] == 0) {
      throw DataError("split plan: fold " + std::to_string(f) + " is empty");
    }
  }
  return plan;
}

std::vector<double> build_maths_index(const std::array<std::vector<CategoryScore>, 4>& categories) {
  std::size_t n = categories[0].size();
  for (const auto& cat : categories) {
    if (cat.size() != n) {
      throw DataError("maths index: category lengths differ");
    }
  }
  std::vector<double> index(n, 0.0);
  for (const auto& cat : categories) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = cat[i];
      if (s.max <= 0.0) {
        throw DataError("maths index: max points must be positive");
      }
      if (s.earned < 0.0) {
        throw DataError("maths index: negative points earned");
      }
      if (s.earned > s.max) {
        throw DataError("maths index: earned exceeds max");
      }
      index[i] += s.earned / s.max;
    }
  }
  return index;
}

namespace {

int find_column(const csv::Table& table, const std::string& name) {
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == name) {
      return static_cast<int>(c);
    }
  }
  return -1;
}

int require_column(const csv::Table& table, const std::string& name, const char* role) {
  int c = find_column(table, name);
  if (c < 0) {
    throw DataError(std::string("load: ") + role + " column not found: " + name);
  }
  return c;
}

}  // namespace

LoadedTable load_table_from_text(const std::string& text, const Schema& schema) {
  csv::Table table = csv::parse(text);
  LoadedTable out;
  LoadReport& report = out.report;

  int treatment_col = require_column(table, schema.treatment_column, "treatment");
  int cluster_col = -1;
  if (schema.cluster_column) {
    cluster_col = require_column(table, *schema.cluster_column, "cluster");
  }

  int outcome_col = -1;
  std::array<int, 4> mi_earned{};
  std::array<int, 4> mi_max{};
  bool use_maths_index = schema.maths_index.has_value();
  if (use_maths_index) {
    for (int c = 0; c < 4; ++c) {
      mi_earned[c] = require_column(table, schema.maths_index->earned[c], "maths-index earned");
      mi_max[c] = schema.maths_index->max_column[c].empty()
                      ? -1
                      : require_column(table, schema.maths_index->max_column[c], "maths-index max");
    }
  } else {
    outcome_col = require_column(table, schema.outcome_column, "outcome");
  }

  // Role columns never become covariates.
  std::set<int> role_columns{treatment_col};
  if (cluster_col >= 0) {
    role_columns.insert(cluster_col);
  }
  if (use_maths_index) {
    for (int c = 0; c < 4; ++c) {
      role_columns.insert(mi_earned[c]);
      if (mi_max[c] >= 0) {
        role_columns.insert(mi_max[c]);
      }
    }
  } else {
    role_columns.insert(outcome_col);
  }

  // Candidate covariates per the schema rule.
  std::vector<int> candidates;
  switch (schema.covariate_mode) {
    case Schema::CovariateMode::kAllNumeric:
      for (int c = 0; c < static_cast<int>(table.header.size()); ++c) {
        if (!role_columns.count(c)) {
          candidates.push_back(c);
        }
      }
      break;
    case Schema::CovariateMode::kList:
      for (const auto& name : schema.covariate_columns) {
        candidates.push_back(require_column(table, name, "covariate"));
      }
      break;
    case Schema::CovariateMode::kPrefix:
      for (int c = 0; c < static_cast<int>(table.header.size()); ++c) {
        if (role_columns.count(c)) {
          continue;
        }
        for (const auto& prefix : schema.covariate_prefixes) {
          if (table.header[c].rfind(prefix, 0) == 0) {
            candidates.push_back(c);
            break;
          }
        }
      }
      break;
  }

  // Screen candidates: keep numeric columns with unique non-empty names.
  std::vector<int> kept;
  std::unordered_set<std::string> seen_names;
  for (int c : candidates) {
    const std::string& name = table.header[c];
    if (name.empty()) {
      report.log.push_back("DROPPED <unnamed> empty-column-name");
      continue;
    }
    if (!seen_names.insert(name).second) {
      report.log.push_back("DROPPED " + name + " duplicate-column-name");
      continue;
    }
    bool numeric = true;
    for (const auto& row : table.rows) {
      double v;
      if (!row[c].empty() && !csv::parse_number(row[c], v)) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      report.log.push_back("DROPPED " + name + " non-numeric");
      continue;
    }
    kept.push_back(c);
  }
  if (kept.empty()) {
    throw DataError("load: no covariates selected after screening");
  }

  // Row filter: outcome and treatment must be present and numeric.
  std::vector<std::size_t> row_ids;
  std::vector<double> outcome_raw;
  std::vector<double> treatment_raw;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    double w;
    if (!csv::parse_number(row[treatment_col], w)) {
      ++report.rows_dropped;
      continue;
    }
    double y = 0.0;
    if (use_maths_index) {
      bool ok = true;
      double idx = 0.0;
      for (int c = 0; c < 4 && ok; ++c) {
        double earned, maxpts;
        ok = csv::parse_number(row[mi_earned[c]], earned);
        if (!ok) {
          break;
        }
        if (mi_max[c] >= 0) {
          ok = csv::parse_number(row[mi_max[c]], maxpts);
        } else {
          maxpts = schema.maths_index->max_value[c];
        }
        if (!ok) {
          break;
        }
        if (maxpts <= 0.0 || earned < 0.0 || earned > maxpts) {
          throw DataError("load: invalid maths-index scores in data row " + std::to_string(r + 1));
        }
        idx += earned / maxpts;
      }
      if (!ok) {
        ++report.rows_dropped;
        continue;
      }
      y = idx;
    } else {
      if (!csv::parse_number(row[outcome_col], y)) {
        ++report.rows_dropped;
        continue;
      }
    }
    row_ids.push_back(r);
    outcome_raw.push_back(y);
    treatment_raw.push_back(w);
  }
  if (row_ids.empty()) {
    throw DataError("load: no usable rows");
  }

  // Map raw treatment levels to contiguous arm ids, ascending.
  std::map<double, int> level_to_arm;
  for (double w : treatment_raw) {
    level_to_arm.emplace(w, 0);
  }
  if (level_to_arm.size() < 2) {
    throw DataError("load: fewer than 2 treatment arms after filtering");
  }
  {
    int next = 0;
    for (auto& [level, arm] : level_to_arm) {
      arm = next++;
      report.treatment_levels.push_back(level);
    }
  }

  Dataset& ds = out.dataset;
  std::size_t n = row_ids.size();
  ds.outcome = std::move(outcome_raw);
  ds.treatment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.treatment[i] = level_to_arm[treatment_raw[i]];
  }

  if (cluster_col >= 0) {
    std::vector<int> codes(n);
    std::unordered_map<std::string, int> label_to_code;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& label = table.rows[row_ids[i]][cluster_col];
      auto [it, inserted] = label_to_code.emplace(label, static_cast<int>(labels.size()));
      if (inserted) {
        labels.push_back(label);
      }
      codes[i] = it->second;
    }
    ds.cluster = std::move(codes);
    ds.cluster_labels = std::move(labels);
  }

  ds.covariates = Matrix(n, kept.size());
  ds.column_names.reserve(kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    int c = kept[j];
    ds.column_names.push_back(table.header[c]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = table.rows[row_ids[i]][c];
      double v;
      if (csv::parse_number(cell, v)) {
        ds.covariates(i, j) = v;
      }
    }
  }

  ds.validate();
  return out;
}

LoadedTable load_table(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("load: missing file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_table_from_text(buf.str(), schema);
}

}  // namespace hte
