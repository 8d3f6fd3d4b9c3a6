#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hte/matrix.hpp"

namespace hte {

// Columnar analysis table. Treatment arms are contiguous ids 0..K-1 with
// arm 0 as the reference; covariate cells may be missing (NaN), the outcome
// may not.
struct Dataset {
  std::vector<double> outcome;
  std::vector<int> treatment;
  std::optional<std::vector<int>> cluster;   // codes 0..G-1
  std::vector<std::string> cluster_labels;   // size G when cluster is set
  Matrix covariates;
  std::vector<std::string> column_names;

  std::size_t n_rows() const { return outcome.size(); }
  int n_arms() const;
  int n_clusters() const { return static_cast<int>(cluster_labels.size()); }

  // Throws DataError when any structural invariant fails.
  void validate() const;
};

enum class Half : uint8_t { kFit = 0, kEstimate = 1 };

// Cross-fitting folds plus a fit/estimate half split; immutable once built.
struct SplitPlan {
  std::vector<int> fold_of;
  std::vector<Half> half_of;
  int k_folds = 0;
  uint64_t seed = 0;

  std::vector<uint32_t> fold_units(int fold) const;
  std::vector<uint32_t> complement_units(int fold) const;
  std::vector<uint32_t> half_units(Half half) const;
};

// Folds and halves are dealt over shuffled units. With cluster_respecting on
// and a cluster column present, whole clusters are assigned greedily: shuffle
// clusters, order by size descending (stable), place each into the currently
// smallest bin, ties to the lowest bin index. Cluster atomicity then takes
// precedence over exact +-1 unit balance.
SplitPlan make_split_plan(const Dataset& dataset, int k_folds, uint64_t seed, bool cluster_respecting);

struct CategoryScore {
  double earned = 0.0;
  double max = 0.0;
};

// Sum of per-category normalized scores earned/max; range [0, 4].
std::vector<double> build_maths_index(const std::array<std::vector<CategoryScore>, 4>& categories);

struct MathsIndexColumns {
  // Per category: earned-points column, and either a max-points column or a
  // fixed max value (set column to empty to use the constant).
  std::array<std::string, 4> earned;
  std::array<std::string, 4> max_column;
  std::array<double, 4> max_value{};
};

struct Schema {
  std::string outcome_column;                       // or use maths_index
  std::optional<MathsIndexColumns> maths_index;
  std::string treatment_column;
  std::optional<std::string> cluster_column;

  enum class CovariateMode { kAllNumeric, kList, kPrefix };
  CovariateMode covariate_mode = CovariateMode::kAllNumeric;
  std::vector<std::string> covariate_columns;       // kList
  std::vector<std::string> covariate_prefixes;      // kPrefix
};

struct LoadReport {
  std::vector<std::string> log;          // "DROPPED <column> <reason>" lines
  std::size_t rows_dropped = 0;          // missing outcome or treatment
  std::vector<double> treatment_levels;  // raw value of each arm id
};

struct LoadedTable {
  Dataset dataset;
  LoadReport report;
};

// Loads a delimited text table and screens covariates per the schema rule.
// Raw treatment levels are mapped to contiguous arm ids by ascending value.
LoadedTable load_table(const std::string& path, const Schema& schema);
LoadedTable load_table_from_text(const std::string& text, const Schema& schema);

}  // namespace hte
