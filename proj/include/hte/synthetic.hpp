#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/forest.hpp"
#include "hte/scores.hpp"

namespace hte {

// Data-generating processes with known per-unit effects, used as the oracle
// for the acceptance suite. Covariates are iid uniform(-1, 1) before any
// masking; column indices below are 0-based.
struct BaselineFn {
  enum class Kind { kZero, kLinear, kStep, kSine };
  Kind kind = Kind::kZero;
};

struct CateFn {
  enum class Kind { kConstant, kStep, kLinear };
  Kind kind = Kind::kConstant;
  double value = 0.0;   // constant level, step height, or linear coefficient
  int col = 0;          // step/linear column
  double threshold = 0.0;  // step cut point
};

struct PropensitySpec {
  std::vector<double> probs;  // per-arm assignment probabilities
  // Optional covariate-dependent rule: softmax over arms of slope_k * x[col].
  int softmax_col = -1;
  std::vector<double> slopes;
};

// Replaces target columns with source + N(0, noise_sd) copies, giving a
// block of correlated distractors.
struct CorrelatedCopies {
  int source_col = 1;
  std::vector<int> targets;
  double noise_sd = 0.25;
};

struct DgpSpec {
  std::size_t n = 1000;
  int p = 10;
  int arms = 2;
  PropensitySpec propensity{{0.5, 0.5}, -1, {}};
  BaselineFn baseline;
  std::vector<CateFn> cate;  // one per non-control arm
  double noise_sd = 1.0;
  double missing_rate = 0.0;
  int cluster_count = 0;     // > 0 assigns treatment at the cluster level
  std::optional<CorrelatedCopies> corr_copy;
  uint64_t seed = 0;

  void validate() const;
};

struct SyntheticTruth {
  Dataset dataset;
  Matrix true_cate;                     // n x (arms - 1), contrast vs arm 0
  std::vector<double> true_ate;         // column means of true_cate
  std::vector<double> baseline_values;  // baseline(x_i) before masking
};

SyntheticTruth generate(const DgpSpec& spec);

// The exact noise stream generate() adds to outcomes, exposed so stored
// outputs can be reproduced from (seed, n, noise_sd) alone.
std::vector<double> noise_stream(uint64_t seed, std::size_t n, double noise_sd);

struct OracleMetrics {
  double cate_mse = 0.0;
  double cate_corr = 0.0;
  // Share of units classified on the same side of the mean true effect.
  double sign_agreement = 0.0;
  double ate_bias = 0.0;
  bool ci_covers = false;
  std::size_t n_used = 0;  // units with a finite estimate
};

// Compares estimates with the stored truth for the contrast (arm, 0).
// When `ate` is given, ci_covers tests |truth - estimate| <= 1.96 se.
OracleMetrics oracle_metrics(const CateEstimates& estimates, const SyntheticTruth& truth,
                             int target_arm = 1, const AteEstimate* ate = nullptr);

// Writes the dataset in the loader's delimited format: y,w[,cluster],x1..xp.
std::string dataset_to_csv(const Dataset& dataset);
// Per-unit truth sidecar: one tau column per non-control arm.
std::string truth_to_csv(const SyntheticTruth& truth);

}  // namespace hte
