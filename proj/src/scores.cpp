#include "hte/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hte/common.hpp"

namespace hte {

double clip_propensity(double raw, double clip) {
  return std::clamp(raw, clip, 1.0 - clip);
}

void clip_and_renormalize(std::span<double> row, double clip) {
  std::size_t k = row.size();
  double lo = clip;
  double hi = 1.0 - clip;
  if (static_cast<double>(k) * clip >= 1.0) {
    throw ConfigError("propensity clip infeasible: K * clip >= 1");
  }
  // Solve sum_i clamp(s * r_i, lo, hi) = 1 for the scale s. The left side is
  // continuous and nondecreasing, lies below 1 at s = 0 (k * lo < 1) and at
  // or above 1 once every positive entry saturates, so a root exists; it is
  // linear between the clamp breakpoints, which makes the solve exact.
  std::vector<double> raw(row.begin(), row.end());
  double raw_sum = 0.0;
  for (double& v : raw) {
    if (!(v > 0.0)) {
      v = 0.0;
    }
    raw_sum += v;
  }
  if (raw_sum <= 0.0) {
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = 1.0 / static_cast<double>(k);
    }
    return;
  }
  std::vector<double> breakpoints;
  breakpoints.reserve(2 * k);
  for (double v : raw) {
    if (v > 0.0) {
      breakpoints.push_back(lo / v);
      breakpoints.push_back(hi / v);
    }
  }
  std::sort(breakpoints.begin(), breakpoints.end());
  auto total_at = [&](double s) {
    double total = 0.0;
    for (double v : raw) {
      total += std::clamp(s * v, lo, hi);
    }
    return total;
  };
  double prev = 0.0;
  double scale = breakpoints.back();
  for (double b : breakpoints) {
    if (total_at(b) >= 1.0) {
      // Root lies in [prev, b]; classify entries at the midpoint and solve
      // the linear piece.
      double mid = 0.5 * (prev + b);
      double pinned = 0.0;
      double active = 0.0;
      for (double v : raw) {
        double value = mid * v;
        if (value <= lo) {
          pinned += lo;
        } else if (value >= hi) {
          pinned += hi;
        } else {
          active += v;
        }
      }
      scale = active > 0.0 ? (1.0 - pinned) / active : b;
      break;
    }
    prev = b;
  }
  for (std::size_t i = 0; i < k; ++i) {
    row[i] = std::clamp(scale * raw[i], lo, hi);
  }
}

NuisanceEstimates crossfit_nuisances(const Dataset& dataset, const SplitPlan& plan,
                                     const ForestParams& forest_params, double clip) {
  std::size_t n = dataset.n_rows();
  if (plan.fold_of.size() != n) {
    throw DataError("crossfit: split plan does not match dataset");
  }
  if (!(clip > 0.0 && clip < 0.5)) {
    throw ConfigError("crossfit: clip must be in (0, 0.5)");
  }
  int k_arms = dataset.n_arms();
  if (static_cast<double>(k_arms) * clip >= 1.0) {
    throw ConfigError("crossfit: clip too large for arm count");
  }

  NuisanceEstimates out;
  out.clip = clip;
  out.propensity = Matrix(n, k_arms);
  out.mu = Matrix(n, k_arms);

  Matrix raw_propensity(n, k_arms);
  const Matrix& x = dataset.covariates;

  for (int fold = 0; fold < plan.k_folds; ++fold) {
    std::vector<uint32_t> train = plan.complement_units(fold);
    std::vector<uint32_t> test = plan.fold_units(fold);
    if (test.empty()) {
      continue;
    }
    // Every arm must appear in the training complement.
    std::vector<std::size_t> arm_counts(k_arms, 0);
    for (uint32_t u : train) {
      ++arm_counts[dataset.treatment[u]];
    }
    for (int arm = 0; arm < k_arms; ++arm) {
      if (arm_counts[arm] < 2 * static_cast<std::size_t>(forest_params.min_leaf)) {
        throw DataError("crossfit: arm " + std::to_string(arm) +
                        " too sparse in training complement of fold " + std::to_string(fold));
      }
    }

    for (int arm = 0; arm < k_arms; ++arm) {
      // One-vs-rest propensity forest.
      std::vector<double> indicator(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        indicator[i] = dataset.treatment[i] == arm ? 1.0 : 0.0;
      }
      ForestParams prop_params = forest_params;
      prop_params.seed = derive_seed(forest_params.seed, 0xE000 + fold, arm);
      RegressionForest prop_forest = fit_regression_forest(x, indicator, prop_params, train);
      std::vector<double> prop_pred = predict(prop_forest, x, test);
      for (std::size_t j = 0; j < test.size(); ++j) {
        raw_propensity(test[j], arm) = prop_pred[j];
      }

      // Outcome mean among the arm's training units.
      std::vector<uint32_t> arm_train;
      arm_train.reserve(arm_counts[arm]);
      for (uint32_t u : train) {
        if (dataset.treatment[u] == arm) {
          arm_train.push_back(u);
        }
      }
      ForestParams mu_params = forest_params;
      mu_params.seed = derive_seed(forest_params.seed, 0xF000 + fold, arm);
      RegressionForest mu_forest =
          fit_regression_forest(x, dataset.outcome, mu_params, arm_train);
      std::vector<double> mu_pred = predict(mu_forest, x, test);
      for (std::size_t j = 0; j < test.size(); ++j) {
        if (is_missing(mu_pred[j])) {
          throw NumericError("crossfit: no usable outcome prediction for a unit in fold " +
                             std::to_string(fold) + ", arm " + std::to_string(arm));
        }
        out.mu(test[j], arm) = mu_pred[j];
      }
    }
  }

  std::vector<double> row(k_arms);
  for (std::size_t i = 0; i < n; ++i) {
    for (int arm = 0; arm < k_arms; ++arm) {
      row[arm] = raw_propensity(i, arm);
    }
    clip_and_renormalize(row, clip);
    for (int arm = 0; arm < k_arms; ++arm) {
      out.propensity(i, arm) = row[arm];
    }
  }
  return out;
}

DrScoreSet dr_scores(const Dataset& dataset, const NuisanceEstimates& nuisance, Contrast contrast) {
  std::size_t n = dataset.n_rows();
  int k = dataset.n_arms();
  if (contrast.target == contrast.baseline) {
    throw ConfigError("dr_scores: contrast arms must differ");
  }
  if (contrast.target < 0 || contrast.target >= k || contrast.baseline < 0 ||
      contrast.baseline >= k) {
    throw ConfigError("dr_scores: contrast arm out of range");
  }
  if (nuisance.propensity.rows() != n || nuisance.mu.rows() != n) {
    throw DataError("dr_scores: nuisance dimensions do not match dataset");
  }
  DrScoreSet out;
  out.contrast = contrast;
  out.gamma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu_t = nuisance.mu(i, contrast.target);
    double mu_c = nuisance.mu(i, contrast.baseline);
    double g = mu_t - mu_c;
    if (dataset.treatment[i] == contrast.target) {
      g += (dataset.outcome[i] - mu_t) / nuisance.propensity(i, contrast.target);
    } else if (dataset.treatment[i] == contrast.baseline) {
      g -= (dataset.outcome[i] - mu_c) / nuisance.propensity(i, contrast.baseline);
    }
    out.gamma[i] = g;
  }
  return out;
}

AteEstimate dr_ate(const DrScoreSet& scores, const std::vector<int>* cluster) {
  std::size_t n = scores.gamma.size();
  if (n == 0) {
    throw DataError("dr_ate: empty score set");
  }
  if (n < 2) {
    throw DataError("dr_ate: se undefined for n < 2");
  }
  AteEstimate out;
  out.contrast = scores.contrast;
  out.n = n;
  out.estimate = mean(scores.gamma);

  if (cluster == nullptr) {
    out.se = sample_sd(scores.gamma) / std::sqrt(static_cast<double>(n));
    return out;
  }
  if (cluster->size() != n) {
    throw DataError("dr_ate: cluster length != score length");
  }
  int max_code = *std::max_element(cluster->begin(), cluster->end());
  std::vector<double> cluster_sums(max_code + 1, 0.0);
  std::vector<bool> present(max_code + 1, false);
  for (std::size_t i = 0; i < n; ++i) {
    cluster_sums[(*cluster)[i]] += scores.gamma[i] - out.estimate;
    present[(*cluster)[i]] = true;
  }
  double g = 0.0;
  double ss = 0.0;
  for (std::size_t c = 0; c < cluster_sums.size(); ++c) {
    if (!present[c]) {
      continue;
    }
    g += 1.0;
    ss += cluster_sums[c] * cluster_sums[c];
  }
  if (g < 2.0) {
    throw DataError("dr_ate: cluster-robust se needs at least 2 clusters");
  }
  double variance = (g / (g - 1.0)) * ss / (static_cast<double>(n) * static_cast<double>(n));
  out.se = std::sqrt(variance);
  return out;
}

std::vector<DrScoreSet> multi_arm_scores(const Dataset& dataset,
                                         const NuisanceEstimates& nuisance, int baseline) {
  int k = dataset.n_arms();
  if (k < 3) {
    throw ConfigError("multi_arm_scores: needs K >= 3 arms; use dr_scores for a binary contrast");
  }
  if (baseline < 0 || baseline >= k) {
    throw ConfigError("multi_arm_scores: baseline arm absent");
  }
  std::vector<DrScoreSet> out;
  out.reserve(k - 1);
  for (int arm = 0; arm < k; ++arm) {
    if (arm == baseline) {
      continue;
    }
    out.push_back(dr_scores(dataset, nuisance, Contrast{arm, baseline}));
  }
  return out;
}

}  // namespace hte
