#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/forest.hpp"
#include "hte/matrix.hpp"

namespace hte {

// Cross-fitted nuisances: per-arm propensities e_k(x) and conditional
// outcome means mu_k(x). Row i was predicted by models that never saw
// fold_of(i). Propensity rows sum to one with every entry in
// [clip, 1 - clip].
struct NuisanceEstimates {
  Matrix propensity;  // n x K
  Matrix mu;          // n x K
  double clip = 0.01;
};

// Per-unit doubly robust score for the contrast (target, baseline):
//   gamma_i = mu_t - mu_c + 1{W=t} (Y - mu_t)/e_t - 1{W=c} (Y - mu_c)/e_c.
// Units in other arms carry only the regression term.
struct DrScoreSet {
  Contrast contrast;
  std::vector<double> gamma;
};

struct AteEstimate {
  Contrast contrast;
  double estimate = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Per-fold honest regression forests for outcome means (one per arm, fit on
// that arm's out-of-fold units) and one-vs-rest propensities, renormalized
// per row after clipping.
NuisanceEstimates crossfit_nuisances(const Dataset& dataset, const SplitPlan& plan,
                                     const ForestParams& forest_params, double clip);

// Clamp a single raw propensity into [clip, 1 - clip].
double clip_propensity(double raw, double clip);

// Projects a raw propensity row onto the simplex intersected with the
// [clip, 1 - clip] box: bound violators are pinned, free entries scale
// proportionally. Requires K * clip < 1.
void clip_and_renormalize(std::span<double> row, double clip);

DrScoreSet dr_scores(const Dataset& dataset, const NuisanceEstimates& nuisance, Contrast contrast);

// estimate = mean(gamma). Without clusters se = sd(gamma)/sqrt(n); with a
// cluster column the sandwich form over cluster sums is used, with a
// G/(G-1) correction so singleton clusters reduce to the plain formula.
AteEstimate dr_ate(const DrScoreSet& scores, const std::vector<int>* cluster = nullptr);

// One score set per non-baseline arm, all sharing the given nuisances.
// Requires K >= 3; with two arms call dr_scores directly.
std::vector<DrScoreSet> multi_arm_scores(const Dataset& dataset,
                                         const NuisanceEstimates& nuisance, int baseline);

}  // namespace hte
