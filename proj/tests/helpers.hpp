#pragma once

// Shared fixtures and independent oracles for the test suites. The split
// oracle re-derives best splits by exhaustive enumeration and must stay
// independent of the library's search code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/forest.hpp"
#include "hte/matrix.hpp"
#include "hte/scores.hpp"

namespace testutil {

inline hte::Matrix random_matrix(std::size_t n, std::size_t p, uint64_t seed,
                                 double missing_rate = 0.0) {
  hte::Matrix x(n, p);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> mask(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      x(i, j) = mask(rng) < missing_rate ? std::numeric_limits<double>::quiet_NaN() : unif(rng);
    }
  }
  return x;
}

inline std::vector<uint32_t> iota_units(std::size_t n) {
  std::vector<uint32_t> units(n);
  for (std::size_t i = 0; i < n; ++i) {
    units[i] = static_cast<uint32_t>(i);
  }
  return units;
}

// Oracle nuisances for a randomized binary design: constant propensity and a
// caller-supplied conditional mean per arm.
inline hte::NuisanceEstimates oracle_nuisances(std::size_t n, int arms,
                                               const std::vector<double>& propensities,
                                               const hte::Matrix& mu) {
  hte::NuisanceEstimates nu;
  nu.clip = 0.01;
  nu.propensity = hte::Matrix(n, arms);
  nu.mu = mu;
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < arms; ++a) {
      nu.propensity(i, a) = propensities[a];
    }
  }
  return nu;
}

struct OracleSplit {
  int var = -1;
  double threshold = 0.0;
  bool missing_left = true;
  double criterion = 0.0;
};

// Exhaustive best split for the mean-shift criterion n_l n_r (mean_l-mean_r)^2
// over all (variable, midpoint, missing-direction) triples, with the same
// admissibility rules as the implementation: children at least min_leaf and,
// when aux weights are given, positive aux sums.
inline OracleSplit brute_force_split(const hte::Matrix& x, const std::vector<uint32_t>& units,
                                     const std::vector<double>& response, const double* aux,
                                     int min_leaf) {
  OracleSplit best;
  std::size_t m = units.size();
  for (std::size_t var = 0; var < x.cols(); ++var) {
    std::vector<double> present;
    for (uint32_t u : units) {
      double v = x(u, var);
      if (!std::isnan(v)) {
        present.push_back(v);
      }
    }
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    bool any_missing = false;
    for (uint32_t u : units) {
      if (std::isnan(x(u, var))) {
        any_missing = true;
      }
    }
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
      double thr = present[k] + 0.5 * (present[k + 1] - present[k]);
      for (int dir = 0; dir < (any_missing ? 2 : 1); ++dir) {
        bool miss_left = dir == 0;
        double sum_l = 0.0, sum_r = 0.0, aux_l = 0.0, aux_r = 0.0;
        std::size_t n_l = 0, n_r = 0;
        for (uint32_t u : units) {
          double v = x(u, var);
          bool left = std::isnan(v) ? miss_left : v <= thr;
          if (left) {
            ++n_l;
            sum_l += response[u];
            if (aux) {
              aux_l += aux[u];
            }
          } else {
            ++n_r;
            sum_r += response[u];
            if (aux) {
              aux_r += aux[u];
            }
          }
        }
        if (n_l < static_cast<std::size_t>(min_leaf) || n_r < static_cast<std::size_t>(min_leaf)) {
          continue;
        }
        if (aux && (!(aux_l > 0.0) || !(aux_r > 0.0))) {
          continue;
        }
        double diff = sum_l / static_cast<double>(n_l) - sum_r / static_cast<double>(n_r);
        double crit = static_cast<double>(n_l) * static_cast<double>(n_r) * diff * diff;
        if (crit > best.criterion) {
          best = {static_cast<int>(var), thr, miss_left, crit};
        }
      }
    }
  }
  (void)m;
  return best;
}

// Causal split oracle: computes the node pseudo-outcomes directly from the
// definition, then enumerates as above with w~^2 admissibility weights.
inline OracleSplit brute_force_causal_split(const hte::Matrix& x,
                                            const std::vector<uint32_t>& units,
                                            const std::vector<double>& y_tilde,
                                            const std::vector<double>& w_tilde, int min_leaf) {
  double sum_wy = 0.0, sum_ww = 0.0;
  for (uint32_t u : units) {
    sum_wy += w_tilde[u] * y_tilde[u];
    sum_ww += w_tilde[u] * w_tilde[u];
  }
  OracleSplit none;
  if (!(sum_ww > 0.0)) {
    return none;
  }
  double beta = sum_wy / sum_ww;
  double denom = sum_ww / static_cast<double>(units.size());
  std::vector<double> rho(x.rows(), 0.0);
  std::vector<double> aux(x.rows(), 0.0);
  for (uint32_t u : units) {
    rho[u] = w_tilde[u] * (y_tilde[u] - w_tilde[u] * beta) / denom;
    aux[u] = w_tilde[u] * w_tilde[u];
  }
  return brute_force_split(x, units, rho, aux.data(), min_leaf);
}

}  // namespace testutil
