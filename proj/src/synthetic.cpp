#include "hte/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hte/common.hpp"
#include "hte/csv.hpp"

namespace hte {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Stream tags for the independent RNG lanes of one generation.
enum Stream : uint64_t {
  kCovariates = 1,
  kCorrCopies = 2,
  kTreatment = 3,
  kNoise = 4,
  kMissing = 5,
};
}  // namespace

void DgpSpec::validate() const {
  if (n < 4 || p < 1 || arms < 2) {
    throw ConfigError("dgp: need n >= 4, p >= 1, arms >= 2");
  }
  if (propensity.softmax_col >= 0) {
    if (cluster_count > 0) {
      throw ConfigError("dgp: covariate-dependent propensity cannot be cluster-assigned");
    }
    if (propensity.softmax_col >= p) {
      throw ConfigError("dgp: softmax column out of range");
    }
    if (propensity.slopes.size() != static_cast<std::size_t>(arms)) {
      throw ConfigError("dgp: need one softmax slope per arm");
    }
  } else {
    if (propensity.probs.size() != static_cast<std::size_t>(arms)) {
      throw ConfigError("dgp: need one propensity per arm");
    }
    double total = 0.0;
    for (double q : propensity.probs) {
      if (!(q > 0.0)) {
        throw ConfigError("dgp: propensities must be positive");
      }
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("dgp: propensities must sum to 1");
    }
  }
  if (cate.size() != static_cast<std::size_t>(arms - 1)) {
    throw ConfigError("dgp: need one cate function per non-control arm");
  }
  for (const auto& fn : cate) {
    if (fn.kind != CateFn::Kind::kConstant && (fn.col < 0 || fn.col >= p)) {
      throw ConfigError("dgp: cate column out of range");
    }
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ConfigError("dgp: missing_rate must be in [0, 1)");
  }
  if (noise_sd < 0.0) {
    throw ConfigError("dgp: noise_sd must be >= 0");
  }
  if (corr_copy) {
    if (corr_copy->source_col < 0 || corr_copy->source_col >= p) {
      throw ConfigError("dgp: correlated-copy source out of range");
    }
    for (int t : corr_copy->targets) {
      if (t < 0 || t >= p || t == corr_copy->source_col) {
        throw ConfigError("dgp: correlated-copy target out of range");
      }
    }
  }
}

std::vector<double> noise_stream(uint64_t seed, std::size_t n, double noise_sd) {
  std::vector<double> noise(n, 0.0);
  if (noise_sd <= 0.0) {
    return noise;
  }
  std::mt19937_64 rng(derive_seed(seed, kNoise));
  std::normal_distribution<double> dist(0.0, noise_sd);
  for (double& v : noise) {
    v = dist(rng);
  }
  return noise;
}

namespace {

double baseline_value(BaselineFn fn, const Matrix& x, std::size_t row) {
  switch (fn.kind) {
    case BaselineFn::Kind::kZero:
      return 0.0;
    case BaselineFn::Kind::kLinear:
      return x(row, 0) + (x.cols() > 1 ? x(row, 1) : 0.0);
    case BaselineFn::Kind::kStep:
      return x(row, 0) > 0.0 ? 1.0 : 0.0;
    case BaselineFn::Kind::kSine:
      return std::sin(kPi * x(row, 0));
  }
  return 0.0;
}

double cate_value(const CateFn& fn, const Matrix& x, std::size_t row) {
  switch (fn.kind) {
    case CateFn::Kind::kConstant:
      return fn.value;
    case CateFn::Kind::kStep:
      return x(row, fn.col) > fn.threshold ? fn.value : 0.0;
    case CateFn::Kind::kLinear:
      return fn.value * x(row, fn.col);
  }
  return 0.0;
}

int draw_arm(const PropensitySpec& spec, const Matrix& x, std::size_t row, int arms,
             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  if (spec.softmax_col < 0) {
    double acc = 0.0;
    for (int a = 0; a < arms; ++a) {
      acc += spec.probs[a];
      if (u <= acc) {
        return a;
      }
    }
    return arms - 1;
  }
  double v = x(row, spec.softmax_col);
  std::vector<double> weights(arms);
  double total = 0.0;
  for (int a = 0; a < arms; ++a) {
    weights[a] = std::exp(spec.slopes[a] * v);
    total += weights[a];
  }
  double acc = 0.0;
  for (int a = 0; a < arms; ++a) {
    acc += weights[a] / total;
    if (u <= acc) {
      return a;
    }
  }
  return arms - 1;
}

}  // namespace

SyntheticTruth generate(const DgpSpec& spec) {
  spec.validate();
  std::size_t n = spec.n;
  int p = spec.p;

  SyntheticTruth truth;
  Matrix x(n, p);
  {
    std::mt19937_64 rng(derive_seed(spec.seed, kCovariates));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        x(i, j) = unif(rng);
      }
    }
  }
  if (spec.corr_copy) {
    std::mt19937_64 rng(derive_seed(spec.seed, kCorrCopies));
    std::normal_distribution<double> jitter(0.0, spec.corr_copy->noise_sd);
    for (std::size_t i = 0; i < n; ++i) {
      double base = x(i, spec.corr_copy->source_col);
      for (int t : spec.corr_copy->targets) {
        x(i, t) = base + jitter(rng);
      }
    }
  }

  Dataset& ds = truth.dataset;
  ds.treatment.resize(n);
  {
    std::mt19937_64 rng(derive_seed(spec.seed, kTreatment));
    if (spec.cluster_count > 0) {
      int g = spec.cluster_count;
      std::vector<int> cluster_arm(g);
      for (int c = 0; c < g; ++c) {
        cluster_arm[c] = draw_arm(spec.propensity, x, 0, spec.arms, rng);
      }
      std::vector<int> codes(n);
      for (std::size_t i = 0; i < n; ++i) {
        int c = static_cast<int>(i * static_cast<std::size_t>(g) / n);
        codes[i] = c;
        ds.treatment[i] = cluster_arm[c];
      }
      ds.cluster = std::move(codes);
      ds.cluster_labels.reserve(g);
      for (int c = 0; c < g; ++c) {
        ds.cluster_labels.push_back("c" + std::to_string(c));
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        ds.treatment[i] = draw_arm(spec.propensity, x, i, spec.arms, rng);
      }
    }
  }

  truth.baseline_values.resize(n);
  truth.true_cate = Matrix(n, spec.arms - 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    truth.baseline_values[i] = baseline_value(spec.baseline, x, i);
    for (int a = 1; a < spec.arms; ++a) {
      truth.true_cate(i, a - 1) = cate_value(spec.cate[a - 1], x, i);
    }
  }
  truth.true_ate.resize(spec.arms - 1);
  for (int a = 1; a < spec.arms; ++a) {
    truth.true_ate[a - 1] = mean(truth.true_cate.column(a - 1));
  }

  std::vector<double> noise = noise_stream(spec.seed, n, spec.noise_sd);
  ds.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double effect = ds.treatment[i] > 0 ? truth.true_cate(i, ds.treatment[i] - 1) : 0.0;
    ds.outcome[i] = truth.baseline_values[i] + effect + noise[i];
  }

  // Masking touches covariates only, after outcomes are assembled.
  if (spec.missing_rate > 0.0) {
    std::mt19937_64 rng(derive_seed(spec.seed, kMissing));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        if (unif(rng) < spec.missing_rate) {
          x(i, j) = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  }

  ds.covariates = std::move(x);
  ds.column_names.reserve(p);
  for (int j = 0; j < p; ++j) {
    ds.column_names.push_back("x" + std::to_string(j + 1));
  }
  ds.validate();
  return truth;
}

OracleMetrics oracle_metrics(const CateEstimates& estimates, const SyntheticTruth& truth,
                             int target_arm, const AteEstimate* ate) {
  std::size_t n = truth.dataset.n_rows();
  if (estimates.tau_hat.size() != n) {
    throw DataError("oracle metrics: estimate length != dataset rows");
  }
  if (target_arm < 1 || static_cast<std::size_t>(target_arm) > truth.true_cate.cols()) {
    throw ConfigError("oracle metrics: target arm out of range");
  }
  std::span<const double> tau_true = truth.true_cate.column(target_arm - 1);
  double center = mean(tau_true);

  OracleMetrics metrics;
  double se_sum = 0.0;
  double sum_e = 0.0, sum_t = 0.0, sum_ee = 0.0, sum_tt = 0.0, sum_et = 0.0;
  std::size_t agree = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double est = estimates.tau_hat[i];
    if (is_missing(est)) {
      continue;
    }
    ++used;
    double diff = est - tau_true[i];
    se_sum += diff * diff;
    sum_e += est;
    sum_t += tau_true[i];
    sum_ee += est * est;
    sum_tt += tau_true[i] * tau_true[i];
    sum_et += est * tau_true[i];
    if ((est - center > 0) == (tau_true[i] - center > 0)) {
      ++agree;
    }
  }
  if (used == 0) {
    throw DataError("oracle metrics: no finite estimates");
  }
  metrics.n_used = used;
  metrics.cate_mse = se_sum / static_cast<double>(used);
  metrics.sign_agreement = static_cast<double>(agree) / static_cast<double>(used);
  double du = static_cast<double>(used);
  double cov = sum_et / du - (sum_e / du) * (sum_t / du);
  double var_e = sum_ee / du - (sum_e / du) * (sum_e / du);
  double var_t = sum_tt / du - (sum_t / du) * (sum_t / du);
  metrics.cate_corr =
      var_e > 0.0 && var_t > 0.0 ? cov / std::sqrt(var_e * var_t) : 0.0;
  double true_ate = truth.true_ate[target_arm - 1];
  if (ate != nullptr) {
    metrics.ate_bias = ate->estimate - true_ate;
    metrics.ci_covers = std::abs(true_ate - ate->estimate) <= 1.96 * ate->se;
  } else {
    metrics.ate_bias = sum_e / du - true_ate;
  }
  return metrics;
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream out;
  std::vector<std::string> header{"y", "w"};
  if (dataset.cluster) {
    header.push_back("cluster");
  }
  for (const auto& name : dataset.column_names) {
    header.push_back(name);
  }
  out << csv::join_row(header);
  std::size_t n = dataset.n_rows();
  std::vector<std::string> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    row.push_back(format_double(dataset.outcome[i]));
    row.push_back(std::to_string(dataset.treatment[i]));
    if (dataset.cluster) {
      row.push_back(dataset.cluster_labels[(*dataset.cluster)[i]]);
    }
    for (std::size_t j = 0; j < dataset.covariates.cols(); ++j) {
      double v = dataset.covariates(i, j);
      row.push_back(is_missing(v) ? "" : format_double(v));
    }
    out << csv::join_row(row);
  }
  return out.str();
}

std::string truth_to_csv(const SyntheticTruth& truth) {
  std::ostringstream out;
  std::vector<std::string> header;
  for (std::size_t a = 0; a < truth.true_cate.cols(); ++a) {
    header.push_back("tau_arm" + std::to_string(a + 1));
  }
  out << csv::join_row(header);
  std::vector<std::string> row;
  for (std::size_t i = 0; i < truth.dataset.n_rows(); ++i) {
    row.clear();
    for (std::size_t a = 0; a < truth.true_cate.cols(); ++a) {
      row.push_back(format_double(truth.true_cate(i, a)));
    }
    out << csv::join_row(row);
  }
  return out.str();
}

}  // namespace hte
