#include "biomass/imputation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "biomass/errors.hpp"
#include "biomass/rng.hpp"

namespace biomass {

namespace {

constexpr double kRidge = 1e-8;
constexpr int kFeatures = 8;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<Sample> apply_fractions(const std::vector<Sample>& samples, CloverFractions f) {
  auto out = samples;
  for (auto& s : out) {
    if (s.category != Category::Basic) continue;
    const double clover = s.labels.clover_pct;
    s.labels.white_pct = f.white_frac * clover;
    s.labels.red_pct = f.red_frac * clover;
  }
  return out;
}

// Percentages enter the design matrix as fractions of 100 to keep the normal
// equations well scaled; coefficients are reported back in percent units.
Eigen::Matrix<double, 1, kFeatures> features_of(const Sample& s) {
  Eigen::Matrix<double, 1, kFeatures> row = Eigen::Matrix<double, 1, kFeatures>::Zero();
  row(0) = 1.0;
  row(1) = s.labels.grass_pct / 100.0;
  row(2) = s.labels.clover_pct / 100.0;
  row(3) = s.labels.weeds_pct / 100.0;
  row(3 + s.harvest_season) = 1.0;
  return row;
}

Eigen::VectorXd solve_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += kRidge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 0.0).any()) {
    throw ComputeError("regression imputation: normal equations are rank deficient");
  }
  Eigen::VectorXd beta = ldlt.solve(x.transpose() * y);
  if (!beta.allFinite()) {
    throw ComputeError("regression imputation: normal equations are rank deficient");
  }
  return beta;
}

}  // namespace

ImputationVariant parse_imputation_variant(std::string_view name) {
  if (name == "mean") return ImputationVariant::Mean;
  if (name == "median") return ImputationVariant::Median;
  if (name == "regression") return ImputationVariant::Regression;
  throw InputError("unknown imputation method '" + std::string(name) +
                   "' (expected mean, median or regression)");
}

std::string_view to_string(ImputationVariant v) {
  switch (v) {
    case ImputationVariant::Mean: return "mean";
    case ImputationVariant::Median: return "median";
    case ImputationVariant::Regression: return "regression";
  }
  return "?";
}

RegressionFitScope parse_fit_scope(std::string_view name) {
  if (name == "all") return RegressionFitScope::All;
  if (name == "complete_only") return RegressionFitScope::CompleteOnly;
  throw InputError("unknown regression fit scope '" + std::string(name) +
                   "' (expected all or complete_only)");
}

std::string_view to_string(RegressionFitScope s) {
  return s == RegressionFitScope::All ? "all" : "complete_only";
}

std::vector<CloverFractions> observed_fractions(const std::vector<Sample>& samples) {
  std::vector<CloverFractions> out;
  for (const auto& s : samples) {
    if (s.category != Category::Advanced || !s.labels.has_breakdown()) continue;
    if (!(s.labels.clover_pct > 0.0)) continue;
    const double white = *s.labels.white_pct;
    const double red = *s.labels.red_pct;
    const double sum = white + red;
    if (!(sum > 0.0)) continue;
    // Normalizing by white + red rather than clover_pct absorbs the rounding
    // slack allowed by the label tolerance, so the pair sums to one.
    out.push_back({white / sum, red / sum});
  }
  return out;
}

CloverFractions mean_fractions(const std::vector<Sample>& samples) {
  auto obs = observed_fractions(samples);
  if (obs.empty()) {
    throw InputError("imputation needs at least one advanced sample with clover_pct > 0");
  }
  CloverFractions f;
  for (const auto& o : obs) {
    f.white_frac += o.white_frac;
    f.red_frac += o.red_frac;
  }
  f.white_frac /= static_cast<double>(obs.size());
  f.red_frac /= static_cast<double>(obs.size());
  return f;
}

CloverFractions median_fractions(const std::vector<Sample>& samples) {
  auto obs = observed_fractions(samples);
  if (obs.empty()) {
    throw InputError("imputation needs at least one advanced sample with clover_pct > 0");
  }
  std::vector<double> white, red;
  for (const auto& o : obs) {
    white.push_back(o.white_frac);
    red.push_back(o.red_frac);
  }
  const double w = median_of(white);
  const double r = median_of(red);
  return {w / (w + r), r / (w + r)};
}

std::vector<Sample> impute_mean(const std::vector<Sample>& samples) {
  return apply_fractions(samples, mean_fractions(samples));
}

std::vector<Sample> impute_median(const std::vector<Sample>& samples) {
  return apply_fractions(samples, median_fractions(samples));
}

const std::vector<std::string>& RegressionFit::names() {
  static const std::vector<std::string> n{"intercept", "grass_pct", "clover_pct", "weeds_pct",
                                          "season_1",  "season_2",  "season_3",   "season_4"};
  return n;
}

RegressionImputation impute_regression_detailed(const std::vector<Sample>& samples,
                                                int iterations, std::uint64_t seed,
                                                RegressionFitScope scope) {
  if (iterations < 1) throw InputError("regression imputation needs iterations >= 1");

  std::vector<std::size_t> observed;  // advanced rows with a defined fraction
  std::vector<double> observed_frac;
  std::vector<std::size_t> missing;   // basic rows
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.category == Category::Basic) {
      missing.push_back(i);
      continue;
    }
    if (!s.labels.has_breakdown() || !(s.labels.clover_pct > 0.0)) continue;
    const double sum = *s.labels.white_pct + *s.labels.red_pct;
    if (!(sum > 0.0)) continue;
    observed.push_back(i);
    observed_frac.push_back(*s.labels.white_pct / sum);
  }
  if (observed.size() < 2) {
    throw InputError("regression imputation needs at least two advanced samples with clover_pct > 0");
  }

  RegressionImputation result;
  result.samples = samples;
  if (missing.empty()) return result;

  Rng rng(derive_seed({seed, fnv1a("impute.regression")}));
  std::vector<double> current(missing.size());
  for (auto& c : current) c = observed_frac[rng.index(observed_frac.size())];

  const bool use_all = scope == RegressionFitScope::All;
  const auto rows = observed.size() + (use_all ? missing.size() : 0);
  Eigen::MatrixXd x(rows, kFeatures);
  Eigen::VectorXd y(rows);
  for (std::size_t k = 0; k < observed.size(); ++k) {
    x.row(k) = features_of(samples[observed[k]]);
    y(k) = observed_frac[k];
  }
  if (use_all) {
    for (std::size_t k = 0; k < missing.size(); ++k) {
      x.row(observed.size() + k) = features_of(samples[missing[k]]);
    }
  }
  Eigen::MatrixXd x_missing(missing.size(), kFeatures);
  for (std::size_t k = 0; k < missing.size(); ++k) x_missing.row(k) = features_of(samples[missing[k]]);

  Eigen::VectorXd beta;
  for (int it = 0; it < iterations; ++it) {
    if (use_all) {
      for (std::size_t k = 0; k < missing.size(); ++k) y(observed.size() + k) = current[k];
    }
    beta = solve_ridge(x, y);
    Eigen::VectorXd pred = x_missing * beta;
    for (std::size_t k = 0; k < missing.size(); ++k) current[k] = std::clamp(pred(k), 0.0, 1.0);
  }

  for (std::size_t k = 0; k < missing.size(); ++k) {
    auto& l = result.samples[missing[k]].labels;
    const double white = current[k] * l.clover_pct;
    l.white_pct = white;
    l.red_pct = l.clover_pct - white;
  }
  result.fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  for (int j = 1; j <= 3; ++j) result.fit.coefficients[j] /= 100.0;
  return result;
}

std::vector<Sample> impute_regression(const std::vector<Sample>& samples, int iterations,
                                      std::uint64_t seed, RegressionFitScope scope) {
  return impute_regression_detailed(samples, iterations, seed, scope).samples;
}

std::vector<Sample> impute(const std::vector<Sample>& samples, const ImputationMethod& method) {
  switch (method.variant) {
    case ImputationVariant::Mean: return impute_mean(samples);
    case ImputationVariant::Median: return impute_median(samples);
    case ImputationVariant::Regression:
      return impute_regression(samples, method.regression_iterations, method.seed,
                               method.fit_scope);
  }
  throw InputError("unknown imputation method");
}

bool needs_imputation(const std::vector<Sample>& samples) {
  return std::any_of(samples.begin(), samples.end(),
                     [](const Sample& s) { return !s.labels.has_breakdown(); });
}

}  // namespace biomass
