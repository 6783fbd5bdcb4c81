#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biomass/labels.hpp"

namespace biomass {

enum class ImputationVariant { Mean, Median, Regression };

/// Which rows the chained regression is fitted on each round.
enum class RegressionFitScope {
  All,           ///< observed advanced rows plus the current basic imputations
  CompleteOnly,  ///< observed advanced rows only
};

struct ImputationMethod {
  ImputationVariant variant = ImputationVariant::Mean;
  int regression_iterations = 5;
  std::uint64_t seed = 0;
  RegressionFitScope fit_scope = RegressionFitScope::All;
};

ImputationVariant parse_imputation_variant(std::string_view name);
std::string_view to_string(ImputationVariant v);

RegressionFitScope parse_fit_scope(std::string_view name);
std::string_view to_string(RegressionFitScope s);

/// White and red clover as fractions of total clover.
struct CloverFractions {
  double white_frac = 0;
  double red_frac = 0;
};

/// Fractions of clover-bearing advanced samples, in input order. A sample
/// contributes when clover_pct > 0 and white + red > 0.
std::vector<CloverFractions> observed_fractions(const std::vector<Sample>& samples);

CloverFractions mean_fractions(const std::vector<Sample>& samples);

/// Per-variable medians, renormalized to sum to one.
CloverFractions median_fractions(const std::vector<Sample>& samples);

std::vector<Sample> impute_mean(const std::vector<Sample>& samples);
std::vector<Sample> impute_median(const std::vector<Sample>& samples);

/// Fitted white-fraction model from the final regression round.
struct RegressionFit {
  /// Order: intercept, grass_pct, clover_pct, weeds_pct, season_1..season_4.
  std::vector<double> coefficients;
  static const std::vector<std::string>& names();
};

struct RegressionImputation {
  std::vector<Sample> samples;
  RegressionFit fit;
};

/// Chained regression imputation: seeded random initialization from the
/// observed white fractions, then `iterations` rounds of least-squares fit and
/// deterministic re-prediction of every basic sample's white fraction.
RegressionImputation impute_regression_detailed(
    const std::vector<Sample>& samples, int iterations, std::uint64_t seed,
    RegressionFitScope scope = RegressionFitScope::All);

std::vector<Sample> impute_regression(const std::vector<Sample>& samples, int iterations,
                                      std::uint64_t seed,
                                      RegressionFitScope scope = RegressionFitScope::All);

std::vector<Sample> impute(const std::vector<Sample>& samples, const ImputationMethod& method);

/// True when any sample lacks the white/red breakdown.
bool needs_imputation(const std::vector<Sample>& samples);

}  // namespace biomass
