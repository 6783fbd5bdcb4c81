#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "biomass/labels.hpp"

namespace biomass {

/// One row of the prediction CSV. Clover is always white + red.
struct PredictionRow {
  std::string image_id;
  double grass_pct = 0;
  double white_pct = 0;
  double red_pct = 0;
  double weeds_pct = 0;

  double clover_pct() const { return white_pct + red_pct; }
  bool operator==(const PredictionRow&) const = default;
};

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows);
void save_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(std::istream& in);
std::vector<PredictionRow> load_predictions(const std::filesystem::path& path);

/// Ground truth rows from fully labelled samples; throws InputError when a
/// sample lacks the white/red breakdown.
std::vector<PredictionRow> truth_rows(const std::vector<Sample>& samples);

/// Pooled: RMSE/MAE over the union of all five components' errors.
/// Mean: unweighted average of the five per-component values.
enum class OverallMode { Pooled, Mean };
OverallMode parse_overall_mode(std::string_view text);
std::string_view to_string(OverallMode m);

struct ErrorMetrics {
  double rmse = 0;
  double mae = 0;
};

struct MetricsReport {
  static constexpr std::size_t kComponents = 5;
  /// grass, clover, white_clover, red_clover, weeds
  static const std::array<std::string_view, kComponents>& component_names();

  std::array<ErrorMetrics, kComponents> components{};
  ErrorMetrics overall;
  OverallMode overall_mode = OverallMode::Pooled;
  std::size_t samples = 0;
};

/// Rows are matched by image_id; a missing, extra or duplicated id throws
/// InputError. Metrics are in percentage points.
MetricsReport evaluate(const std::vector<PredictionRow>& predictions,
                       const std::vector<PredictionRow>& truth,
                       OverallMode overall = OverallMode::Pooled);

void write_report_table(std::ostream& out, const MetricsReport& report);
void write_report_csv(std::ostream& out, const MetricsReport& report);

}  // namespace biomass
