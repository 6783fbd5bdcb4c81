#include "biomass/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "biomass/errors.hpp"

namespace biomass {

namespace {

constexpr std::string_view kPredictionHeader =
    "image_id,grass_pct,clover_pct,white_clover_pct,red_clover_pct,weeds_pct";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_field(std::string_view field, std::size_t row, std::string_view column) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw InputError("predictions CSV row " + std::to_string(row) + ": cannot parse " +
                     std::string(column) + " value '" + std::string(field) + "'");
  }
  return v;
}

std::array<double, MetricsReport::kComponents> components_of(const PredictionRow& r) {
  return {r.grass_pct, r.clover_pct(), r.white_pct, r.red_pct, r.weeds_pct};
}

ErrorMetrics metrics_of(double sum_sq, double sum_abs, std::size_t n) {
  if (n == 0) return {};
  return {std::sqrt(sum_sq / static_cast<double>(n)), sum_abs / static_cast<double>(n)};
}

}  // namespace

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << kPredictionHeader << '\n';
  for (const auto& r : rows) {
    out << r.image_id << ',' << format_number(r.grass_pct) << ',' << format_number(r.clover_pct())
        << ',' << format_number(r.white_pct) << ',' << format_number(r.red_pct) << ','
        << format_number(r.weeds_pct) << '\n';
  }
}

void save_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write predictions: " + path.string());
  write_predictions_csv(out, rows);
  if (!out) throw ComputeError("failed writing predictions: " + path.string());
}

std::vector<PredictionRow> read_predictions_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kPredictionHeader) {
    throw InputError("predictions CSV must start with header '" + std::string(kPredictionHeader) + "'");
  }
  std::vector<PredictionRow> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (auto pos = rest.find(','); ; pos = rest.find(',')) {
      f.push_back(trim(rest.substr(0, pos)));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != 6) {
      throw InputError("predictions CSV row " + std::to_string(row) + ": expected 6 columns, got " +
                       std::to_string(f.size()));
    }
    if (f[0].empty()) throw InputError("predictions CSV row " + std::to_string(row) + ": empty image_id");
    PredictionRow r;
    r.image_id = std::string(f[0]);
    r.grass_pct = parse_field(f[1], row, "grass_pct");
    parse_field(f[2], row, "clover_pct");  // recomputed from white + red
    r.white_pct = parse_field(f[3], row, "white_clover_pct");
    r.red_pct = parse_field(f[4], row, "red_clover_pct");
    r.weeds_pct = parse_field(f[5], row, "weeds_pct");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<PredictionRow> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open predictions CSV: " + path.string());
  return read_predictions_csv(in);
}

std::vector<PredictionRow> truth_rows(const std::vector<Sample>& samples) {
  std::vector<PredictionRow> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.labels.has_breakdown()) {
      throw InputError("truth sample '" + s.image_id + "' has no white/red clover breakdown");
    }
    rows.push_back({s.image_id, s.labels.grass_pct, *s.labels.white_pct, *s.labels.red_pct,
                    s.labels.weeds_pct});
  }
  return rows;
}

OverallMode parse_overall_mode(std::string_view text) {
  if (text == "pooled") return OverallMode::Pooled;
  if (text == "mean") return OverallMode::Mean;
  throw InputError("unknown overall metric mode '" + std::string(text) + "' (expected pooled or mean)");
}

std::string_view to_string(OverallMode m) { return m == OverallMode::Pooled ? "pooled" : "mean"; }

const std::array<std::string_view, MetricsReport::kComponents>& MetricsReport::component_names() {
  static const std::array<std::string_view, kComponents> names{"grass", "clover", "white_clover",
                                                               "red_clover", "weeds"};
  return names;
}

MetricsReport evaluate(const std::vector<PredictionRow>& predictions,
                       const std::vector<PredictionRow>& truth, OverallMode overall) {
  if (truth.empty()) throw InputError("no truth rows to evaluate against");
  std::map<std::string, const PredictionRow*> by_id;
  for (const auto& t : truth) {
    if (!by_id.emplace(t.image_id, &t).second) {
      throw InputError("duplicate image_id in truth: " + t.image_id);
    }
  }
  if (predictions.size() != truth.size()) {
    throw InputError("id mismatch: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " truth rows");
  }

  constexpr auto K = MetricsReport::kComponents;
  std::array<double, K> sum_sq{}, sum_abs{};
  std::map<std::string, bool> seen;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.image_id);
    if (it == by_id.end()) throw InputError("id mismatch: no truth row for '" + p.image_id + "'");
    if (!seen.emplace(p.image_id, true).second) {
      throw InputError("duplicate image_id in predictions: " + p.image_id);
    }
    const auto pv = components_of(p);
    const auto tv = components_of(*it->second);
    for (std::size_t k = 0; k < K; ++k) {
      const double e = pv[k] - tv[k];
      sum_sq[k] += e * e;
      sum_abs[k] += std::abs(e);
    }
  }

  MetricsReport report;
  report.samples = predictions.size();
  report.overall_mode = overall;
  double pooled_sq = 0, pooled_abs = 0;
  for (std::size_t k = 0; k < K; ++k) {
    report.components[k] = metrics_of(sum_sq[k], sum_abs[k], report.samples);
    pooled_sq += sum_sq[k];
    pooled_abs += sum_abs[k];
  }
  if (overall == OverallMode::Pooled) {
    report.overall = metrics_of(pooled_sq, pooled_abs, report.samples * K);
  } else {
    for (const auto& c : report.components) {
      report.overall.rmse += c.rmse / K;
      report.overall.mae += c.mae / K;
    }
  }
  return report;
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  out << "# " << report.samples << " samples; overall = "
      << (report.overall_mode == OverallMode::Pooled ? "pooled over all five components' errors"
                                                     : "mean of the five per-component values")
      << "; clover = white + red\n";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(14) << "component" << std::right << std::setw(12) << "RMSE"
     << std::setw(12) << "MAE" << '\n';
  const auto& names = MetricsReport::component_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    os << std::left << std::setw(14) << names[k] << std::right << std::setw(12)
       << report.components[k].rmse << std::setw(12) << report.components[k].mae << '\n';
  }
  os << std::left << std::setw(14) << "overall" << std::right << std::setw(12) << report.overall.rmse
     << std::setw(12) << report.overall.mae << '\n';
  out << os.str();
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "component,rmse,mae\n";
  const auto& names = MetricsReport::component_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    out << names[k] << ',' << format_number(report.components[k].rmse) << ','
        << format_number(report.components[k].mae) << '\n';
  }
  out << "overall," << format_number(report.overall.rmse) << ',' << format_number(report.overall.mae)
      << '\n';
}

}  // namespace biomass
