#include "biomass/labels.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "biomass/errors.hpp"
#include "biomass/rng.hpp"

namespace biomass {

namespace {

constexpr std::string_view kHeader =
    "image_id,harvest_season,category,grass_pct,clover_pct,white_clover_pct,"
    "red_clover_pct,weeds_pct";
constexpr std::size_t kColumns = 8;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string row_error(std::size_t row, const std::string& msg) {
  return "labels CSV row " + std::to_string(row) + ": " + msg;
}

double parse_double(std::string_view field, std::size_t row, std::string_view column) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(v)) {
    throw InputError(row_error(row, "cannot parse " + std::string(column) + " value '" +
                                        std::string(field) + "'"));
  }
  return v;
}

std::optional<double> parse_optional(std::string_view field, std::size_t row,
                                     std::string_view column) {
  if (field.empty()) return std::nullopt;
  return parse_double(field, row, column);
}

Category parse_category(std::string_view field, std::size_t row) {
  std::string lower(field);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "basic") return Category::Basic;
  // Semi-advanced rows carry the same breakdown; they are grouped with advanced.
  if (lower == "advanced" || lower == "semi-advanced") return Category::Advanced;
  throw InputError(row_error(row, "unknown category '" + std::string(field) + "'"));
}

}  // namespace

std::string_view to_string(Category c) {
  return c == Category::Basic ? "basic" : "advanced";
}

std::optional<std::string> LabelVector::violation() const {
  const std::array<std::pair<const char*, std::optional<double>>, 5> fields{{
      {"grass_pct", grass_pct},
      {"clover_pct", clover_pct},
      {"white_clover_pct", white_pct},
      {"red_clover_pct", red_pct},
      {"weeds_pct", weeds_pct},
  }};
  for (const auto& [name, value] : fields) {
    if (value && (!(*value >= 0.0) || *value > 100.0)) {
      return std::string(name) + " outside [0, 100]";
    }
  }
  if (white_pct.has_value() != red_pct.has_value()) {
    return std::string("white_clover_pct and red_clover_pct must be both present or both absent");
  }
  const double total = grass_pct + clover_pct + weeds_pct;
  if (std::abs(total - 100.0) > kSimplexTolerance) {
    std::ostringstream os;
    os << "grass + clover + weeds = " << total << ", expected 100";
    return os.str();
  }
  if (has_breakdown() && std::abs(*white_pct + *red_pct - clover_pct) > kSimplexTolerance) {
    std::ostringstream os;
    os << "white + red = " << (*white_pct + *red_pct) << ", expected clover " << clover_pct;
    return os.str();
  }
  return std::nullopt;
}

std::optional<std::filesystem::path> find_image(const std::filesystem::path& dir,
                                                std::string_view stem) {
  for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"}) {
    auto p = dir / (std::string(stem) + ext);
    if (std::filesystem::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

std::vector<Sample> parse_labels_csv(std::istream& in, const std::filesystem::path& image_dir) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("labels CSV is empty (header row required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (trim(line) != kHeader) {
    throw InputError("labels CSV header mismatch: expected '" + std::string(kHeader) + "'");
  }

  std::vector<Sample> samples;
  std::set<std::string, std::less<>> seen;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cols = split_commas(line);
    if (cols.size() != kColumns) {
      throw InputError(row_error(row, "expected " + std::to_string(kColumns) +
                                          " columns, found " + std::to_string(cols.size())));
    }
    Sample s;
    s.image_id = std::string(cols[0]);
    if (s.image_id.empty()) throw InputError(row_error(row, "empty image_id"));
    if (!seen.insert(s.image_id).second) {
      throw InputError(row_error(row, "duplicate image_id '" + s.image_id + "'"));
    }
    int season = 0;
    auto [ptr, ec] = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), season);
    if (cols[1].empty() || ec != std::errc() || ptr != cols[1].data() + cols[1].size()) {
      throw InputError(row_error(row, "cannot parse harvest_season '" + std::string(cols[1]) + "'"));
    }
    if (season < 1 || season > 4) {
      throw InputError("sample '" + s.image_id + "': harvest_season " + std::to_string(season) +
                       " not in {1,2,3,4}");
    }
    s.harvest_season = season;
    s.category = parse_category(cols[2], row);
    s.labels.grass_pct = parse_double(cols[3], row, "grass_pct");
    s.labels.clover_pct = parse_double(cols[4], row, "clover_pct");
    s.labels.white_pct = parse_optional(cols[5], row, "white_clover_pct");
    s.labels.red_pct = parse_optional(cols[6], row, "red_clover_pct");
    s.labels.weeds_pct = parse_double(cols[7], row, "weeds_pct");

    if (auto v = s.labels.violation()) {
      throw InputError("sample '" + s.image_id + "': " + *v);
    }
    if (s.category == Category::Advanced && !s.labels.has_breakdown()) {
      throw InputError("sample '" + s.image_id +
                       "': advanced category requires white and red clover values");
    }
    if (!image_dir.empty()) {
      auto path = find_image(image_dir, s.image_id);
      if (!path) {
        throw InputError("missing image file: " + (image_dir / s.image_id).string() +
                         ".{png,jpg,jpeg}");
      }
      s.image_path = *path;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<Sample> load_dataset(const std::filesystem::path& labels_csv,
                                 const std::filesystem::path& image_dir) {
  std::ifstream in(labels_csv);
  if (!in) throw InputError("cannot open labels CSV: " + labels_csv.string());
  if (image_dir.empty() || !std::filesystem::is_directory(image_dir)) {
    throw InputError("image directory not found: " + image_dir.string());
  }
  return parse_labels_csv(in, image_dir);
}

std::vector<Sample> load_labels(const std::filesystem::path& labels_csv) {
  std::ifstream in(labels_csv);
  if (!in) throw InputError("cannot open labels CSV: " + labels_csv.string());
  return parse_labels_csv(in);
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

void write_labels_csv(std::ostream& out, const std::vector<Sample>& samples) {
  out << kHeader << '\n';
  for (const auto& s : samples) {
    const auto& l = s.labels;
    out << s.image_id << ',' << s.harvest_season << ',' << to_string(s.category) << ','
        << format_number(l.grass_pct) << ',' << format_number(l.clover_pct) << ','
        << (l.white_pct ? format_number(*l.white_pct) : "") << ','
        << (l.red_pct ? format_number(*l.red_pct) : "") << ',' << format_number(l.weeds_pct)
        << '\n';
  }
}

void save_labels(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_labels_csv(out, samples);
}

SplitManifest split_dataset(const std::vector<Sample>& samples, std::size_t val_count,
                            std::uint64_t seed) {
  if (val_count == 0 || val_count >= samples.size()) {
    throw InputError("val_count must be in [1, " + std::to_string(samples.size()) +
                     "), got " + std::to_string(val_count));
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed({seed, fnv1a("split")}));
  // Fisher-Yates; the first val_count positions become the validation set.
  for (std::size_t i = 0; i < val_count; ++i) {
    auto j = i + rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  SplitManifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < val_count ? m.val_ids : m.train_ids).push_back(samples[order[i]].image_id);
  }
  std::sort(m.train_ids.begin(), m.train_ids.end());
  std::sort(m.val_ids.begin(), m.val_ids.end());
  return m;
}

void write_manifest(std::ostream& out, const SplitManifest& m) {
  out << "seed=" << m.seed << '\n' << "train:\n";
  for (const auto& id : m.train_ids) out << id << '\n';
  out << "val:\n";
  for (const auto& id : m.val_ids) out << id << '\n';
}

SplitManifest read_manifest(std::istream& in) {
  SplitManifest m;
  std::string line;
  if (!std::getline(in, line) || trim(line).substr(0, 5) != "seed=") {
    throw InputError("split manifest: first line must be seed=<n>");
  }
  auto num = trim(line).substr(5);
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), m.seed);
  if (num.empty() || ec != std::errc() || ptr != num.data() + num.size()) {
    throw InputError("split manifest: invalid seed '" + std::string(num) + "'");
  }
  std::vector<std::string>* section = nullptr;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty()) continue;
    if (t == "train:") {
      section = &m.train_ids;
    } else if (t == "val:") {
      section = &m.val_ids;
    } else if (section == nullptr) {
      throw InputError("split manifest: id '" + std::string(t) + "' outside a section");
    } else {
      section->emplace_back(t);
    }
  }
  for (auto* ids : {&m.train_ids, &m.val_ids}) {
    if (!std::is_sorted(ids->begin(), ids->end()) ||
        std::adjacent_find(ids->begin(), ids->end()) != ids->end()) {
      throw InputError("split manifest: ids must be sorted and unique within each section");
    }
  }
  std::vector<std::string> both;
  std::set_intersection(m.train_ids.begin(), m.train_ids.end(), m.val_ids.begin(),
                        m.val_ids.end(), std::back_inserter(both));
  if (!both.empty()) throw InputError("split manifest: id '" + both.front() + "' in both sections");
  return m;
}

void save_manifest(const std::filesystem::path& path, const SplitManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_manifest(out, m);
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open split manifest: " + path.string());
  return read_manifest(in);
}

std::vector<Sample> select_samples(const std::vector<Sample>& samples,
                                   const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.image_id, &s);
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InputError("split manifest references unknown image_id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace biomass
