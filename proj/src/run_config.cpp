#include "biomass/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "biomass/errors.hpp"
#include "biomass/rng.hpp"

namespace biomass {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  N v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw InputError("config key '" + key + "': cannot parse '" + value + "'");
  }
  if constexpr (std::is_floating_point_v<N>) {
    if (!std::isfinite(v)) throw InputError("config key '" + key + "': value must be finite");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InputError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

std::vector<std::size_t> parse_head_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::string_view rest(text);
  while (true) {
    const auto pos = rest.find(',');
    const std::string item(trim(rest.substr(0, pos)));
    dims.push_back(parse_number<std::size_t>("head.dims", item));
    if (dims.back() == 0) throw InputError("head.dims entries must be > 0");
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  if (dims.back() != Head<float>::kOutputs) {
    throw InputError("head.dims must end with the 4-unit output layer, got '" + text + "'");
  }
  dims.pop_back();
  return dims;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "labels_csv",         "image_dir",          "out_dir",
      "seed",               "imputation.method",  "imputation.iterations",
      "imputation.fit_scope", "split.val_count",  "split.manifest",
      "train.epochs",       "train.batch_size",   "train.lr0",
      "train.decay",        "train.decay_mode",   "train.weight_basic",
      "train.weight_advanced", "augment.rotation_deg", "augment.zoom_frac",
      "augment.shift_frac", "augment.shear_deg",  "augment.hflip",
      "augment.channel_shift", "augment.out_size", "augment.variants",
      "extractor.source",   "extractor.channels", "extractor.preprocess",
      "head.dims",          "metrics.overall",
  };
  return k;
}

RunConfig RunConfig::parse(std::istream& in, const std::filesystem::path& base_dir,
                           bool require_paths) {
  std::map<std::string, std::pair<std::string, std::size_t>> values;
  const std::set<std::string> known(keys().begin(), keys().end());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view text(line);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key(trim(text.substr(0, eq)));
    std::string value(trim(text.substr(eq + 1)));
    if (!known.count(key)) throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (values.count(key)) throw InputError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    values.emplace(key, std::make_pair(value, lineno));
  }

  RunConfig c;
  auto& t = c.train;
  const auto get = [&](const std::string& key) -> const std::string* {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second.first;
  };
  for (const char* required : {"labels_csv", "image_dir", "out_dir"}) {
    if (require_paths && !get(required)) {
      throw InputError(std::string("config is missing required key '") + required + "'");
    }
  }
  if (auto v = get("labels_csv")) c.labels_csv = resolve(base_dir, *v);
  if (auto v = get("image_dir")) c.image_dir = resolve(base_dir, *v);
  if (auto v = get("out_dir")) c.out_dir = resolve(base_dir, *v);
  if (auto v = get("split.manifest")) c.split_manifest = resolve(base_dir, *v);
  if (auto v = get("seed")) t.seed = parse_number<std::uint64_t>("seed", *v);
  if (auto v = get("split.val_count")) c.val_count = parse_number<std::size_t>("split.val_count", *v);
  if (auto v = get("metrics.overall")) c.overall = parse_overall_mode(*v);

  t.imputation.seed = derive_seed({t.seed, fnv1a("imputation")});
  if (auto v = get("imputation.method")) t.imputation.variant = parse_imputation_variant(*v);
  if (auto v = get("imputation.iterations")) t.imputation.regression_iterations = parse_number<int>("imputation.iterations", *v);
  if (auto v = get("imputation.fit_scope")) t.imputation.fit_scope = parse_fit_scope(*v);

  if (auto v = get("train.epochs")) t.epochs = parse_number<int>("train.epochs", *v);
  if (auto v = get("train.batch_size")) t.batch_size = parse_number<int>("train.batch_size", *v);
  if (auto v = get("train.lr0")) t.lr0 = parse_number<double>("train.lr0", *v);
  if (auto v = get("train.decay")) t.decay = parse_number<double>("train.decay", *v);
  if (auto v = get("train.decay_mode")) t.decay_mode = parse_decay_mode(*v);
  if (auto v = get("train.weight_basic")) t.weights.basic = parse_number<double>("train.weight_basic", *v);
  if (auto v = get("train.weight_advanced")) t.weights.advanced = parse_number<double>("train.weight_advanced", *v);

  auto& a = t.augment;
  if (auto v = get("augment.rotation_deg")) a.rotation_deg = parse_number<double>("augment.rotation_deg", *v);
  if (auto v = get("augment.zoom_frac")) a.zoom_frac = parse_number<double>("augment.zoom_frac", *v);
  if (auto v = get("augment.shift_frac")) a.shift_frac = parse_number<double>("augment.shift_frac", *v);
  if (auto v = get("augment.shear_deg")) a.shear_deg = parse_number<double>("augment.shear_deg", *v);
  if (auto v = get("augment.hflip")) a.hflip = parse_bool("augment.hflip", *v);
  if (auto v = get("augment.channel_shift")) a.channel_shift = parse_number<double>("augment.channel_shift", *v);
  if (auto v = get("augment.out_size")) a.out_size = parse_number<int>("augment.out_size", *v);
  if (auto v = get("augment.variants")) a.variants_per_image = parse_number<int>("augment.variants", *v);

  auto& e = t.extractor;
  e.weights_source = RandomWeights{derive_seed({t.seed, fnv1a("extractor")})};
  if (auto v = get("extractor.source"); v && *v != "random") {
    e.weights_source = parse_weights_source(*v);
    if (auto* f = std::get_if<WeightFile>(&e.weights_source)) f->path = resolve(base_dir, f->path.string());
  }
  if (auto v = get("extractor.channels")) e.blocks = parse_blocks(*v);
  if (auto v = get("extractor.preprocess")) e.preprocess = parse_preprocess(*v);
  if (auto v = get("head.dims")) t.hidden = parse_head_dims(*v);

  t.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, bool require_paths) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path.string());
  return parse(in, path.parent_path(), require_paths);
}

}  // namespace biomass
