#pragma once

// Helpers shared by the unit and acceptance tests: scratch directories,
// synthetic label sets and images, and a toy on-disk dataset.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "biomass/image.hpp"
#include "biomass/labels.hpp"
#include "biomass/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("biomass_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline biomass::Sample advanced(std::string id, double grass, double white, double red, double weeds,
                                int season = 1) {
  biomass::Sample s;
  s.image_id = std::move(id);
  s.harvest_season = season;
  s.category = biomass::Category::Advanced;
  s.labels.grass_pct = grass;
  s.labels.clover_pct = white + red;
  s.labels.white_pct = white;
  s.labels.red_pct = red;
  s.labels.weeds_pct = weeds;
  return s;
}

inline biomass::Sample basic(std::string id, double grass, double clover, double weeds, int season = 1) {
  biomass::Sample s;
  s.image_id = std::move(id);
  s.harvest_season = season;
  s.category = biomass::Category::Basic;
  s.labels.grass_pct = grass;
  s.labels.clover_pct = clover;
  s.labels.weeds_pct = weeds;
  return s;
}

/// Random valid dataset. Roughly `advanced_share` of rows carry the
/// white/red breakdown; at least two advanced rows have clover.
inline std::vector<biomass::Sample> random_dataset(biomass::Rng& rng, std::size_t n,
                                                   double advanced_share = 0.4) {
  std::vector<biomass::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    double a = rng.uniform(0.05, 1), b = rng.uniform(0.05, 1), c = rng.uniform(0.05, 1);
    const double sum = a + b + c;
    const double grass = 100 * a / sum, clover = 100 * b / sum, weeds = 100 - grass - clover;
    const int season = 1 + static_cast<int>(rng.index(4));
    const std::string id = "img" + std::to_string(1000 + i);
    if (i < 2 || rng.uniform01() < advanced_share) {
      const double wf = rng.uniform01();
      out.push_back(advanced(id, grass, clover * wf, clover - clover * wf, weeds, season));
    } else {
      out.push_back(basic(id, grass, clover, weeds, season));
    }
  }
  return out;
}

inline biomass::Image random_image(int w, int h, std::uint64_t seed) {
  biomass::Rng rng(seed);
  biomass::Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<float>(rng.index(256));
  return img;
}

/// Image whose colour statistics encode the label mix, plus texture noise,
/// so a small network can tell samples apart.
inline biomass::Image label_image(const biomass::LabelVector& l, int size, std::uint64_t seed) {
  biomass::Rng rng(seed);
  biomass::Image img(size, size);
  const double white = l.white_pct.value_or(0), red = l.red_pct.value_or(0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = rng.uniform01();
      double r = 40, g = 40, b = 40;
      if (u * 100 < l.grass_pct) {
        g = 200;
      } else if (u * 100 < l.grass_pct + white) {
        r = g = b = 230;
      } else if (u * 100 < l.grass_pct + white + red) {
        r = 220;
        b = 120;
      } else {
        r = 150;
        g = 110;
      }
      img.at(x, y, 0) = static_cast<float>(r);
      img.at(x, y, 1) = static_cast<float>(g);
      img.at(x, y, 2) = static_cast<float>(b);
    }
  }
  return img;
}

/// `n` fully labelled samples (mixed categories) with distinct label mixes.
inline std::vector<biomass::Sample> toy_samples(std::size_t n, std::uint64_t seed) {
  biomass::Rng rng(seed);
  std::vector<biomass::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    double parts[4];
    double sum = 0;
    for (auto& p : parts) sum += (p = rng.uniform(0.1, 1));
    for (auto& p : parts) p = std::round(1000 * p / sum) / 10;
    parts[3] = std::round((100 - parts[0] - parts[1] - parts[2]) * 10) / 10;
    auto s = advanced("toy" + std::to_string(10 + i), parts[0], parts[1], parts[2], parts[3],
                      1 + static_cast<int>(i % 4));
    if (i % 3 == 0) s.category = biomass::Category::Basic;
    out.push_back(s);
  }
  return out;
}

/// Writes a toy dataset: labels.csv and images/<id>.png.
inline std::vector<biomass::Sample> write_toy_dataset(const fs::path& dir, std::size_t n, int size,
                                                      std::uint64_t seed) {
  auto samples = toy_samples(n, seed);
  fs::create_directories(dir / "images");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    biomass::write_png(dir / "images" / (samples[i].image_id + ".png"),
                       label_image(samples[i].labels, size, seed * 1000 + i));
  }
  biomass::save_labels(dir / "labels.csv", samples);
  return samples;
}

}  // namespace testing
