#include "biomass/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "biomass/errors.hpp"

namespace biomass {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::int64_t wrap(std::int64_t i, std::int64_t n) {
  const auto r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

void AugmentConfig::validate() const {
  if (rotation_deg < 0 || zoom_frac < 0 || shift_frac < 0 || shear_deg < 0 || channel_shift < 0) {
    throw InputError("augmentation ranges must be >= 0");
  }
  if (zoom_frac >= 1.0) throw InputError("augment.zoom_frac must be < 1 (zoom would reach 0)");
  if (out_size <= 0) throw InputError("augment.out_size must be > 0");
  if (variants_per_image < 1) throw InputError("augment.variants must be >= 1");
}

AugmentConfig AugmentConfig::disabled(int out_size, int variants) {
  AugmentConfig c;
  c.rotation_deg = c.zoom_frac = c.shift_frac = c.shear_deg = c.channel_shift = 0.0;
  c.hflip = false;
  c.out_size = out_size;
  c.variants_per_image = variants;
  return c;
}

AffineDraw draw_params(const AugmentConfig& config, Rng& rng) {
  AffineDraw d;
  d.angle_deg = rng.uniform(-config.rotation_deg, config.rotation_deg);
  d.shift_x = rng.uniform(-config.shift_frac, config.shift_frac);
  d.shift_y = rng.uniform(-config.shift_frac, config.shift_frac);
  d.shear_deg = rng.uniform(-config.shear_deg, config.shear_deg);
  d.zoom_x = rng.uniform(1.0 - config.zoom_frac, 1.0 + config.zoom_frac);
  d.zoom_y = rng.uniform(1.0 - config.zoom_frac, 1.0 + config.zoom_frac);
  const bool coin = rng.coin();
  d.flip = config.hflip && coin;
  for (auto& o : d.channel_offset) o = rng.uniform(-config.channel_shift, config.channel_shift);
  return d;
}

Image apply_affine(const Image& image, const AffineDraw& draw, int out_size) {
  if (out_size <= 0) throw InputError("out_size must be > 0");
  if (!(draw.zoom_x > 0.0) || !(draw.zoom_y > 0.0)) {
    throw InputError("degenerate zoom: zoom factors must be > 0");
  }
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * Image::kChannels) {
    throw InputError("invalid image buffer");
  }

  // A = rotation * shear * zoom, mapping output offsets to source offsets.
  const double th = radians(draw.angle_deg);
  const double sh = radians(draw.shear_deg);
  const double r00 = std::cos(th), r01 = -std::sin(th), r10 = std::sin(th), r11 = std::cos(th);
  const double s01 = -std::sin(sh), s11 = std::cos(sh);
  // R * S
  const double rs00 = r00, rs01 = r00 * s01 + r01 * s11;
  const double rs10 = r10, rs11 = r10 * s01 + r11 * s11;
  const double a00 = rs00 * draw.zoom_x, a01 = rs01 * draw.zoom_y;
  const double a10 = rs10 * draw.zoom_x, a11 = rs11 * draw.zoom_y;

  const double scale_x = static_cast<double>(image.width) / out_size;
  const double scale_y = static_cast<double>(image.height) / out_size;
  const double half_out = out_size / 2.0;
  const double origin_x = image.width / 2.0 + draw.shift_x * image.width;
  const double origin_y = image.height / 2.0 + draw.shift_y * image.height;

  Image out(out_size, out_size);
  for (int oy = 0; oy < out_size; ++oy) {
    const double cy = oy + 0.5 - half_out;
    for (int ox = 0; ox < out_size; ++ox) {
      const double cx = ox + 0.5 - half_out;
      const double px = a00 * cx + a01 * cy;
      const double py = a10 * cx + a11 * cy;
      const auto sx = wrap(static_cast<std::int64_t>(std::floor(px * scale_x + origin_x)), image.width);
      const auto sy = wrap(static_cast<std::int64_t>(std::floor(py * scale_y + origin_y)), image.height);
      const int dx = draw.flip ? out_size - 1 - ox : ox;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double v = image.at(static_cast<int>(sx), static_cast<int>(sy), c) + draw.channel_offset[c];
        out.at(dx, oy, c) = static_cast<float>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

std::uint64_t item_seed(std::uint64_t base_seed, int epoch, std::string_view image_id, int variant) {
  return derive_seed({base_seed, static_cast<std::uint64_t>(epoch), fnv1a(image_id),
                      static_cast<std::uint64_t>(variant)});
}

AugmentStream::AugmentStream(std::vector<Sample> samples, AugmentConfig config, int epoch,
                             std::uint64_t base_seed, SampleWeights weights, Loader loader)
    : samples_(std::move(samples)),
      config_(config),
      epoch_(epoch),
      base_seed_(base_seed),
      weights_(weights),
      loader_(std::move(loader)) {
  config_.validate();
}

AffineDraw AugmentStream::draw(std::size_t sample_index, int variant) const {
  Rng rng(item_seed(base_seed_, epoch_, samples_.at(sample_index).image_id, variant));
  return draw_params(config_, rng);
}

Image AugmentStream::load(std::size_t sample_index) const {
  const auto& s = samples_.at(sample_index);
  return loader_ ? loader_(s) : read_image(s.image_path);
}

AugmentedItem AugmentStream::item(std::size_t index) const {
  const auto v = static_cast<std::size_t>(config_.variants_per_image);
  const auto sample_index = index / v;
  return item(sample_index, static_cast<int>(index % v), load(sample_index));
}

AugmentedItem AugmentStream::item(std::size_t sample_index, int variant, const Image& source) const {
  const auto& s = samples_.at(sample_index);
  AugmentedItem it;
  it.image_id = s.image_id;
  it.variant = variant;
  it.image = apply_affine(source, draw(sample_index, variant), config_.out_size);
  it.labels = s.labels;
  it.weight = weights_.of(s.category);
  return it;
}

AugmentStream augment_epoch(const std::vector<Sample>& samples, const AugmentConfig& config,
                            int epoch, std::uint64_t base_seed, SampleWeights weights,
                            AugmentStream::Loader loader) {
  for (const auto& s : samples) {
    if (!s.labels.has_breakdown()) {
      throw InputError("sample '" + s.image_id + "' has incomplete labels; impute before augmenting");
    }
  }
  return AugmentStream(samples, config, epoch, base_seed, weights, std::move(loader));
}

}  // namespace biomass
