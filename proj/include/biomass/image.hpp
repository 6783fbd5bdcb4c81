#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace biomass {

/// RGB image with real-valued pixels in [0, 255], interleaved row-major
/// (y, x, channel).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  static constexpr int kChannels = 3;

  Image() = default;
  Image(int w, int h, float fill = 0.0f);

  float& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }

  bool operator==(const Image&) const = default;
};

/// Decodes a PNG or JPEG file as 3-channel RGB.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Pixels are rounded and clamped to [0, 255].
void write_png(const std::filesystem::path& path, const Image& image);

/// Nearest-neighbour resize using pixel-centre alignment. Same sampling
/// grid as an identity affine warp.
Image resize_nearest(const Image& image, int out_width, int out_height);

/// Supported image files in `dir`, sorted by filename.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace biomass
