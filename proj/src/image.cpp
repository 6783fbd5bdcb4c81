#include "biomass/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>

#include "biomass/errors.hpp"

namespace biomass {

Image::Image(int w, int h, float fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * kChannels, fill) {
  if (w <= 0 || h <= 0) throw InputError("image dimensions must be positive");
}

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw InputError("image file not found: " + path.string());
  }
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot decode image: " + path.string());
  Image img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(x, y, 0) = row[x][2];
      img.at(x, y, 1) = row[x][1];
      img.at(x, y, 2) = row[x][0];
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  auto to_byte = [](float v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  };
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x][2] = to_byte(image.at(x, y, 0));
      row[x][1] = to_byte(image.at(x, y, 1));
      row[x][0] = to_byte(image.at(x, y, 2));
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw InputError("cannot write image: " + path.string());
}

Image resize_nearest(const Image& image, int out_width, int out_height) {
  Image out(out_width, out_height);
  // Same arithmetic as the identity case of the affine warp, so the two agree
  // pixel for pixel.
  const double sx = static_cast<double>(image.width) / out_width;
  const double sy = static_cast<double>(image.height) / out_height;
  const double half_w = out_width / 2.0, half_h = out_height / 2.0;
  auto clamp_index = [](double v, int n) {
    return std::clamp(static_cast<int>(std::floor(v)), 0, n - 1);
  };
  for (int y = 0; y < out_height; ++y) {
    const int src_y = clamp_index((y + 0.5 - half_h) * sy + image.height / 2.0, image.height);
    for (int x = 0; x < out_width; ++x) {
      const int src_x = clamp_index((x + 0.5 - half_w) * sx + image.width / 2.0, image.width);
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = image.at(src_x, src_y, c);
    }
  }
  return out;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace biomass
