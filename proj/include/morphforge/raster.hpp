#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphforge {

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("raster dimensions must be positive");
    if (channels != 1 && channels != 3) throw std::invalid_argument("raster channels must be 1 or 3");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  Raster(int width, int height, int channels, std::vector<std::uint8_t> data)
      : Raster(width, height, channels) {
    if (data.size() != data_.size()) {
      throw std::invalid_argument("raster data length " + std::to_string(data.size()) +
                                  " does not match " + std::to_string(data_.size()));
    }
    data_ = std::move(data);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  bool same_shape(const Raster& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_{0};
  int height_{0};
  int channels_{0};
  std::vector<std::uint8_t> data_;
};

/// Rounds half away from zero, then clamps to [0, 255].
inline std::uint8_t to_byte(double v) {
  const double r = std::round(v);
  if (!(r > 0.0)) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

/// Single-channel float image, used for intensity processing.
struct FloatImage {
  int width{0};
  int height{0};
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Luma in [0, 1]. RGB uses the Rec.601 weights.
inline FloatImage to_intensity(const Raster& r) {
  FloatImage out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      double v;
      if (r.channels() == 1) {
        v = r.at(x, y);
      } else {
        v = 0.299 * r.at(x, y, 0) + 0.587 * r.at(x, y, 1) + 0.114 * r.at(x, y, 2);
      }
      out.at(x, y) = static_cast<float>(v / 255.0);
    }
  }
  return out;
}

}  // namespace morphforge
