#pragma once

// Dense rasters, bilinear sampling and Gaussian pyramids.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

#include "trackbench/geometry.hpp"

namespace trackbench {

template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_size(const Raster<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  /// Border-replicating access.
  const T& clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Raster<std::uint8_t>;
using DepthMap = Raster<float>;
using FloatImage = Raster<float>;

/// Bilinear interpolation; the caller guarantees 0 <= x <= w-1, 0 <= y <= h-1.
template <typename T>
float sample_bilinear(const Raster<T>& img, double x, double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::clamp(x0, 0, std::max(0, img.width() - 2));
  y0 = std::clamp(y0, 0, std::max(0, img.height() - 2));
  const float ax = static_cast<float>(x - x0);
  const float ay = static_cast<float>(y - y0);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const float a = static_cast<float>(img(x0, y0));
  const float b = static_cast<float>(img(x1, y0));
  const float c = static_cast<float>(img(x0, y1));
  const float d = static_cast<float>(img(x1, y1));
  return (1.f - ay) * ((1.f - ax) * a + ax * b) + ay * ((1.f - ax) * c + ax * d);
}

/// Bilinear sampling with border replication for coordinates outside the raster.
template <typename T>
float sample_bilinear_clamped(const Raster<T>& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  return sample_bilinear(img, x, y);
}

inline FloatImage to_float(const GrayImage& img, float scale = 1.0f / 255.0f) {
  FloatImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.values().size(); ++i) out.data()[i] = img.data()[i] * scale;
  return out;
}

/// 5-tap binomial blur followed by 2x decimation.
inline FloatImage pyr_down(const FloatImage& src) {
  static constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  const int w = src.width(), h = src.height();
  FloatImage tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * src.clamped(x + i, y);
      tmp(x, y) = s;
    }
  const int w2 = (w + 1) / 2, h2 = (h + 1) / 2;
  FloatImage dst(w2, h2);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x) {
      float s = 0.f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.clamped(2 * x, 2 * y + i);
      dst(x, y) = s;
    }
  return dst;
}

struct PyramidLevel {
  FloatImage image;
  FloatImage grad_x;
  FloatImage grad_y;
};

/// Central-difference image gradients (border replicated).
inline void compute_gradients(const FloatImage& img, FloatImage& gx, FloatImage& gy) {
  gx = FloatImage(img.width(), img.height());
  gy = FloatImage(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      gx(x, y) = 0.5f * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
      gy(x, y) = 0.5f * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
    }
}

/// Level 0 is full resolution; intensities are scaled to [0, 1].
inline std::vector<PyramidLevel> build_pyramid(const GrayImage& img, int levels) {
  std::vector<PyramidLevel> pyr(static_cast<std::size_t>(std::max(1, levels)));
  pyr[0].image = to_float(img);
  for (std::size_t l = 1; l < pyr.size(); ++l) pyr[l].image = pyr_down(pyr[l - 1].image);
  for (auto& level : pyr) compute_gradients(level.image, level.grad_x, level.grad_y);
  return pyr;
}

}  // namespace trackbench
