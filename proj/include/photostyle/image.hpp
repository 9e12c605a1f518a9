#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "photostyle/error.hpp"

namespace photostyle {

/// H x W x 3 image, row-major with interleaved channels and a top-left
/// origin. Loaded images hold values in [0,1]; optimization iterates may
/// leave that range but must stay finite.
template <typename Real = double>
class BasicImage {
 public:
  using value_type = Real;

  BasicImage() = default;
  BasicImage(std::size_t height, std::size_t width, Real fill = Real(0))
      : height_(height), width_(width), data_(height * width * 3, fill) {}
  BasicImage(std::size_t height, std::size_t width, std::vector<Real> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_ * 3) {
      throw Error(ErrorCode::dimension_mismatch,
                  "image data length " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(height_) + "x" +
                      std::to_string(width_) + "x3");
    }
  }

  [[nodiscard]] std::size_t height() const noexcept { return height_; }
  [[nodiscard]] std::size_t width() const noexcept { return width_; }
  [[nodiscard]] std::size_t pixel_count() const noexcept { return height_ * width_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  Real& operator()(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * width_ + x) * 3 + c];
  }
  const Real& operator()(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * 3 + c];
  }

  /// Channel c of pixel index p (row-major pixel order).
  Real& at_pixel(std::size_t p, std::size_t c) { return data_[p * 3 + c]; }
  const Real& at_pixel(std::size_t p, std::size_t c) const { return data_[p * 3 + c]; }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  std::vector<Real>& storage() noexcept { return data_; }
  const std::vector<Real>& storage() const noexcept { return data_; }

  [[nodiscard]] bool all_finite() const {
    for (Real v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename Other>
  [[nodiscard]] BasicImage<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return BasicImage<Other>(height_, width_, std::move(out));
  }

  bool operator==(const BasicImage&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Real> data_;
};

using Image = BasicImage<double>;

/// One image channel flattened in row-major pixel order.
template <typename Real = double>
struct BasicChannelVector {
  std::vector<Real> values;

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  bool operator==(const BasicChannelVector&) const = default;
};

using ChannelVector = BasicChannelVector<double>;

/// Channel-major activation volume (channels, height, width).
template <typename Real = double>
struct Tensor3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Real> data;

  Tensor3() = default;
  Tensor3(std::size_t c, std::size_t h, std::size_t w, Real fill = Real(0))
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  Real& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  const Real& operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  [[nodiscard]] std::size_t plane() const noexcept { return height * width; }
};

template <typename Real>
BasicChannelVector<Real> flatten_channel(const BasicImage<Real>& image, std::size_t c) {
  if (c > 2) {
    throw Error(ErrorCode::out_of_range,
                "channel " + std::to_string(c) + " out of range [0,2]");
  }
  BasicChannelVector<Real> out;
  out.values.resize(image.pixel_count());
  for (std::size_t p = 0; p < image.pixel_count(); ++p) out.values[p] = image.at_pixel(p, c);
  return out;
}

/// Writes v back into channel c of image; inverse of flatten_channel.
template <typename Real>
void unflatten_channel(const BasicChannelVector<Real>& v, std::size_t c, BasicImage<Real>& image) {
  if (c > 2) {
    throw Error(ErrorCode::out_of_range,
                "channel " + std::to_string(c) + " out of range [0,2]");
  }
  if (v.size() != image.pixel_count()) {
    throw Error(ErrorCode::dimension_mismatch,
                "channel vector length " + std::to_string(v.size()) + " != pixel count " +
                    std::to_string(image.pixel_count()));
  }
  for (std::size_t p = 0; p < image.pixel_count(); ++p) image.at_pixel(p, c) = v.values[p];
}

/// Image -> channel-major tensor with three channels.
template <typename Real>
Tensor3<Real> to_tensor(const BasicImage<Real>& image) {
  Tensor3<Real> t(3, image.height(), image.width());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t c = 0; c < 3; ++c) t(c, y, x) = image(y, x, c);
  return t;
}

template <typename Real>
BasicImage<Real> from_tensor(const Tensor3<Real>& t) {
  if (t.channels != 3) {
    throw Error(ErrorCode::dimension_mismatch, "tensor must have 3 channels to form an image");
  }
  BasicImage<Real> image(t.height, t.width);
  for (std::size_t y = 0; y < t.height; ++y)
    for (std::size_t x = 0; x < t.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) image(y, x, c) = t(c, y, x);
  return image;
}

}  // namespace photostyle
