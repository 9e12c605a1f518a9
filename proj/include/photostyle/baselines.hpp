#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/image.hpp"

namespace photostyle {

namespace reinhard {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

inline constexpr double kLogFloor = 1e-6;

inline constexpr Mat3 kRgbToLms = {{{0.3811, 0.5783, 0.0402}, {0.1967, 0.7244, 0.0782}, {0.0241, 0.1288, 0.8444}}};

inline Vec3 mul(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

inline Mat3 inverse(const Mat3& a) {
  Mat3 adj;
  adj[0][0] = a[1][1] * a[2][2] - a[1][2] * a[2][1];
  adj[0][1] = a[0][2] * a[2][1] - a[0][1] * a[2][2];
  adj[0][2] = a[0][1] * a[1][2] - a[0][2] * a[1][1];
  adj[1][0] = a[1][2] * a[2][0] - a[1][0] * a[2][2];
  adj[1][1] = a[0][0] * a[2][2] - a[0][2] * a[2][0];
  adj[1][2] = a[0][2] * a[1][0] - a[0][0] * a[1][2];
  adj[2][0] = a[1][0] * a[2][1] - a[1][1] * a[2][0];
  adj[2][1] = a[0][1] * a[2][0] - a[0][0] * a[2][1];
  adj[2][2] = a[0][0] * a[1][1] - a[0][1] * a[1][0];
  const double det = a[0][0] * adj[0][0] + a[0][1] * adj[1][0] + a[0][2] * adj[2][0];
  for (auto& row : adj)
    for (auto& v : row) v /= det;
  return adj;
}

/// Exact inverse of kRgbToLms. The rounded matrix usually quoted alongside
/// the forward one does not round-trip to 1e-6.
inline const Mat3& lms_to_rgb() {
  static const Mat3 m = inverse(kRgbToLms);
  return m;
}

inline Vec3 rgb_to_lab(const Vec3& rgb) {
  const Vec3 lms = mul(kRgbToLms, rgb);
  const Vec3 lg = {std::log10(std::max(lms[0], kLogFloor)), std::log10(std::max(lms[1], kLogFloor)),
                   std::log10(std::max(lms[2], kLogFloor))};
  return {(lg[0] + lg[1] + lg[2]) / std::sqrt(3.0), (lg[0] + lg[1] - 2.0 * lg[2]) / std::sqrt(6.0),
          (lg[0] - lg[1]) / std::sqrt(2.0)};
}

inline Vec3 lab_to_rgb(const Vec3& lab) {
  const double a = lab[0] / std::sqrt(3.0);
  const double b = lab[1] / std::sqrt(6.0);
  const double c = lab[2] / std::sqrt(2.0);
  const Vec3 lg = {a + b + c, a + b - c, a - 2.0 * b};
  const Vec3 lms = {std::pow(10.0, lg[0]), std::pow(10.0, lg[1]), std::pow(10.0, lg[2])};
  return mul(lms_to_rgb(), lms);
}

struct ChannelStats {
  Vec3 mean{0, 0, 0};
  Vec3 stddev{0, 0, 0};
};

template <typename Real>
ChannelStats lab_stats(const BasicImage<Real>& image) {
  ChannelStats s;
  const double n = static_cast<double>(image.pixel_count());
  std::vector<Vec3> lab(image.pixel_count());
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    lab[p] = rgb_to_lab({static_cast<double>(image.at_pixel(p, 0)), static_cast<double>(image.at_pixel(p, 1)),
                         static_cast<double>(image.at_pixel(p, 2))});
    for (std::size_t c = 0; c < 3; ++c) s.mean[c] += lab[p][c];
  }
  for (auto& m : s.mean) m /= n;
  for (const auto& v : lab)
    for (std::size_t c = 0; c < 3; ++c) s.stddev[c] += (v[c] - s.mean[c]) * (v[c] - s.mean[c]);
  for (auto& d : s.stddev) d = std::sqrt(d / n);
  return s;
}

}  // namespace reinhard

/// Global color transfer: match per-channel mean and standard deviation in
/// the decorrelated lαβ space. Channels with zero spread only get the mean
/// shift. The result is not clamped.
template <typename Real>
BasicImage<Real> reinhard_transfer(const BasicImage<Real>& input, const BasicImage<Real>& style) {
  if (input.empty() || style.empty()) {
    throw Error(ErrorCode::invalid_argument, "reinhard_transfer requires non-empty images");
  }
  const auto in_stats = reinhard::lab_stats(input);
  const auto st_stats = reinhard::lab_stats(style);
  BasicImage<Real> out(input.height(), input.width());
  for (std::size_t p = 0; p < input.pixel_count(); ++p) {
    auto lab = reinhard::rgb_to_lab({static_cast<double>(input.at_pixel(p, 0)),
                                     static_cast<double>(input.at_pixel(p, 1)),
                                     static_cast<double>(input.at_pixel(p, 2))});
    for (std::size_t c = 0; c < 3; ++c) {
      const double centered = lab[c] - in_stats.mean[c];
      const double scale = in_stats.stddev[c] > 1e-12 ? st_stats.stddev[c] / in_stats.stddev[c] : 1.0;
      lab[c] = centered * scale + st_stats.mean[c];
    }
    const auto rgb = reinhard::lab_to_rgb(lab);
    for (std::size_t c = 0; c < 3; ++c) out.at_pixel(p, c) = static_cast<Real>(rgb[c]);
  }
  return out;
}

}  // namespace photostyle
