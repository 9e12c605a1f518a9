#pragma once

#include <cstddef>
#include <limits>
#include <string>

#include "photostyle/error.hpp"
#include "photostyle/features.hpp"
#include "photostyle/image.hpp"

namespace photostyle {

struct PatchMatch {
  std::size_t y = 0;
  std::size_t x = 0;
  double distance = 0;
};

template <typename Real>
double patch_distance(const FeatureMap<Real>& a, std::size_t ay, std::size_t ax, const FeatureMap<Real>& b,
                      std::size_t by, std::size_t bx, std::size_t patch) {
  double sum = 0;
  for (std::size_t f = 0; f < a.n_filters; ++f) {
    for (std::size_t dy = 0; dy < patch; ++dy) {
      for (std::size_t dx = 0; dx < patch; ++dx) {
        const double d = static_cast<double>(a(f, (ay + dy) * a.width + ax + dx)) -
                         static_cast<double>(b(f, (by + dy) * b.width + bx + dx));
        sum += d * d;
      }
    }
  }
  return sum;
}

/// L2-nearest style patch for the output patch anchored at (y, x). Ties go
/// to the smallest Y, then the smallest X.
template <typename Real>
PatchMatch nearest_patch(const FeatureMap<Real>& out_feats, std::size_t y, std::size_t x,
                         const FeatureMap<Real>& style_feats, std::size_t patch) {
  PatchMatch best{0, 0, std::numeric_limits<double>::infinity()};
  for (std::size_t sy = 0; sy + patch <= style_feats.height; ++sy) {
    for (std::size_t sx = 0; sx + patch <= style_feats.width; ++sx) {
      const double d = patch_distance(out_feats, y, x, style_feats, sy, sx, patch);
      if (d < best.distance) best = {sy, sx, d};
    }
  }
  return best;
}

/// Colors each output patch's top-left pixel by the location of its nearest
/// style patch: (R,G,B) = (0, Y/height, X/width) with the style map's extent.
/// Pixels that anchor no full patch stay black.
template <typename Real>
BasicImage<Real> patch_correspondence(const FeatureMap<Real>& out_feats, const FeatureMap<Real>& style_feats,
                                      std::size_t patch = 3, std::size_t stride = 1) {
  if (out_feats.n_filters != style_feats.n_filters) {
    throw Error(ErrorCode::dimension_mismatch,
                "filter counts differ: " + std::to_string(out_feats.n_filters) + " vs " +
                    std::to_string(style_feats.n_filters));
  }
  if (patch == 0 || patch > out_feats.height || patch > out_feats.width || patch > style_feats.height ||
      patch > style_feats.width) {
    throw Error(ErrorCode::dimension_mismatch,
                "patch size " + std::to_string(patch) + " exceeds a feature map's spatial extent");
  }
  if (stride == 0) throw Error(ErrorCode::invalid_argument, "stride must be >= 1");
  BasicImage<Real> image(out_feats.height, out_feats.width);
  const double inv_h = 1.0 / static_cast<double>(style_feats.height);
  const double inv_w = 1.0 / static_cast<double>(style_feats.width);
  for (std::size_t y = 0; y + patch <= out_feats.height; y += stride) {
    for (std::size_t x = 0; x + patch <= out_feats.width; x += stride) {
      const PatchMatch m = nearest_patch(out_feats, y, x, style_feats, patch);
      image(y, x, 0) = Real(0);
      image(y, x, 1) = static_cast<Real>(static_cast<double>(m.y) * inv_h);
      image(y, x, 2) = static_cast<Real>(static_cast<double>(m.x) * inv_w);
    }
  }
  return image;
}

}  // namespace photostyle
