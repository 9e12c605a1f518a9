#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/image.hpp"
#include "photostyle/sparse_sym.hpp"

namespace photostyle {

struct MattingParams {
  double eps = 1e-5;
  int window_radius = 1;

  void validate() const {
    if (!(eps > 0)) throw Error(ErrorCode::invalid_argument, "matting eps must be > 0");
    if (window_radius < 1) throw Error(ErrorCode::invalid_argument, "matting window_radius must be >= 1");
  }
};

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Inverse of a symmetric positive definite 3x3 matrix via the adjugate.
inline Mat3 inverse3_adjugate(const Mat3& a) {
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

template <typename Real>
void check_window_fits(const BasicImage<Real>& image, const MattingParams& params) {
  params.validate();
  const std::size_t side = 2 * static_cast<std::size_t>(params.window_radius) + 1;
  if (image.height() < side || image.width() < side) {
    throw Error(ErrorCode::image_too_small,
                "image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                    " is smaller than the " + std::to_string(side) + "x" + std::to_string(side) +
                    " matting window");
  }
}

}  // namespace detail

/// Closed-form matting Laplacian of `image`. Only windows lying fully inside
/// the image contribute. For window k with n pixels, mean mu and covariance S,
///   L_ij += delta_ij - (1 + (I_i - mu)ᵀ (S + eps/n E)^-1 (I_j - mu)) / n
/// for every pixel pair (i, j) in the window.
template <typename Real>
SparseSym<Real> build_matting_laplacian(const BasicImage<Real>& image, const MattingParams& params = {}) {
  detail::check_window_fits(image, params);
  const std::size_t r = static_cast<std::size_t>(params.window_radius);
  const std::size_t side = 2 * r + 1;
  const std::size_t win = side * side;
  const double inv_win = 1.0 / static_cast<double>(win);
  const std::size_t height = image.height();
  const std::size_t width = image.width();

  std::vector<Triplet<Real>> triplets;
  triplets.reserve((height - 2 * r) * (width - 2 * r) * win * win);

  std::vector<std::uint32_t> idx(win);
  std::vector<std::array<double, 3>> centered(win);
  std::vector<std::array<double, 3>> projected(win);

  for (std::size_t cy = r; cy + r < height; ++cy) {
    for (std::size_t cx = r; cx + r < width; ++cx) {
      std::array<double, 3> mean{0, 0, 0};
      std::size_t q = 0;
      for (std::size_t y = cy - r; y <= cy + r; ++y) {
        for (std::size_t x = cx - r; x <= cx + r; ++x, ++q) {
          idx[q] = static_cast<std::uint32_t>(y * width + x);
          for (std::size_t c = 0; c < 3; ++c) {
            centered[q][c] = static_cast<double>(image(y, x, c));
            mean[c] += centered[q][c];
          }
        }
      }
      for (auto& m : mean) m *= inv_win;
      detail::Mat3 cov{};
      for (std::size_t p = 0; p < win; ++p) {
        for (std::size_t c = 0; c < 3; ++c) centered[p][c] -= mean[c];
        for (std::size_t a = 0; a < 3; ++a)
          for (std::size_t b = 0; b < 3; ++b) cov[a][b] += centered[p][a] * centered[p][b];
      }
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) cov[a][b] *= inv_win;
        cov[a][a] += params.eps * inv_win;
      }
      const detail::Mat3 inv = detail::inverse3_adjugate(cov);
      for (std::size_t p = 0; p < win; ++p) {
        for (std::size_t a = 0; a < 3; ++a) {
          projected[p][a] = inv[a][0] * centered[p][0] + inv[a][1] * centered[p][1] +
                            inv[a][2] * centered[p][2];
        }
      }
      for (std::size_t i = 0; i < win; ++i) {
        for (std::size_t j = 0; j < win; ++j) {
          const double affinity = 1.0 + centered[i][0] * projected[j][0] +
                                  centered[i][1] * projected[j][1] +
                                  centered[i][2] * projected[j][2];
          const double value = (i == j ? 1.0 : 0.0) - affinity * inv_win;
          triplets.push_back({idx[i], idx[j], static_cast<Real>(value)});
        }
      }
    }
  }
  return SparseSym<Real>::from_triplets(height * width, std::move(triplets));
}

template <typename Real>
void check_laplacian_matches(const SparseSym<Real>& laplacian, const BasicImage<Real>& output) {
  if (laplacian.n() != output.pixel_count()) {
    throw Error(ErrorCode::dimension_mismatch,
                "laplacian dimension " + std::to_string(laplacian.n()) + " != output pixel count " +
                    std::to_string(output.pixel_count()));
  }
}

/// Sum over the three channels of v_cᵀ L v_c.
template <typename Real>
Real matting_penalty(const SparseSym<Real>& laplacian, const BasicImage<Real>& output) {
  check_laplacian_matches(laplacian, output);
  Real total = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto channel = flatten_channel(output, c);
    total += laplacian.quadratic_form(channel.values);
  }
  return total;
}

/// Per channel 2 L v_c, laid out like the image.
template <typename Real>
BasicImage<Real> matting_gradient(const SparseSym<Real>& laplacian, const BasicImage<Real>& output) {
  check_laplacian_matches(laplacian, output);
  BasicImage<Real> grad(output.height(), output.width());
  BasicChannelVector<Real> product;
  product.values.resize(output.pixel_count());
  for (std::size_t c = 0; c < 3; ++c) {
    const auto channel = flatten_channel(output, c);
    laplacian.multiply(channel.values, product.values);
    for (auto& v : product.values) v *= Real(2);
    unflatten_channel(product, c, grad);
  }
  return grad;
}

}  // namespace photostyle
