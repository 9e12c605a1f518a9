#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "photostyle/features.hpp"
#include "photostyle/image.hpp"
#include "photostyle/losses.hpp"
#include "photostyle/segmentation.hpp"

namespace photostyle::test {

inline Image random_image(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Image image(h, w);
  for (auto& v : image.storage()) v = dist(rng);
  return image;
}

inline FeatureMap<double> random_features(const std::string& name, std::size_t n, std::size_t h, std::size_t w,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  FeatureMap<double> f(name, n, h, w);
  for (auto& v : f.matrix) v = dist(rng);
  return f;
}

/// Each pixel belongs to exactly one of `classes`; every class gets at least
/// one pixel when the image is large enough.
inline LabelMaskStack<double> random_partition(const std::vector<std::string>& classes, std::size_t h,
                                               std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
  LabelMaskStack<double> stack(classes, h, w);
  for (std::size_t p = 0; p < h * w; ++p) {
    const std::size_t c = p < classes.size() ? p : pick(rng);
    stack(c, p) = 1.0;
  }
  return stack;
}

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Central differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

inline Eigen::MatrixXd to_eigen(const FeatureMap<double>& f) {
  Eigen::MatrixXd m(static_cast<long>(f.n_filters), static_cast<long>(f.spatial()));
  for (std::size_t i = 0; i < f.n_filters; ++i)
    for (std::size_t j = 0; j < f.spatial(); ++j) m(static_cast<long>(i), static_cast<long>(j)) = f(i, j);
  return m;
}

/// Per-class masked Gram loss computed with dense matrix algebra.
inline double augmented_style_oracle(const FeatureMap<double>& out, const FeatureMap<double>& style,
                                     const LabelMaskStack<double>& out_masks,
                                     const LabelMaskStack<double>& style_masks, StyleNormalization norm) {
  const Eigen::MatrixXd fo = to_eigen(out);
  const Eigen::MatrixXd fs = to_eigen(style);
  const double n = static_cast<double>(out.n_filters);
  double total = 0;
  for (std::size_t c = 0; c < out_masks.channels(); ++c) {
    Eigen::VectorXd mo(static_cast<long>(out_masks.plane()));
    Eigen::VectorXd ms(static_cast<long>(style_masks.plane()));
    for (std::size_t p = 0; p < out_masks.plane(); ++p) mo(static_cast<long>(p)) = out_masks(c, p);
    for (std::size_t p = 0; p < style_masks.plane(); ++p) ms(static_cast<long>(p)) = style_masks(c, p);
    const double mean_o = mo.mean();
    const double mean_s = ms.mean();
    if (mean_o == 0 && mean_s == 0) continue;
    const Eigen::MatrixXd ao = fo * mo.asDiagonal();
    const Eigen::MatrixXd as = fs * ms.asDiagonal();
    const Eigen::MatrixXd diff = ao * ao.transpose() - as * as.transpose();
    double denom = n * n;
    if (norm == StyleNormalization::mask_mean) denom *= std::max(mean_o, 1e-8) * std::max(mean_s, 1e-8);
    total += diff.squaredNorm() / (2 * denom);
  }
  return total;
}

}  // namespace photostyle::test
