#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/features.hpp"
#include "photostyle/image.hpp"
#include "photostyle/matting.hpp"
#include "photostyle/segmentation.hpp"
#include "photostyle/sparse_sym.hpp"

namespace photostyle {

/// N x N Gram matrix of a layer's feature rows.
template <typename Real = double>
struct GramMatrix {
  std::size_t n = 0;
  std::vector<Real> values;

  GramMatrix() = default;
  explicit GramMatrix(std::size_t size, Real fill = Real(0)) : n(size), values(size * size, fill) {}

  Real& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
  const Real& operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

template <typename Real, typename Gradient>
struct LossAndGradient {
  Real value = 0;
  Gradient gradient;
};

/// How the per-class augmented style term is normalized.
enum class StyleNormalization {
  /// N_c^2 = N^2 * max(mean mask of the output's class, eps0) * max(mean mask of the style's class, eps0)
  mask_mean,
  /// N_c^2 = N^2 regardless of class size
  plain,
};

inline constexpr double kMaskMeanFloor = 1e-8;

namespace detail {

/// G = A Aᵀ where A rows are given with an optional per-column scale.
template <typename Real>
GramMatrix<Real> gram_scaled(const FeatureMap<Real>& features, const Real* column_scale) {
  const std::size_t n = features.n_filters;
  const std::size_t d = features.spatial();
  GramMatrix<Real> g(n);
  std::vector<Real> scaled;
  const Real* base = features.matrix.data();
  if (column_scale != nullptr) {
    scaled.resize(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) scaled[i * d + j] = base[i * d + j] * column_scale[j];
    base = scaled.data();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k < n; ++k) {
      Real sum = 0;
      const Real* a = base + i * d;
      const Real* b = base + k * d;
      for (std::size_t j = 0; j < d; ++j) sum += a[j] * b[j];
      g(i, k) = sum;
      g(k, i) = sum;
    }
  }
  return g;
}

template <typename Real>
void require_same_shape(const FeatureMap<Real>& a, const FeatureMap<Real>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(what) + ": feature shapes differ on layer '" + a.layer_name + "' (" +
                    std::to_string(a.n_filters) + "x" + std::to_string(a.height) + "x" + std::to_string(a.width) +
                    " vs " + std::to_string(b.n_filters) + "x" + std::to_string(b.height) + "x" +
                    std::to_string(b.width) + ")");
  }
}

}  // namespace detail

template <typename Real>
GramMatrix<Real> gram(const FeatureMap<Real>& features) {
  return detail::gram_scaled<Real>(features, nullptr);
}

/// (1 / 2ND) * sum (F_O - F_I)^2, gradient (F_O - F_I) / ND.
template <typename Real>
LossAndGradient<Real, FeatureMap<Real>> content_loss(const FeatureMap<Real>& output, const FeatureMap<Real>& target) {
  detail::require_same_shape(output, target, "content_loss");
  const std::size_t count = output.n_filters * output.spatial();
  if (count == 0) throw Error(ErrorCode::dimension_mismatch, "content_loss on empty layer '" + output.layer_name + "'");
  const Real inv = Real(1) / static_cast<Real>(count);
  LossAndGradient<Real, FeatureMap<Real>> out;
  out.gradient = FeatureMap<Real>(output.layer_name, output.n_filters, output.height, output.width);
  Real sum = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Real diff = output.matrix[i] - target.matrix[i];
    sum += diff * diff;
    out.gradient.matrix[i] = diff * inv;
  }
  out.value = sum * inv / Real(2);
  return out;
}

/// (1 / 2N^2) * sum (G_O - G_S)^2, gradient (G_O - G_S) / N^2 with respect to G_O.
template <typename Real>
LossAndGradient<Real, GramMatrix<Real>> style_loss(const GramMatrix<Real>& output, const GramMatrix<Real>& target,
                                                   std::size_t n_filters) {
  if (output.n != target.n || output.n != n_filters) {
    throw Error(ErrorCode::dimension_mismatch, "style_loss: Gram dimensions " + std::to_string(output.n) + " and " +
                                                   std::to_string(target.n) + " with " +
                                                   std::to_string(n_filters) + " filters");
  }
  const Real inv = Real(1) / static_cast<Real>(n_filters * n_filters);
  LossAndGradient<Real, GramMatrix<Real>> out;
  out.gradient = GramMatrix<Real>(output.n);
  Real sum = 0;
  for (std::size_t i = 0; i < output.values.size(); ++i) {
    const Real diff = output.values[i] - target.values[i];
    sum += diff * diff;
    out.gradient.values[i] = diff * inv;
  }
  out.value = sum * inv / Real(2);
  return out;
}

/// Per-class style statistics of a reference image at one layer.
template <typename Real>
struct StyleTarget {
  std::string layer_name;
  std::size_t n_filters = 0;
  std::vector<std::string> classes;
  std::vector<GramMatrix<Real>> grams;  // one per class
  std::vector<double> mask_means;       // one per class
};

template <typename Real>
void require_mask_matches(const FeatureMap<Real>& features, const LabelMaskStack<Real>& masks, const char* which) {
  if (masks.height != features.height || masks.width != features.width) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(which) + " masks are " + std::to_string(masks.height) + "x" +
                    std::to_string(masks.width) + " but layer '" + features.layer_name + "' is " +
                    std::to_string(features.height) + "x" + std::to_string(features.width));
  }
}

template <typename Real>
StyleTarget<Real> make_style_target(const FeatureMap<Real>& style_features, const LabelMaskStack<Real>& style_masks) {
  require_mask_matches(style_features, style_masks, "style");
  StyleTarget<Real> t;
  t.layer_name = style_features.layer_name;
  t.n_filters = style_features.n_filters;
  t.classes = style_masks.classes;
  for (std::size_t c = 0; c < style_masks.channels(); ++c) {
    t.grams.push_back(detail::gram_scaled(style_features, style_masks.data.data() + c * style_masks.plane()));
    t.mask_means.push_back(style_masks.channel_mean(c));
  }
  return t;
}

/// Normalizer 2 * N_c^2 denominator for class c (without the factor 2).
inline double class_normalizer(std::size_t n_filters, double output_mean, double style_mean,
                               StyleNormalization normalization) {
  const double n2 = static_cast<double>(n_filters) * static_cast<double>(n_filters);
  if (normalization == StyleNormalization::plain) return n2;
  return n2 * std::max(output_mean, kMaskMeanFloor) * std::max(style_mean, kMaskMeanFloor);
}

/// Augmented style loss against precomputed per-class style Grams. Output
/// features are masked column-wise by the input image's class masks.
template <typename Real>
LossAndGradient<Real, FeatureMap<Real>> augmented_style_loss(const FeatureMap<Real>& output,
                                                             const LabelMaskStack<Real>& output_masks,
                                                             const StyleTarget<Real>& target,
                                                             StyleNormalization normalization) {
  require_mask_matches(output, output_masks, "output");
  if (output_masks.classes != target.classes) {
    throw Error(ErrorCode::dimension_mismatch, "augmented_style_loss: class lists differ on layer '" +
                                                   output.layer_name + "'");
  }
  if (output.n_filters != target.n_filters) {
    throw Error(ErrorCode::dimension_mismatch, "augmented_style_loss: filter counts differ on layer '" +
                                                   output.layer_name + "'");
  }
  const std::size_t n = output.n_filters;
  const std::size_t d = output.spatial();
  LossAndGradient<Real, FeatureMap<Real>> out;
  out.gradient = FeatureMap<Real>(output.layer_name, n, output.height, output.width);
  Real total = 0;
  std::vector<Real> masked(n * d);
  for (std::size_t c = 0; c < output_masks.channels(); ++c) {
    const double out_mean = output_masks.channel_mean(c);
    const double style_mean = target.mask_means[c];
    if (out_mean == 0.0 && style_mean == 0.0) continue;
    const Real* mask = output_masks.data.data() + c * output_masks.plane();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) masked[i * d + j] = output.matrix[i * d + j] * mask[j];
    const GramMatrix<Real> g = detail::gram_scaled(output, mask);
    const Real norm = static_cast<Real>(class_normalizer(n, out_mean, style_mean, normalization));
    std::vector<Real> diff(n * n);
    Real sum = 0;
    for (std::size_t k = 0; k < n * n; ++k) {
      diff[k] = g.values[k] - target.grams[c].values[k];
      sum += diff[k] * diff[k];
    }
    total += sum / (Real(2) * norm);
    // dL/dF = (2 / norm) * (diff * masked) scaled column-wise by the mask.
    const Real scale = Real(2) / norm;
    for (std::size_t i = 0; i < n; ++i) {
      Real* grad_row = out.gradient.matrix.data() + i * d;
      for (std::size_t k = 0; k < n; ++k) {
        const Real coeff = scale * diff[i * n + k];
        if (coeff == Real(0)) continue;
        const Real* src = masked.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) grad_row[j] += coeff * src[j] * mask[j];
      }
    }
  }
  out.value = total;
  return out;
}

template <typename Real>
LossAndGradient<Real, FeatureMap<Real>> augmented_style_loss(const FeatureMap<Real>& output,
                                                             const FeatureMap<Real>& style,
                                                             const LabelMaskStack<Real>& output_masks,
                                                             const LabelMaskStack<Real>& style_masks,
                                                             StyleNormalization normalization =
                                                                 StyleNormalization::mask_mean) {
  if (output_masks.classes != style_masks.classes) {
    throw Error(ErrorCode::dimension_mismatch, "augmented_style_loss: class lists differ");
  }
  return augmented_style_loss(output, output_masks, make_style_target(style, style_masks), normalization);
}

template <typename Real = double>
struct LossBreakdown {
  std::vector<std::pair<std::string, Real>> content_per_layer;
  std::vector<std::pair<std::string, Real>> style_per_layer;
  Real matting_term = 0;
  Real weighted_total = 0;
  /// Σ α_ℓ L_c^ℓ
  Real content_weighted = 0;
  /// Σ β_ℓ L_s+^ℓ, before Γ
  Real style_weighted = 0;
};

struct ObjectiveWeights {
  std::map<std::string, double> content{{"conv4_2", 1.0}};
  std::map<std::string, double> style{
      {"conv1_1", 0.2}, {"conv2_1", 0.2}, {"conv3_1", 0.2}, {"conv4_1", 0.2}, {"conv5_1", 0.2}};
  double gamma = 1e2;
  double lambda = 1e4;
  StyleNormalization normalization = StyleNormalization::mask_mean;
};

/// Loss breakdown plus the gradient on the output image's pixels.
template <typename Real = double>
struct Evaluation {
  LossBreakdown<Real> breakdown;
  BasicImage<Real> gradient;

  [[nodiscard]] Real value() const { return breakdown.weighted_total; }
};

/// The full objective for one input/style pair. Targets (content features,
/// per-class style Grams, downsampled masks) are computed once here.
template <typename Real = double>
class TransferObjective {
 public:
  TransferObjective(const FeatureExtractor<Real>& extractor, const BasicImage<Real>& input,
                    const BasicImage<Real>& style, const LabelMaskStack<Real>& input_masks,
                    const LabelMaskStack<Real>& style_masks, std::optional<SparseSym<Real>> laplacian,
                    ObjectiveWeights weights)
      : extractor_(extractor), weights_(std::move(weights)), laplacian_(std::move(laplacian)),
        height_(input.height()), width_(input.width()) {
    if (!extractor_.differentiable()) {
      throw Error(ErrorCode::invalid_argument, "the objective needs an extractor with gradients");
    }
    if (input_masks.height != input.height() || input_masks.width != input.width()) {
      throw Error(ErrorCode::dimension_mismatch, "input masks must match the input image size");
    }
    if (style_masks.height != style.height() || style_masks.width != style.width()) {
      throw Error(ErrorCode::dimension_mismatch, "style masks must match the style image size");
    }
    if (input_masks.classes != style_masks.classes) {
      throw Error(ErrorCode::dimension_mismatch, "input and style masks must share one class list");
    }
    if (laplacian_ && laplacian_->n() != input.pixel_count()) {
      throw Error(ErrorCode::dimension_mismatch, "laplacian does not match the input image");
    }
    for (const auto& name : extractor_.layer_names()) {
      const double a = weight_of(weights_.content, name);
      const double b = weight_of(weights_.style, name);
      if (a != 0.0 || b != 0.0) layers_.push_back(name);
    }
    for (const auto* table : {&weights_.content, &weights_.style}) {
      for (const auto& [name, w] : *table) {
        if (w != 0.0 && std::find(layers_.begin(), layers_.end(), name) == layers_.end()) {
          throw Error(ErrorCode::unknown_layer, "unknown feature layer '" + name + "'");
        }
      }
    }
    const auto input_features = extractor_.extract(input, layers_);
    const auto style_features = extractor_.extract(style, layers_);
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& fi = input_features[k];
      const auto& fs = style_features[k];
      if (fi.spatial() == 0 || fs.spatial() == 0) {
        throw Error(ErrorCode::image_too_small, "layer '" + layers_[k] + "' has an empty feature map");
      }
      LayerTargets t;
      t.content_weight = weight_of(weights_.content, layers_[k]);
      t.style_weight = weight_of(weights_.style, layers_[k]);
      if (t.content_weight != 0.0) t.content = fi;
      if (t.style_weight != 0.0) {
        t.output_masks = downsample_mask(input_masks, fi.height, fi.width);
        t.style = make_style_target(fs, downsample_mask(style_masks, fs.height, fs.width));
      }
      targets_.push_back(std::move(t));
    }
  }

  void set_lambda(double lambda) { weights_.lambda = lambda; }
  [[nodiscard]] const ObjectiveWeights& weights() const noexcept { return weights_; }
  [[nodiscard]] const std::vector<std::string>& layers() const noexcept { return layers_; }
  [[nodiscard]] const std::optional<SparseSym<Real>>& laplacian() const noexcept { return laplacian_; }

  [[nodiscard]] Evaluation<Real> evaluate(const BasicImage<Real>& output) const {
    if (output.height() != height_ || output.width() != width_) {
      throw Error(ErrorCode::dimension_mismatch, "output image must match the input image size");
    }
    Evaluation<Real> eval;
    auto& bd = eval.breakdown;
    const Real gamma = static_cast<Real>(weights_.gamma);
    const Real lambda = static_cast<Real>(weights_.lambda);

    auto pass = extractor_.extract_differentiable(output, layers_);
    std::vector<FeatureMap<Real>> upstream;
    upstream.reserve(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& f = pass.features[k];
      const auto& t = targets_[k];
      FeatureMap<Real> g(f.layer_name, f.n_filters, f.height, f.width);
      if (t.content_weight != 0.0) {
        const auto c = content_loss(f, *t.content);
        const Real a = static_cast<Real>(t.content_weight);
        bd.content_per_layer.emplace_back(f.layer_name, c.value);
        bd.content_weighted += a * c.value;
        for (std::size_t i = 0; i < g.matrix.size(); ++i) g.matrix[i] += a * c.gradient.matrix[i];
      }
      if (t.style_weight != 0.0) {
        const auto s = augmented_style_loss(f, *t.output_masks, *t.style, weights_.normalization);
        const Real b = static_cast<Real>(t.style_weight);
        bd.style_per_layer.emplace_back(f.layer_name, s.value);
        bd.style_weighted += b * s.value;
        for (std::size_t i = 0; i < g.matrix.size(); ++i) g.matrix[i] += gamma * b * s.gradient.matrix[i];
      }
      upstream.push_back(std::move(g));
    }
    eval.gradient = pass.backward(upstream);

    if (laplacian_) {
      bd.matting_term = matting_penalty(*laplacian_, output);
      if (lambda != Real(0)) {
        const auto mg = matting_gradient(*laplacian_, output);
        auto dst = eval.gradient.data();
        auto src = mg.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += lambda * src[i];
      }
    }
    bd.weighted_total = bd.content_weighted + gamma * bd.style_weighted + lambda * bd.matting_term;
    return eval;
  }

 private:
  struct LayerTargets {
    double content_weight = 0;
    double style_weight = 0;
    std::optional<FeatureMap<Real>> content;
    std::optional<LabelMaskStack<Real>> output_masks;
    std::optional<StyleTarget<Real>> style;
  };

  static double weight_of(const std::map<std::string, double>& table, const std::string& name) {
    const auto it = table.find(name);
    return it == table.end() ? 0.0 : it->second;
  }

  const FeatureExtractor<Real>& extractor_;
  ObjectiveWeights weights_;
  std::optional<SparseSym<Real>> laplacian_;
  std::size_t height_;
  std::size_t width_;
  std::vector<std::string> layers_;
  std::vector<LayerTargets> targets_;
};

}  // namespace photostyle
