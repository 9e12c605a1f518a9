#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/image.hpp"

namespace photostyle {

/// Activations of one layer as an N x D matrix (filters x spatial positions),
/// filter-major with row-major spatial order inside each row.
template <typename Real = double>
struct FeatureMap {
  std::string layer_name;
  std::size_t n_filters = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Real> matrix;

  FeatureMap() = default;
  FeatureMap(std::string name, std::size_t filters, std::size_t h, std::size_t w, Real fill = Real(0))
      : layer_name(std::move(name)), n_filters(filters), height(h), width(w),
        matrix(filters * h * w, fill) {}

  [[nodiscard]] std::size_t spatial() const noexcept { return height * width; }
  Real& operator()(std::size_t filter, std::size_t pos) { return matrix[filter * spatial() + pos]; }
  const Real& operator()(std::size_t filter, std::size_t pos) const {
    return matrix[filter * spatial() + pos];
  }
  std::span<const Real> row(std::size_t filter) const {
    return std::span<const Real>(matrix).subspan(filter * spatial(), spatial());
  }

  [[nodiscard]] bool consistent() const { return matrix.size() == n_filters * height * width; }
  [[nodiscard]] bool same_shape(const FeatureMap& o) const {
    return n_filters == o.n_filters && height == o.height && width == o.width;
  }
  bool operator==(const FeatureMap&) const = default;
};

struct ConvLayerSpec {
  std::string name;
  std::size_t filters = 0;
  /// Cumulative downsampling relative to the image; must be a multiple of the
  /// previous layer's factor.
  std::size_t downsample = 1;
};

struct ExtractorSpec {
  enum class Kind { seeded_cnn, file };

  Kind kind = Kind::seeded_cnn;
  std::uint64_t seed = 7;
  double bias_range = 0.0;
  std::vector<ConvLayerSpec> layers = default_layers();
  std::filesystem::path path;

  /// Five stages with 8/16/32/64/64 filters at x1/x2/x4/x8/x8, stage four
  /// carrying the conv4_2 content layer.
  static std::vector<ConvLayerSpec> default_layers() {
    return {{"conv1_1", 8, 1},  {"conv2_1", 16, 2}, {"conv3_1", 32, 4},
            {"conv4_1", 64, 8}, {"conv4_2", 64, 8}, {"conv5_1", 64, 8}};
  }

  [[nodiscard]] bool has_layer(const std::string& name) const {
    return std::any_of(layers.begin(), layers.end(), [&](const auto& l) { return l.name == name; });
  }

  /// Human-readable violations; empty when valid.
  [[nodiscard]] std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (kind == Kind::file) {
      if (path.empty()) out.emplace_back("extractor.path is required for kind = \"file\"");
      return out;
    }
    if (layers.empty()) out.emplace_back("extractor has no layers");
    std::set<std::string> seen;
    std::size_t previous = 1;
    for (const auto& l : layers) {
      if (!seen.insert(l.name).second) out.push_back("duplicate extractor layer '" + l.name + "'");
      if (l.filters == 0) out.push_back("layer '" + l.name + "' must have at least one filter");
      if (l.downsample < 1) {
        out.push_back("layer '" + l.name + "' downsample must be >= 1");
      } else if (l.downsample % previous != 0) {
        out.push_back("layer '" + l.name + "' downsample " + std::to_string(l.downsample) +
                      " is not a multiple of the previous factor " + std::to_string(previous));
      } else {
        previous = l.downsample;
      }
    }
    if (bias_range < 0) out.emplace_back("extractor.bias_range must be >= 0");
    return out;
  }
};

/// Features plus the matching Jacobian-transpose product: backward(g) returns
/// the gradient of sum_l <g_l, F_l(image)> with respect to the image pixels.
template <typename Real>
struct DifferentiableFeatures {
  std::vector<FeatureMap<Real>> features;
  std::function<BasicImage<Real>(const std::vector<FeatureMap<Real>>&)> backward;
};

template <typename Real = double>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  [[nodiscard]] virtual std::vector<std::string> layer_names() const = 0;
  [[nodiscard]] virtual std::vector<FeatureMap<Real>> extract(
      const BasicImage<Real>& image, const std::vector<std::string>& layers) const = 0;
  [[nodiscard]] virtual bool differentiable() const { return false; }
  [[nodiscard]] virtual DifferentiableFeatures<Real> extract_differentiable(
      const BasicImage<Real>&, const std::vector<std::string>&) const {
    throw Error(ErrorCode::invalid_argument, "this feature extractor does not provide gradients");
  }
};

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; avoids the library-defined
/// behaviour of std::uniform_real_distribution so weights match across
/// standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Real>
Tensor3<Real> average_pool(const Tensor3<Real>& in, std::size_t factor) {
  if (factor == 1) return in;
  Tensor3<Real> out(in.channels, in.height / factor, in.width / factor);
  const Real scale = Real(1) / static_cast<Real>(factor * factor);
  for (std::size_t c = 0; c < out.channels; ++c)
    for (std::size_t y = 0; y < out.height; ++y)
      for (std::size_t x = 0; x < out.width; ++x) {
        Real sum = 0;
        for (std::size_t dy = 0; dy < factor; ++dy)
          for (std::size_t dx = 0; dx < factor; ++dx) sum += in(c, y * factor + dy, x * factor + dx);
        out(c, y, x) = sum * scale;
      }
  return out;
}

/// Adjoint of average_pool; rows/columns dropped by the floor get zero.
template <typename Real>
Tensor3<Real> average_unpool(const Tensor3<Real>& grad, std::size_t factor, std::size_t height,
                             std::size_t width) {
  if (factor == 1) return grad;
  Tensor3<Real> out(grad.channels, height, width);
  const Real scale = Real(1) / static_cast<Real>(factor * factor);
  for (std::size_t c = 0; c < grad.channels; ++c)
    for (std::size_t y = 0; y < grad.height; ++y)
      for (std::size_t x = 0; x < grad.width; ++x) {
        const Real g = grad(c, y, x) * scale;
        for (std::size_t dy = 0; dy < factor; ++dy)
          for (std::size_t dx = 0; dx < factor; ++dx) out(c, y * factor + dy, x * factor + dx) += g;
      }
  return out;
}

}  // namespace detail

/// Untrained CNN with fixed-seed weights: per layer an average-pool to the
/// layer's resolution, a 3x3 stride-1 zero-padded convolution and a ReLU.
template <typename Real = double>
class SeededCnn final : public FeatureExtractor<Real> {
 public:
  explicit SeededCnn(ExtractorSpec spec) : spec_(std::move(spec)) {
    const auto problems = spec_.violations();
    if (!problems.empty()) throw Error(ErrorCode::invalid_argument, problems.front());
    if (spec_.kind != ExtractorSpec::Kind::seeded_cnn) {
      throw Error(ErrorCode::invalid_argument, "SeededCnn requires a seeded-cnn spec");
    }
    std::mt19937_64 rng(spec_.seed);
    std::size_t in_channels = 3;
    for (const auto& layer : spec_.layers) {
      Layer l;
      l.spec = layer;
      l.in_channels = in_channels;
      const double fan_in = static_cast<double>(in_channels * 9);
      const double fan_out = static_cast<double>(layer.filters * 9);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      l.weights.resize(layer.filters * in_channels * 9);
      for (auto& w : l.weights) w = static_cast<Real>((2.0 * detail::unit_uniform(rng) - 1.0) * bound);
      l.bias.resize(layer.filters);
      for (auto& b : l.bias) {
        b = static_cast<Real>((2.0 * detail::unit_uniform(rng) - 1.0) * spec_.bias_range);
      }
      layers_.push_back(std::move(l));
      in_channels = layer.filters;
    }
  }

  [[nodiscard]] const ExtractorSpec& spec() const noexcept { return spec_; }

  [[nodiscard]] std::vector<std::string> layer_names() const override {
    std::vector<std::string> names;
    for (const auto& l : spec_.layers) names.push_back(l.name);
    return names;
  }

  [[nodiscard]] bool differentiable() const override { return true; }

  [[nodiscard]] std::vector<FeatureMap<Real>> extract(const BasicImage<Real>& image,
                                                      const std::vector<std::string>& names) const override {
    const auto wanted = resolve(names);
    const auto pass = forward(image, deepest(wanted));
    return collect(pass, wanted);
  }

  [[nodiscard]] DifferentiableFeatures<Real> extract_differentiable(
      const BasicImage<Real>& image, const std::vector<std::string>& names) const override {
    const auto wanted = resolve(names);
    auto pass = std::make_shared<Pass>(forward(image, deepest(wanted)));
    DifferentiableFeatures<Real> out;
    out.features = collect(*pass, wanted);
    out.backward = [this, pass, wanted](const std::vector<FeatureMap<Real>>& upstream) {
      return backward(*pass, wanted, upstream);
    };
    return out;
  }

  /// Spatial size of a layer's output for an image of the given size.
  [[nodiscard]] std::pair<std::size_t, std::size_t> layer_shape(const std::string& name, std::size_t height,
                                                                std::size_t width) const {
    const auto& l = layers_[resolve({name}).front()];
    return {height / l.spec.downsample, width / l.spec.downsample};
  }

 private:
  struct Layer {
    ConvLayerSpec spec;
    std::size_t in_channels = 0;
    std::vector<Real> weights;  // [filter][in_channel][3][3]
    std::vector<Real> bias;
  };

  struct Pass {
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::vector<Tensor3<Real>> pooled;      // conv inputs
    std::vector<Tensor3<Real>> activations;  // post-ReLU outputs
  };

  [[nodiscard]] std::vector<std::size_t> resolve(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    for (const auto& name : names) {
      const auto it = std::find_if(spec_.layers.begin(), spec_.layers.end(),
                                   [&](const auto& l) { return l.name == name; });
      if (it == spec_.layers.end()) {
        throw Error(ErrorCode::unknown_layer, "unknown feature layer '" + name + "'");
      }
      idx.push_back(static_cast<std::size_t>(it - spec_.layers.begin()));
    }
    return idx;
  }

  static std::size_t deepest(const std::vector<std::size_t>& idx) {
    return idx.empty() ? 0 : *std::max_element(idx.begin(), idx.end()) + 1;
  }

  std::size_t pool_factor(std::size_t layer) const {
    const std::size_t previous = layer == 0 ? 1 : spec_.layers[layer - 1].downsample;
    return spec_.layers[layer].downsample / previous;
  }

  Pass forward(const BasicImage<Real>& image, std::size_t depth) const {
    Pass pass;
    pass.image_height = image.height();
    pass.image_width = image.width();
    Tensor3<Real> current = to_tensor(image);
    for (std::size_t l = 0; l < depth; ++l) {
      Tensor3<Real> pooled = detail::average_pool(current, pool_factor(l));
      Tensor3<Real> out = convolve(layers_[l], pooled);
      for (auto& v : out.data) v = v > Real(0) ? v : Real(0);
      pass.pooled.push_back(std::move(pooled));
      current = out;
      pass.activations.push_back(std::move(out));
    }
    return pass;
  }

  static Tensor3<Real> convolve(const Layer& layer, const Tensor3<Real>& in) {
    const std::size_t h = in.height;
    const std::size_t w = in.width;
    Tensor3<Real> out(layer.spec.filters, h, w);
    for (std::size_t f = 0; f < layer.spec.filters; ++f) {
      Real* dst = out.data.data() + f * h * w;
      std::fill(dst, dst + h * w, layer.bias[f]);
      for (std::size_t ci = 0; ci < layer.in_channels; ++ci) {
        const Real* src = in.data.data() + ci * h * w;
        const Real* kernel = layer.weights.data() + (f * layer.in_channels + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const Real k = kernel[ky * 3 + kx];
            const int oy = ky - 1;
            const int ox = kx - 1;
            const std::size_t y0 = oy < 0 ? 1 : 0;
            const std::size_t y1 = oy > 0 ? (h > 0 ? h - 1 : 0) : h;
            const std::size_t x0 = ox < 0 ? 1 : 0;
            const std::size_t x1 = ox > 0 ? (w > 0 ? w - 1 : 0) : w;
            for (std::size_t y = y0; y < y1; ++y) {
              Real* drow = dst + y * w;
              const Real* srow = src + (y + oy) * w + ox;
              for (std::size_t x = x0; x < x1; ++x) drow[x] += k * srow[x];
            }
          }
        }
      }
    }
    return out;
  }

  /// Adjoint of the convolution with respect to its input.
  static Tensor3<Real> convolve_transpose(const Layer& layer, const Tensor3<Real>& grad) {
    const std::size_t h = grad.height;
    const std::size_t w = grad.width;
    Tensor3<Real> out(layer.in_channels, h, w);
    for (std::size_t f = 0; f < layer.spec.filters; ++f) {
      const Real* g = grad.data.data() + f * h * w;
      for (std::size_t ci = 0; ci < layer.in_channels; ++ci) {
        Real* dst = out.data.data() + ci * h * w;
        const Real* kernel = layer.weights.data() + (f * layer.in_channels + ci) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const Real k = kernel[ky * 3 + kx];
            const int oy = ky - 1;
            const int ox = kx - 1;
            const std::size_t y0 = oy < 0 ? 1 : 0;
            const std::size_t y1 = oy > 0 ? (h > 0 ? h - 1 : 0) : h;
            const std::size_t x0 = ox < 0 ? 1 : 0;
            const std::size_t x1 = ox > 0 ? (w > 0 ? w - 1 : 0) : w;
            for (std::size_t y = y0; y < y1; ++y) {
              const Real* grow = g + y * w;
              Real* drow = dst + (y + oy) * w + ox;
              for (std::size_t x = x0; x < x1; ++x) drow[x] += k * grow[x];
            }
          }
        }
      }
    }
    return out;
  }

  std::vector<FeatureMap<Real>> collect(const Pass& pass, const std::vector<std::size_t>& wanted) const {
    std::vector<FeatureMap<Real>> out;
    for (std::size_t l : wanted) {
      const auto& a = pass.activations[l];
      FeatureMap<Real> fm;
      fm.layer_name = spec_.layers[l].name;
      fm.n_filters = a.channels;
      fm.height = a.height;
      fm.width = a.width;
      fm.matrix = a.data;
      out.push_back(std::move(fm));
    }
    return out;
  }

  BasicImage<Real> backward(const Pass& pass, const std::vector<std::size_t>& wanted,
                            const std::vector<FeatureMap<Real>>& upstream) const {
    if (upstream.size() != wanted.size()) {
      throw Error(ErrorCode::dimension_mismatch, "expected one upstream gradient per requested layer");
    }
    const std::size_t depth = pass.activations.size();
    std::vector<Tensor3<Real>> grads(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& a = pass.activations[l];
      grads[l] = Tensor3<Real>(a.channels, a.height, a.width);
    }
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      auto& g = grads[wanted[k]];
      const auto& u = upstream[k];
      if (u.n_filters != g.channels || u.height != g.height || u.width != g.width) {
        throw Error(ErrorCode::dimension_mismatch,
                    "upstream gradient shape mismatch on layer '" + spec_.layers[wanted[k]].name + "'");
      }
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += u.matrix[i];
    }
    Tensor3<Real> below;
    for (std::size_t l = depth; l-- > 0;) {
      Tensor3<Real>& g = grads[l];
      const auto& a = pass.activations[l];
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (!(a.data[i] > Real(0))) g.data[i] = Real(0);
      }
      const Tensor3<Real> dpooled = convolve_transpose(layers_[l], g);
      const std::size_t in_h = l == 0 ? pass.image_height : pass.activations[l - 1].height;
      const std::size_t in_w = l == 0 ? pass.image_width : pass.activations[l - 1].width;
      below = detail::average_unpool(dpooled, pool_factor(l), in_h, in_w);
      if (l > 0) {
        for (std::size_t i = 0; i < below.data.size(); ++i) grads[l - 1].data[i] += below.data[i];
      }
    }
    if (depth == 0) return BasicImage<Real>(pass.image_height, pass.image_width);
    return from_tensor(below);
  }

  ExtractorSpec spec_;
  std::vector<Layer> layers_;
};

}  // namespace photostyle
