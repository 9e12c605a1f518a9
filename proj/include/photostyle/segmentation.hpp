#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "photostyle/error.hpp"

namespace photostyle {

/// Per-pixel label ids (row-major) with the vocabulary naming them.
struct LabelImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::string> names;

  LabelImage() = default;
  LabelImage(std::size_t h, std::size_t w, std::vector<std::string> vocabulary)
      : height(h), width(w), ids(h * w, 0), names(std::move(vocabulary)) {}

  /// Builds an image directly from per-pixel names; the vocabulary is the
  /// sorted set of distinct names.
  static LabelImage from_names(std::size_t h, std::size_t w, const std::vector<std::string>& pixels) {
    if (pixels.size() != h * w) {
      throw Error(ErrorCode::dimension_mismatch, "label pixel count does not match dimensions");
    }
    std::set<std::string> distinct(pixels.begin(), pixels.end());
    LabelImage out(h, w, std::vector<std::string>(distinct.begin(), distinct.end()));
    for (std::size_t p = 0; p < pixels.size(); ++p) out.ids[p] = *out.id_of(pixels[p]);
    return out;
  }

  [[nodiscard]] std::size_t pixel_count() const noexcept { return height * width; }

  [[nodiscard]] const std::string& name_of(std::uint32_t id) const {
    if (id >= names.size()) {
      throw Error(ErrorCode::unknown_label, "label id " + std::to_string(id) + " outside vocabulary");
    }
    return names[id];
  }
  [[nodiscard]] const std::string& label_at(std::size_t p) const { return name_of(ids[p]); }

  [[nodiscard]] std::optional<std::uint32_t> id_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - names.begin());
  }

  /// Names of labels that occur on at least one pixel, sorted.
  [[nodiscard]] std::set<std::string> present_labels() const {
    std::set<std::string> out;
    for (auto id : ids) out.insert(name_of(id));
    return out;
  }

  /// Pixelwise comparison by name, independent of the vocabulary order.
  [[nodiscard]] bool same_labels(const LabelImage& other) const {
    if (height != other.height || width != other.width) return false;
    for (std::size_t p = 0; p < pixel_count(); ++p) {
      if (label_at(p) != other.label_at(p)) return false;
    }
    return true;
  }
};

/// C soft or binary channels of size H x W, channel-major.
template <typename Real = double>
struct LabelMaskStack {
  std::vector<std::string> classes;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Real> data;

  LabelMaskStack() = default;
  LabelMaskStack(std::vector<std::string> cls, std::size_t h, std::size_t w, Real fill = Real(0))
      : classes(std::move(cls)), height(h), width(w), data(classes.size() * h * w, fill) {}

  /// Single all-ones channel: the unsegmented case.
  static LabelMaskStack all_ones(std::size_t h, std::size_t w, std::string name = "all") {
    return LabelMaskStack({std::move(name)}, h, w, Real(1));
  }

  [[nodiscard]] std::size_t channels() const noexcept { return classes.size(); }
  [[nodiscard]] std::size_t plane() const noexcept { return height * width; }
  Real& operator()(std::size_t c, std::size_t p) { return data[c * plane() + p]; }
  const Real& operator()(std::size_t c, std::size_t p) const { return data[c * plane() + p]; }

  [[nodiscard]] double channel_mean(std::size_t c) const {
    if (plane() == 0) return 0.0;
    double sum = 0;
    for (std::size_t p = 0; p < plane(); ++p) sum += static_cast<double>((*this)(c, p));
    return sum / static_cast<double>(plane());
  }
};

/// Fine label name -> merged class name. Names that appear as a target are
/// implicitly mapped to themselves, which makes merging idempotent.
struct MergeTable {
  std::map<std::string, std::string> mapping;

  [[nodiscard]] std::optional<std::string> lookup(const std::string& label) const {
    if (const auto it = mapping.find(label); it != mapping.end()) return it->second;
    for (const auto& [from, to] : mapping) {
      if (to == label) return label;
    }
    return std::nullopt;
  }

  /// Default reduction to sky/water/building/vegetation/ground/person/other.
  static MergeTable defaults() {
    MergeTable t;
    auto add = [&](const std::string& target, std::initializer_list<const char*> fine) {
      t.mapping[target] = target;
      for (const char* f : fine) t.mapping[f] = target;
    };
    add("sky", {"cloud", "clouds"});
    add("water", {"lake", "river", "ocean", "sea", "pool", "waterfall"});
    add("building", {"house", "skyscraper", "tower", "wall", "bridge"});
    add("vegetation", {"tree", "grass", "plant", "flower", "palm", "field"});
    add("ground", {"road", "sand", "earth", "mountain", "rock", "snow", "sidewalk", "floor", "hill"});
    add("person", {"people", "human"});
    add("other", {});
    return t;
  }
};

/// Orphan label -> ordered replacement candidates.
using OrphanPreferences = std::map<std::string, std::vector<std::string>>;

inline OrphanPreferences default_orphan_preferences() {
  return {
      {"sky", {"water", "building", "other"}},
      {"water", {"sky", "ground", "other"}},
      {"building", {"ground", "other"}},
      {"vegetation", {"ground", "other"}},
      {"ground", {"vegetation", "building", "other"}},
      {"person", {"other", "building"}},
      {"other", {"building", "ground"}},
  };
}

/// Channel c is 1 where the label equals classes[c] and 0 elsewhere. Pixels
/// whose label is not listed are an error unless `allow_unlisted`, in which
/// case they stay 0 in every channel.
template <typename Real = double>
LabelMaskStack<Real> build_mask_stack(const LabelImage& labels, const std::vector<std::string>& classes,
                                      bool allow_unlisted = false) {
  LabelMaskStack<Real> stack(classes, labels.height, labels.width);
  std::vector<std::optional<std::size_t>> channel_of(labels.names.size());
  for (std::size_t id = 0; id < labels.names.size(); ++id) {
    const auto it = std::find(classes.begin(), classes.end(), labels.names[id]);
    if (it != classes.end()) channel_of[id] = static_cast<std::size_t>(it - classes.begin());
  }
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const auto id = labels.ids[p];
    if (id >= channel_of.size() || !channel_of[id]) {
      if (allow_unlisted && id < channel_of.size()) continue;
      throw Error(ErrorCode::unknown_label,
                  "pixel (" + std::to_string(p / labels.width) + ", " + std::to_string(p % labels.width) +
                      ") has label '" + (id < labels.names.size() ? labels.names[id] : std::to_string(id)) +
                      "' which is not in the class list");
    }
    stack(*channel_of[id], p) = Real(1);
  }
  return stack;
}

inline LabelImage merge_labels(const LabelImage& labels, const MergeTable& table) {
  std::vector<std::string> merged_names;
  std::vector<std::uint32_t> remap(labels.names.size());
  std::vector<bool> used(labels.names.size(), false);
  for (auto id : labels.ids) used.at(id) = true;
  for (std::size_t id = 0; id < labels.names.size(); ++id) {
    if (!used[id]) continue;
    const auto target = table.lookup(labels.names[id]);
    if (!target) {
      throw Error(ErrorCode::unmapped_label, "label '" + labels.names[id] + "' has no entry in the merge table");
    }
    auto it = std::find(merged_names.begin(), merged_names.end(), *target);
    if (it == merged_names.end()) {
      merged_names.push_back(*target);
      it = merged_names.end() - 1;
    }
    remap[id] = static_cast<std::uint32_t>(it - merged_names.begin());
  }
  LabelImage out(labels.height, labels.width, std::move(merged_names));
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) out.ids[p] = remap[labels.ids[p]];
  return out;
}

/// Replaces every input label absent from the style image by the first of
/// its preferences that the style image does contain.
inline LabelImage remap_orphans(const LabelImage& input, const LabelImage& style,
                                const OrphanPreferences& preferences) {
  const auto style_set = style.present_labels();
  const auto input_set = input.present_labels();
  std::map<std::string, std::string> replacement;
  std::vector<std::string> unresolved;
  for (const auto& label : input_set) {
    if (style_set.contains(label)) continue;
    const auto it = preferences.find(label);
    std::optional<std::string> choice;
    if (it != preferences.end()) {
      for (const auto& candidate : it->second) {
        if (style_set.contains(candidate)) {
          choice = candidate;
          break;
        }
      }
    }
    if (choice) {
      replacement[label] = *choice;
    } else {
      unresolved.push_back(label);
    }
  }
  if (!unresolved.empty()) {
    std::string list;
    for (const auto& u : unresolved) list += (list.empty() ? "" : ", ") + ("'" + u + "'");
    throw Error(ErrorCode::orphan_label,
                "orphan labels with no preference present in the style image: " + list);
  }
  LabelImage out = input;
  for (const auto& [from, to] : replacement) {
    if (!out.id_of(to)) out.names.push_back(to);
  }
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const auto& name = input.label_at(p);
    if (const auto it = replacement.find(name); it != replacement.end()) out.ids[p] = *out.id_of(it->second);
  }
  return out;
}

namespace detail {

/// Overlap weights of source cells with each target cell when [0, source)
/// is split into `target` equal parts. Integer arithmetic in units of
/// 1/target keeps the boundaries exact.
inline std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t source,
                                                                            std::size_t target) {
  std::vector<std::vector<std::pair<std::size_t, double>>> weights(target);
  for (std::size_t t = 0; t < target; ++t) {
    const std::size_t lo = t * source;
    const std::size_t hi = (t + 1) * source;
    for (std::size_t s = lo / target; s < source && s * target < hi; ++s) {
      const std::size_t a = std::max(lo, s * target);
      const std::size_t b = std::min(hi, (s + 1) * target);
      if (b > a) weights[t].emplace_back(s, static_cast<double>(b - a) / static_cast<double>(source));
    }
  }
  return weights;
}

}  // namespace detail

/// Area-average pooling of every channel onto a target_h x target_w grid.
template <typename Real>
LabelMaskStack<Real> downsample_mask(const LabelMaskStack<Real>& stack, std::size_t target_h, std::size_t target_w) {
  if (target_h == 0 || target_w == 0) {
    throw Error(ErrorCode::invalid_argument, "mask downsampling target must be non-empty");
  }
  if (target_h > stack.height || target_w > stack.width) {
    throw Error(ErrorCode::invalid_argument,
                "mask downsampling target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                    " exceeds source " + std::to_string(stack.height) + "x" + std::to_string(stack.width));
  }
  const auto wy = detail::area_weights(stack.height, target_h);
  const auto wx = detail::area_weights(stack.width, target_w);
  LabelMaskStack<Real> out(stack.classes, target_h, target_w);
  for (std::size_t c = 0; c < stack.channels(); ++c) {
    for (std::size_t ty = 0; ty < target_h; ++ty) {
      for (std::size_t tx = 0; tx < target_w; ++tx) {
        double sum = 0;
        for (const auto& [sy, fy] : wy[ty]) {
          for (const auto& [sx, fx] : wx[tx]) {
            sum += fy * fx * static_cast<double>(stack(c, sy * stack.width + sx));
          }
        }
        out(c, ty * target_w + tx) = static_cast<Real>(sum);
      }
    }
  }
  return out;
}

}  // namespace photostyle
