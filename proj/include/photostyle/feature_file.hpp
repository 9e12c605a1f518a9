#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/features.hpp"
#include "photostyle/png_io.hpp"

namespace photostyle {

// FEAT1 layout, all integers little-endian:
//   "FEAT1\0" | u32 layer count | per layer:
//   u16 name length | UTF-8 name | u32 n_filters | u32 height | u32 width |
//   n_filters*height*width float32 values, filter-major then row-major.
inline constexpr std::array<char, 6> kFeat1Magic = {'F', 'E', 'A', 'T', '1', '\0'};

namespace detail {

class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  [[nodiscard]] const std::vector<char>& bytes() const noexcept { return bytes_; }

 private:
  void put(std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool u16(std::uint16_t& v) { return get(v, 2); }
  bool u32(std::uint32_t& v) { return get(v, 4); }
  bool f32(float& v) {
    std::uint32_t bits = 0;
    if (!get(bits, 4)) return false;
    v = std::bit_cast<float>(bits);
    return true;
  }
  bool raw(std::string& out, std::size_t n) {
    if (remaining() < n) return false;
    out.assign(reinterpret_cast<const char*>(bytes_.data() + offset_), n);
    offset_ += n;
    return true;
  }
  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - offset_; }

 private:
  template <typename T>
  bool get(T& v, int n) {
    if (remaining() < static_cast<std::size_t>(n)) return false;
    std::uint32_t acc = 0;
    for (int i = 0; i < n; ++i) acc |= static_cast<std::uint32_t>(bytes_[offset_ + i]) << (8 * i);
    offset_ += static_cast<std::size_t>(n);
    v = static_cast<T>(acc);
    return true;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t offset_ = 0;
};

}  // namespace detail

template <typename Real>
void write_feature_file(const std::vector<FeatureMap<Real>>& maps, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kFeat1Magic.data(), kFeat1Magic.size());
  w.u32(static_cast<std::uint32_t>(maps.size()));
  for (const auto& m : maps) {
    if (!m.consistent()) {
      throw Error(ErrorCode::dimension_mismatch, "feature map '" + m.layer_name + "' is inconsistent");
    }
    w.u16(static_cast<std::uint16_t>(m.layer_name.size()));
    w.raw(m.layer_name.data(), m.layer_name.size());
    w.u32(static_cast<std::uint32_t>(m.n_filters));
    w.u32(static_cast<std::uint32_t>(m.height));
    w.u32(static_cast<std::uint32_t>(m.width));
    for (Real v : m.matrix) w.f32(static_cast<float>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

template <typename Real = double>
std::vector<FeatureMap<Real>> load_feature_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  const std::string where = path.string() + ": ";
  if (bytes.size() < kFeat1Magic.size() ||
      std::memcmp(bytes.data(), kFeat1Magic.data(), kFeat1Magic.size()) != 0) {
    throw Error(ErrorCode::parse_error, where + "bad magic, expected FEAT1");
  }
  const std::vector<std::uint8_t> body(bytes.begin() + kFeat1Magic.size(), bytes.end());
  detail::ByteReader r(body);
  std::uint32_t count = 0;
  if (!r.u32(count)) throw Error(ErrorCode::parse_error, where + "truncated before layer count");
  if (count == 0) throw Error(ErrorCode::parse_error, where + "no layers");

  std::vector<FeatureMap<Real>> maps;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint16_t name_len = 0;
    FeatureMap<Real> m;
    if (!r.u16(name_len) || !r.raw(m.layer_name, name_len)) {
      throw Error(ErrorCode::parse_error,
                  where + "truncated in the name of layer #" + std::to_string(k));
    }
    std::uint32_t n = 0, h = 0, wd = 0;
    if (!r.u32(n) || !r.u32(h) || !r.u32(wd)) {
      throw Error(ErrorCode::parse_error, where + "truncated header of layer '" + m.layer_name + "'");
    }
    const std::size_t values = static_cast<std::size_t>(n) * h * wd;
    if (r.remaining() / 4 < values) {
      throw Error(ErrorCode::parse_error, where + "truncated data of layer '" + m.layer_name + "': expected " +
                                              std::to_string(values) + " values");
    }
    m.n_filters = n;
    m.height = h;
    m.width = wd;
    m.matrix.resize(values);
    for (auto& v : m.matrix) {
      float f = 0;
      r.f32(f);
      v = static_cast<Real>(f);
    }
    maps.push_back(std::move(m));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::parse_error, where + std::to_string(r.remaining()) + " trailing bytes after last layer");
  }
  return maps;
}

/// Serves precomputed activations (for example VGG-19 responses produced by
/// another tool). The image argument is ignored and no gradient is available.
template <typename Real = double>
class FileFeatureExtractor final : public FeatureExtractor<Real> {
 public:
  explicit FileFeatureExtractor(const std::filesystem::path& path) : maps_(load_feature_file<Real>(path)) {}
  explicit FileFeatureExtractor(std::vector<FeatureMap<Real>> maps) : maps_(std::move(maps)) {}

  [[nodiscard]] std::vector<std::string> layer_names() const override {
    std::vector<std::string> names;
    for (const auto& m : maps_) names.push_back(m.layer_name);
    return names;
  }

  [[nodiscard]] std::vector<FeatureMap<Real>> extract(const BasicImage<Real>&,
                                                      const std::vector<std::string>& names) const override {
    std::vector<FeatureMap<Real>> out;
    for (const auto& name : names) {
      const auto it = std::find_if(maps_.begin(), maps_.end(), [&](const auto& m) { return m.layer_name == name; });
      if (it == maps_.end()) {
        throw Error(ErrorCode::unknown_layer, "feature file is missing layer '" + name + "'");
      }
      out.push_back(*it);
    }
    return out;
  }

 private:
  std::vector<FeatureMap<Real>> maps_;
};

template <typename Real = double>
std::unique_ptr<FeatureExtractor<Real>> make_extractor(const ExtractorSpec& spec) {
  if (spec.kind == ExtractorSpec::Kind::file) return std::make_unique<FileFeatureExtractor<Real>>(spec.path);
  return std::make_unique<SeededCnn<Real>>(spec);
}

template <typename Real>
std::vector<FeatureMap<Real>> extract_features(const BasicImage<Real>& image, const ExtractorSpec& spec,
                                               const std::vector<std::string>& layers) {
  return make_extractor<Real>(spec)->extract(image, layers);
}

}  // namespace photostyle
