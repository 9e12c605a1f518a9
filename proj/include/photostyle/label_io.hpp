#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "photostyle/error.hpp"
#include "photostyle/png_io.hpp"
#include "photostyle/segmentation.hpp"

namespace photostyle {

/// Sidecar mapping of 24-bit colors to label names, {"#RRGGBB": "label"}.
using LabelPalette = std::map<std::uint32_t, std::string>;

inline std::uint32_t parse_hex_color(const std::string& text) {
  if (text.size() != 7 || text[0] != '#') {
    throw Error(ErrorCode::parse_error, "label color '" + text + "' is not of the form #RRGGBB");
  }
  std::uint32_t value = 0;
  for (std::size_t i = 1; i < 7; ++i) {
    const int c = std::tolower(static_cast<unsigned char>(text[i]));
    int digit;
    if (c >= '0' && c <= '9') {
      digit = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      digit = c - 'a' + 10;
    } else {
      throw Error(ErrorCode::parse_error, "label color '" + text + "' has a non-hex digit");
    }
    value = value * 16 + static_cast<std::uint32_t>(digit);
  }
  return value;
}

inline std::string format_hex_color(std::uint32_t rgb) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%06X", rgb & 0xffffffu);
  return buf;
}

inline LabelPalette load_label_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open label sidecar '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::parse_error, path.string() + ": sidecar must be a JSON object");
  LabelPalette palette;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) {
      throw Error(ErrorCode::parse_error, path.string() + ": label for '" + key + "' must be a string");
    }
    palette[parse_hex_color(key)] = value.get<std::string>();
  }
  return palette;
}

/// Reads an indexed or RGB label PNG and names every pixel through the palette.
inline LabelImage load_label_png(const std::filesystem::path& path, const LabelPalette& palette) {
  const RawRgb raw = load_png_rgb8(path);
  std::set<std::string> distinct;
  for (const auto& [color, name] : palette) distinct.insert(name);
  LabelImage labels(raw.height, raw.width, std::vector<std::string>(distinct.begin(), distinct.end()));
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const std::uint32_t rgb = (static_cast<std::uint32_t>(raw.samples[p * 3]) << 16) |
                              (static_cast<std::uint32_t>(raw.samples[p * 3 + 1]) << 8) |
                              static_cast<std::uint32_t>(raw.samples[p * 3 + 2]);
    const auto it = palette.find(rgb);
    if (it == palette.end()) {
      throw Error(ErrorCode::unknown_label, path.string() + ": pixel (" + std::to_string(p / raw.width) + ", " +
                                                std::to_string(p % raw.width) + ") has color " +
                                                format_hex_color(rgb) + " missing from the sidecar");
    }
    labels.ids[p] = *labels.id_of(it->second);
  }
  return labels;
}

/// Writes labels as an indexed PNG whose palette holds the sidecar colors.
inline void save_label_png(const LabelImage& labels, const LabelPalette& palette, const std::filesystem::path& path) {
  std::map<std::string, std::uint8_t> index_of;
  std::vector<std::array<std::uint8_t, 3>> colors;
  for (const auto& [color, name] : palette) {
    if (index_of.contains(name)) continue;
    if (colors.size() == 256) throw Error(ErrorCode::invalid_argument, "more than 256 label colors");
    index_of[name] = static_cast<std::uint8_t>(colors.size());
    colors.push_back({static_cast<std::uint8_t>(color >> 16), static_cast<std::uint8_t>(color >> 8),
                      static_cast<std::uint8_t>(color)});
  }
  std::vector<std::uint8_t> indices(labels.pixel_count());
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const auto it = index_of.find(labels.label_at(p));
    if (it == index_of.end()) {
      throw Error(ErrorCode::unknown_label, "label '" + labels.label_at(p) + "' has no palette color");
    }
    indices[p] = it->second;
  }
  write_png_indexed(path, labels.height, labels.width, indices, colors);
}

}  // namespace photostyle
