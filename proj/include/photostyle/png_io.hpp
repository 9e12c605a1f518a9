#pragma once

#include <png.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "photostyle/error.hpp"
#include "photostyle/image.hpp"

namespace photostyle {

/// Decoded PNG samples before normalization: always 3 channels, 8 or 16 bit.
struct RawRgb {
  std::size_t height = 0;
  std::size_t width = 0;
  int bit_depth = 8;
  bool had_alpha = false;
  std::vector<std::uint16_t> samples;  // height * width * 3
};

namespace detail {

struct PngReadState {
  const std::vector<std::uint8_t>* bytes = nullptr;
  std::size_t offset = 0;
  char message[256] = {};
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes->size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, state->bytes->data() + state->offset, count);
  state->offset += count;
}

inline void png_record_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg);
  png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

enum class DecodeStatus { ok, decode_failure, unsupported };

// No object with a non-trivial destructor may be constructed between setjmp
// and the end of this function; scratch buffers are owned by the caller.
inline DecodeStatus decode_png(const std::vector<std::uint8_t>& bytes, bool allow_palette,
                               RawRgb& out, PngReadState& state, std::vector<png_bytep>& rows,
                               std::vector<std::uint8_t>& buffer) {
  state.bytes = &bytes;
  state.offset = 0;
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    std::snprintf(state.message, sizeof(state.message), "not a PNG file");
    return DecodeStatus::decode_failure;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_record_error,
                                           png_ignore_warning);
  if (png == nullptr) return DecodeStatus::decode_failure;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return DecodeStatus::decode_failure;
  }
  DecodeStatus status = DecodeStatus::ok;
  if (setjmp(png_jmpbuf(png))) {
    status = DecodeStatus::decode_failure;
  } else {
    png_set_read_fn(png, &state, png_read_from_memory);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    const bool rgb = color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA;
    const bool palette = color_type == PNG_COLOR_TYPE_PALETTE;
    if (!(rgb && (bit_depth == 8 || bit_depth == 16)) && !(palette && allow_palette)) {
      std::snprintf(state.message, sizeof(state.message),
                    "unsupported PNG color type %d with bit depth %d", color_type, bit_depth);
      status = DecodeStatus::unsupported;
    } else {
      if (palette) {
        png_set_palette_to_rgb(png);
        bit_depth = 8;
      }
      out.had_alpha = color_type == PNG_COLOR_TYPE_RGB_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS);
      if (out.had_alpha) png_set_strip_alpha(png);
      if (bit_depth == 16) png_set_swap(png);
      png_read_update_info(png, info);
      const std::size_t rowbytes = png_get_rowbytes(png, info);
      buffer.resize(rowbytes * height);
      rows.resize(height);
      for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
      png_read_image(png, rows.data());
      png_read_end(png, nullptr);

      out.height = height;
      out.width = width;
      out.bit_depth = bit_depth;
      out.samples.resize(static_cast<std::size_t>(height) * width * 3);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * 3; ++i) {
          std::uint16_t v;
          if (bit_depth == 16) {
            std::memcpy(&v, rows[y] + 2 * i, 2);
          } else {
            v = rows[y][i];
          }
          out.samples[y * width * 3 + i] = v;
        }
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return status;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RawRgb read_png_raw(const std::filesystem::path& path, bool allow_palette) {
  const auto bytes = read_file_bytes(path);
  RawRgb raw;
  PngReadState state;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  switch (decode_png(bytes, allow_palette, raw, state, rows, buffer)) {
    case DecodeStatus::ok:
      return raw;
    case DecodeStatus::unsupported:
      throw Error(ErrorCode::unsupported_color_type, path.string() + ": " + state.message);
    case DecodeStatus::decode_failure:
      break;
  }
  throw Error(ErrorCode::decode_failure, path.string() + ": " + state.message);
}

}  // namespace detail

/// Reads an 8- or 16-bit RGB/RGBA PNG and scales samples to [0,1].
/// Alpha is dropped with a warning.
template <typename Real = double>
BasicImage<Real> load_png(const std::filesystem::path& path) {
  const RawRgb raw = detail::read_png_raw(path, false);
  if (raw.had_alpha) {
    spdlog::warn("{}: alpha channel discarded", path.string());
  }
  const double scale = raw.bit_depth == 16 ? 65535.0 : 255.0;
  BasicImage<Real> image(raw.height, raw.width);
  auto data = image.data();
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    data[i] = static_cast<Real>(static_cast<double>(raw.samples[i]) / scale);
  }
  return image;
}

/// Label PNGs may be palette-indexed; returns 8-bit RGB triplets.
inline RawRgb load_png_rgb8(const std::filesystem::path& path) {
  RawRgb raw = detail::read_png_raw(path, true);
  if (raw.bit_depth == 16) {
    for (auto& v : raw.samples) v = static_cast<std::uint16_t>(v >> 8);
    raw.bit_depth = 8;
  }
  return raw;
}

inline std::uint8_t quantize_u8(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

/// Writes raw 8-bit RGB samples (height * width * 3).
inline void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                           const std::vector<std::uint8_t>& samples) {
  std::FILE* file = std::fopen(path.string().c_str(), "wb");
  if (file == nullptr) {
    throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  volatile bool failed = png == nullptr || info == nullptr;
  if (!failed) {
    if (setjmp(png_jmpbuf(png))) {
      failed = true;
    } else {
      png_init_io(png, file);
      png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                   PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                   PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);
      for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(samples.data() + y * width * 3));
      }
      png_write_end(png, nullptr);
    }
  }
  png_destroy_write_struct(&png, &info);
  const bool close_failed = std::fclose(file) != 0;
  if (failed || close_failed) {
    throw Error(ErrorCode::io_failure, "failed writing PNG '" + path.string() + "'");
  }
}

/// Writes an 8-bit palette PNG; `indices` holds one palette entry per pixel.
inline void write_png_indexed(const std::filesystem::path& path, std::size_t height, std::size_t width,
                              const std::vector<std::uint8_t>& indices,
                              const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (palette.empty() || palette.size() > 256) {
    throw Error(ErrorCode::invalid_argument, "palette must hold 1..256 colors");
  }
  std::vector<png_color> colors(palette.size());
  for (std::size_t i = 0; i < palette.size(); ++i) colors[i] = {palette[i][0], palette[i][1], palette[i][2]};
  std::FILE* file = std::fopen(path.string().c_str(), "wb");
  if (file == nullptr) {
    throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  volatile bool failed = png == nullptr || info == nullptr;
  if (!failed) {
    if (setjmp(png_jmpbuf(png))) {
      failed = true;
    } else {
      png_init_io(png, file);
      png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                   PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                   PNG_FILTER_TYPE_DEFAULT);
      png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
      png_write_info(png, info);
      for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(indices.data() + y * width));
      }
      png_write_end(png, nullptr);
    }
  }
  png_destroy_write_struct(&png, &info);
  const bool close_failed = std::fclose(file) != 0;
  if (failed || close_failed) {
    throw Error(ErrorCode::io_failure, "failed writing PNG '" + path.string() + "'");
  }
}

/// Clamps to [0,1] and quantizes to 8 bits with round(v * 255).
template <typename Real>
void save_png(const BasicImage<Real>& image, const std::filesystem::path& path) {
  if (!image.all_finite()) {
    throw Error(ErrorCode::non_finite, "refusing to save non-finite image to '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes(image.size());
  auto data = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize_u8(static_cast<double>(data[i]));
  write_png_rgb8(path, image.height(), image.width(), bytes);
}

}  // namespace photostyle
