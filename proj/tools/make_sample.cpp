// Regenerates the bundled 64x64 sample pair under the given directory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "photostyle/image.hpp"
#include "photostyle/label_io.hpp"
#include "photostyle/png_io.hpp"
#include "photostyle/segmentation.hpp"

namespace {

namespace ps = photostyle;

constexpr std::size_t kSize = 64;

struct Rgb {
  double r, g, b;
};

Rgb mix(Rgb a, Rgb b, double t) { return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t}; }

// Daylight scene: sky over a building, a lake on the left, grass below.
std::string input_label(std::size_t y, std::size_t x) {
  if (y < 22) return "sky";
  if (x >= 26 && x < 50 && y < 44) return "house";
  if (y < 44) return "sky";
  if (x < 24 && y < 54) return "lake";
  return "grass";
}

// Dusk scene with a different layout and no water.
std::string style_label(std::size_t y, std::size_t x) {
  if (y < 28) return "sky";
  if (x < 30 && y < 48) return "skyscraper";
  if (y < 40) return "clouds";
  return "tree";
}

Rgb input_color(const std::string& label, std::size_t y, std::size_t x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  const double fy = static_cast<double>(y) / kSize;
  const double fx = static_cast<double>(x) / kSize;
  Rgb c;
  if (label == "sky") {
    c = mix({0.45, 0.65, 0.95}, {0.75, 0.85, 0.98}, fy * 1.5);
  } else if (label == "house") {
    const bool window = (y % 6 < 3) && (x % 5 < 2);
    c = window ? Rgb{0.30, 0.35, 0.45} : Rgb{0.70, 0.55, 0.45};
  } else if (label == "lake") {
    c = mix({0.15, 0.35, 0.60}, {0.25, 0.50, 0.70}, 0.5 + 0.5 * std::sin(fx * 12.0));
  } else {
    c = mix({0.25, 0.55, 0.20}, {0.40, 0.65, 0.25}, 0.5 + 0.5 * std::sin(fx * 9.0 + fy * 7.0));
  }
  return {c.r + jitter(rng), c.g + jitter(rng), c.b + jitter(rng)};
}

Rgb style_color(const std::string& label, std::size_t y, std::size_t x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.03, 0.03);
  const double fy = static_cast<double>(y) / kSize;
  const double fx = static_cast<double>(x) / kSize;
  Rgb c;
  if (label == "sky" || label == "clouds") {
    c = mix({0.35, 0.20, 0.45}, {0.98, 0.55, 0.25}, std::min(1.0, fy * 1.8));
    if (label == "clouds") c = mix(c, {0.95, 0.75, 0.60}, 0.4 + 0.3 * std::sin(fx * 15.0));
  } else if (label == "skyscraper") {
    const bool window = (y % 5 < 2) && (x % 4 < 2);
    c = window ? Rgb{0.95, 0.85, 0.40} : Rgb{0.15, 0.12, 0.20};
  } else {
    c = mix({0.10, 0.18, 0.10}, {0.30, 0.25, 0.12}, 0.5 + 0.5 * std::sin(fx * 11.0 - fy * 5.0));
  }
  return {c.r + jitter(rng), c.g + jitter(rng), c.b + jitter(rng)};
}

template <typename LabelFn, typename ColorFn>
void write_pair(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                const ps::LabelPalette& palette, std::uint64_t seed, LabelFn label_of, ColorFn color_of) {
  std::mt19937_64 rng(seed);
  ps::Image image(kSize, kSize);
  std::vector<std::string> names;
  for (std::size_t y = 0; y < kSize; ++y) {
    for (std::size_t x = 0; x < kSize; ++x) {
      const auto label = label_of(y, x);
      names.push_back(label);
      const Rgb c = color_of(label, y, x, rng);
      image(y, x, 0) = std::clamp(c.r, 0.0, 1.0);
      image(y, x, 1) = std::clamp(c.g, 0.0, 1.0);
      image(y, x, 2) = std::clamp(c.b, 0.0, 1.0);
    }
  }
  ps::save_png(image, image_path);
  ps::save_label_png(ps::LabelImage::from_names(kSize, kSize, names), palette, label_path);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_sample OUTPUT_DIR\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  const ps::LabelPalette palette = {
      {0x87CEEB, "sky"},  {0xB0C4DE, "clouds"}, {0x8B4513, "house"},
      {0x404040, "skyscraper"}, {0x1E90FF, "lake"}, {0x7CFC00, "grass"}, {0x228B22, "tree"},
  };
  nlohmann::json sidecar;
  for (const auto& [color, name] : palette) sidecar[ps::format_hex_color(color)] = name;
  std::ofstream(dir / "labels.json") << sidecar.dump(2) << '\n';

  write_pair(dir / "input.png", dir / "input_labels.png", palette, 11, input_label, input_color);
  write_pair(dir / "style.png", dir / "style_labels.png", palette, 23, style_label, style_color);

  std::ofstream(dir / "sample.toml") << R"([paths]
input = "input.png"
style = "style.png"
input_labels = "input_labels.png"
style_labels = "style_labels.png"
label_colors = "labels.json"
output_dir = "out"

[objective]
gamma = 100.0
lambda = 10000.0

[optimizer]
method = "lbfgs"
stage1_iters = 150
stage2_iters = 150
seed = 1

[diagnostics]
correspondence = true
correspondence_layer = "conv3_1"
)";
  std::cout << "wrote sample to " << dir.string() << '\n';
  return 0;
}
