#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "photostyle/photostyle.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("transfer");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("PHOTOSTYLE_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

void report_config_error(const photostyle::ConfigError& e) {
  for (const auto& p : e.problems()) std::cerr << "error: " << p << '\n';
}

bool is_feature_file(const std::filesystem::path& p) { return p.extension() == ".feat"; }

photostyle::FeatureMap<double> find_layer(const std::vector<photostyle::FeatureMap<double>>& maps,
                                          const std::string& layer, const std::filesystem::path& source) {
  for (const auto& m : maps) {
    if (m.layer_name == layer) return m;
  }
  throw photostyle::Error(photostyle::ErrorCode::unknown_layer,
                          "layer '" + layer + "' not found in '" + source.string() + "'");
}

photostyle::FeatureMap<double> layer_features(const std::filesystem::path& path, const std::string& layer,
                                              const photostyle::ExtractorSpec& spec) {
  if (is_feature_file(path)) return find_layer(photostyle::load_feature_file<double>(path), layer, path);
  const auto image = photostyle::load_png<double>(path);
  return photostyle::extract_features(image, spec, {layer}).front();
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Photographic style transfer with a matting-Laplacian photorealism term"};
  app.require_subcommand(1);

  std::filesystem::path config_path;
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  auto* run = app.add_subcommand("run", "Run the two-stage transfer described by a config file");
  run->add_option("--config", config_path, "TOML config")->required();
  run->add_option("--lambda", lambda, "Photorealism weight");
  run->add_option("--gamma", gamma, "Style weight");
  run->add_option("--seed", seed, "Noise initialization seed");
  run->add_option("--out", out_dir, "Output directory");

  std::filesystem::path in_path;
  std::filesystem::path style_path;
  std::filesystem::path out_path;
  auto* reinhard = app.add_subcommand("baseline-reinhard", "Global color transfer baseline");
  reinhard->add_option("--input", in_path, "Input PNG")->required();
  reinhard->add_option("--style", style_path, "Style PNG")->required();
  reinhard->add_option("--out", out_path, "Output PNG")->required();

  std::filesystem::path corr_output;
  std::filesystem::path corr_style;
  std::string corr_layer = "conv3_1";
  std::size_t corr_patch = 3;
  std::uint64_t extractor_seed = photostyle::ExtractorSpec{}.seed;
  std::filesystem::path corr_out;
  auto* corr = app.add_subcommand("correspondence", "Color each output patch by its nearest style patch");
  corr->add_option("--output-image", corr_output, "Output PNG or .feat file")->required();
  corr->add_option("--style", corr_style, "Style PNG or .feat file")->required();
  corr->add_option("--layer", corr_layer, "Feature layer");
  corr->add_option("--patch", corr_patch, "Patch size");
  corr->add_option("--extractor-seed", extractor_seed, "Seed of the built-in extractor");
  corr->add_option("--out", corr_out, "Output PNG")->required();

  auto* validate = app.add_subcommand("validate", "Check a config and print it in normalized form");
  validate->add_option("--config", config_path, "TOML config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*run) {
      auto cfg = photostyle::load_config(config_path);
      if (lambda) cfg.weights.lambda = *lambda;
      if (gamma) cfg.weights.gamma = *gamma;
      if (seed) {
        cfg.stage1.seed = *seed;
        cfg.stage2.seed = *seed;
      }
      if (out_dir) cfg.paths.output_dir = *out_dir;
      const auto report = photostyle::run_transfer(cfg);
      spdlog::info("stage 1 {}, stage 2 {}, final total {}", report.stage1_termination, report.stage2_termination,
                   report.final_total);
      for (const auto& a : report.artifacts) std::cout << a.string() << '\n';
    } else if (*reinhard) {
      const auto input = photostyle::load_png<double>(in_path);
      const auto style = photostyle::load_png<double>(style_path);
      photostyle::save_png(photostyle::reinhard_transfer(input, style), out_path);
    } else if (*corr) {
      photostyle::ExtractorSpec spec;
      spec.seed = extractor_seed;
      const auto out_feats = layer_features(corr_output, corr_layer, spec);
      const auto st_feats = layer_features(corr_style, corr_layer, spec);
      photostyle::save_png(photostyle::patch_correspondence(out_feats, st_feats, corr_patch), corr_out);
    } else if (*validate) {
      const auto cfg = photostyle::validate_config(config_path);
      std::cout << photostyle::to_toml(cfg) << '\n';
    }
  } catch (const photostyle::ConfigError& e) {
    report_config_error(e);
    return kExitInput;
  } catch (const photostyle::Error& e) {
    std::cerr << "error [" << photostyle::to_string(e.code()) << "]: " << e.what() << '\n';
    return photostyle::is_input_error(e.code()) ? kExitInput : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
