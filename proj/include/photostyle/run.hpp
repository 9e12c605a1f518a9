#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "photostyle/config.hpp"
#include "photostyle/correspondence.hpp"
#include "photostyle/feature_file.hpp"
#include "photostyle/label_io.hpp"
#include "photostyle/losses.hpp"
#include "photostyle/matting.hpp"
#include "photostyle/optimize.hpp"
#include "photostyle/png_io.hpp"
#include "photostyle/segmentation.hpp"
#include "photostyle/transfer.hpp"

namespace photostyle {

/// Errors caused by the user's inputs rather than by the computation.
inline bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_failure:
    case ErrorCode::decode_failure:
    case ErrorCode::unsupported_color_type:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::image_too_small:
    case ErrorCode::image_too_large:
    case ErrorCode::unknown_layer:
    case ErrorCode::parse_error:
    case ErrorCode::unknown_label:
    case ErrorCode::unmapped_label:
    case ErrorCode::orphan_label:
    case ErrorCode::config_error:
      return true;
    default:
      return false;
  }
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Real>
void write_trace_csv(const std::vector<LossBreakdown<Real>>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  out << "iteration,content,style,matting,total\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& b = trace[k];
    out << k << ',' << format_number(b.content_weighted) << ',' << format_number(b.style_weighted) << ','
        << format_number(b.matting_term) << ',' << format_number(b.weighted_total) << '\n';
  }
  if (!out) throw Error(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

template <typename Real>
nlohmann::json breakdown_json(const LossBreakdown<Real>& b) {
  nlohmann::json j;
  j["content"] = static_cast<double>(b.content_weighted);
  j["style"] = static_cast<double>(b.style_weighted);
  j["matting"] = static_cast<double>(b.matting_term);
  j["total"] = static_cast<double>(b.weighted_total);
  for (const auto& [layer, v] : b.content_per_layer) j["content_per_layer"][layer] = static_cast<double>(v);
  for (const auto& [layer, v] : b.style_per_layer) j["style_per_layer"][layer] = static_cast<double>(v);
  return j;
}

template <typename Real>
nlohmann::json stage_json(const StageResult<Real>& s) {
  return {{"termination", to_string(s.termination)},
          {"iterations", s.trace.empty() ? 0 : s.trace.size() - 1},
          {"evaluations", s.evaluations},
          {"final", breakdown_json(s.trace.back())}};
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  std::ostringstream text;
  text << toml::json_formatter{to_toml(cfg)};
  return nlohmann::json::parse(text.str());
}

template <typename Real = double>
struct PreparedInputs {
  BasicImage<Real> input;
  BasicImage<Real> style;
  LabelMaskStack<Real> input_masks;
  LabelMaskStack<Real> style_masks;
};

/// Loads images and labels and turns labels into mask stacks sharing one
/// class list. Without labels both stacks are a single all-ones channel.
template <typename Real>
PreparedInputs<Real> prepare_inputs(const RunConfig& cfg) {
  PreparedInputs<Real> p{load_png<Real>(cfg.paths.input), load_png<Real>(cfg.paths.style), {}, {}};
  if (!cfg.has_labels()) {
    p.input_masks = LabelMaskStack<Real>::all_ones(p.input.height(), p.input.width());
    p.style_masks = LabelMaskStack<Real>::all_ones(p.style.height(), p.style.width());
    return p;
  }
  const auto palette = load_label_palette(cfg.paths.label_colors);
  const auto in_raw = load_label_png(cfg.paths.input_labels, palette);
  const auto st_raw = load_label_png(cfg.paths.style_labels, palette);
  if (in_raw.height != p.input.height() || in_raw.width != p.input.width()) {
    throw Error(ErrorCode::dimension_mismatch, "input labels are " + std::to_string(in_raw.height) + "x" +
                                                   std::to_string(in_raw.width) + " but the input image is " +
                                                   std::to_string(p.input.height()) + "x" +
                                                   std::to_string(p.input.width()));
  }
  if (st_raw.height != p.style.height() || st_raw.width != p.style.width()) {
    throw Error(ErrorCode::dimension_mismatch, "style labels are " + std::to_string(st_raw.height) + "x" +
                                                   std::to_string(st_raw.width) + " but the style image is " +
                                                   std::to_string(p.style.height()) + "x" +
                                                   std::to_string(p.style.width()));
  }
  const auto st_labels = merge_labels(st_raw, cfg.merge);
  const auto in_labels = remap_orphans(merge_labels(in_raw, cfg.merge), st_labels, cfg.orphans);
  const auto present = in_labels.present_labels();
  const std::vector<std::string> classes(present.begin(), present.end());
  p.input_masks = build_mask_stack<Real>(in_labels, classes);
  // Style-only classes have no counterpart in the output and are dropped.
  p.style_masks = build_mask_stack<Real>(st_labels, classes, true);
  return p;
}

struct RunReport {
  std::filesystem::path output_dir;
  std::string stage1_termination;
  std::string stage2_termination;
  double final_total = 0;
  std::vector<std::filesystem::path> artifacts;
};

namespace detail {

template <typename Real>
IterationCallback<Real> snapshot_callback(const RunConfig& cfg, const std::filesystem::path& dir, const char* stage,
                                          std::vector<std::filesystem::path>& artifacts) {
  const std::size_t every = cfg.diagnostics.snapshot_every;
  if (every == 0) return {};
  return [every, dir, stage, &artifacts](std::size_t k, const BasicImage<Real>& image, const LossBreakdown<Real>&) {
    if (k % every != 0) return;
    char name[64];
    std::snprintf(name, sizeof(name), "%s_iter%05zu.png", stage, k);
    save_png(image, dir / name);
    artifacts.push_back(dir / name);
  };
}

inline std::string lambda_dir_name(double lambda) {
  std::ostringstream s;
  s << "lambda_" << lambda;
  return s.str();
}

template <typename Real>
RunReport run_transfer_typed(const RunConfig& cfg) {
  RunReport report;
  const auto& dir = cfg.paths.output_dir;
  report.output_dir = dir;
  std::filesystem::create_directories(dir);

  const auto inputs = prepare_inputs<Real>(cfg);
  spdlog::info("input {}x{}, style {}x{}, {} class(es)", inputs.input.height(), inputs.input.width(),
               inputs.style.height(), inputs.style.width(), inputs.input_masks.channels());

  auto extractor = make_extractor<Real>(cfg.extractor);
  auto laplacian = build_matting_laplacian(inputs.input, cfg.matting);
  if (cfg.diagnostics.dump_laplacian) {
    laplacian.write_triplets(dir / "laplacian.txt");
    report.artifacts.push_back(dir / "laplacian.txt");
  }
  TransferObjective<Real> objective(*extractor, inputs.input, inputs.style, inputs.input_masks, inputs.style_masks,
                                    std::move(laplacian), cfg.weights);
  auto evaluate = [&objective](const BasicImage<Real>& image) { return objective.evaluate(image); };

  objective.set_lambda(0.0);
  spdlog::info("stage 1: up to {} iterations", cfg.stage1.max_iters);
  const auto stage1 = minimize(evaluate, noise_image<Real>(inputs.input.height(), inputs.input.width(), cfg.stage1.seed),
                               cfg.stage1, snapshot_callback<Real>(cfg, dir, "stage1", report.artifacts));
  objective.set_lambda(cfg.weights.lambda);
  spdlog::info("stage 2: lambda {}, up to {} iterations", cfg.weights.lambda, cfg.stage2.max_iters);
  const auto stage2 = minimize(evaluate, stage1.image, cfg.stage2,
                               snapshot_callback<Real>(cfg, dir, "stage2", report.artifacts));

  save_png(stage1.image, dir / "stage1.png");
  save_png(stage2.image, dir / "final.png");
  write_trace_csv(stage1.trace, dir / "stage1_trace.csv");
  write_trace_csv(stage2.trace, dir / "stage2_trace.csv");
  for (const char* f : {"stage1.png", "final.png", "stage1_trace.csv", "stage2_trace.csv"}) {
    report.artifacts.push_back(dir / f);
  }

  nlohmann::json manifest;
  manifest["config"] = config_json(cfg);
  manifest["classes"] = inputs.input_masks.classes;
  manifest["stage1"] = stage_json(stage1);
  manifest["stage2"] = stage_json(stage2);
  manifest["final_breakdown"] = breakdown_json(stage2.trace.back());

  if (cfg.diagnostics.correspondence) {
    const std::vector<std::string> layer{cfg.diagnostics.correspondence_layer};
    const auto out_feats = extractor->extract(stage2.image, layer);
    const auto st_feats = extractor->extract(inputs.style, layer);
    const auto map = patch_correspondence(out_feats.front(), st_feats.front(), cfg.diagnostics.correspondence_patch);
    save_png(map, dir / "correspondence.png");
    report.artifacts.push_back(dir / "correspondence.png");
    manifest["correspondence"] = {{"layer", layer.front()}, {"patch", cfg.diagnostics.correspondence_patch}};
  }

  for (double lambda : cfg.diagnostics.lambda_sweep) {
    const auto sub = dir / lambda_dir_name(lambda);
    std::filesystem::create_directories(sub);
    objective.set_lambda(lambda);
    spdlog::info("lambda sweep: {}", lambda);
    const auto swept = minimize(evaluate, stage1.image, cfg.stage2);
    save_png(swept.image, sub / "final.png");
    write_trace_csv(swept.trace, sub / "stage2_trace.csv");
    report.artifacts.push_back(sub / "final.png");
    report.artifacts.push_back(sub / "stage2_trace.csv");
    manifest["lambda_sweep"].push_back(
        {{"lambda", lambda}, {"directory", sub.filename().string()}, {"stage2", stage_json(swept)}});
  }

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
  report.artifacts.push_back(dir / "manifest.json");

  report.stage1_termination = to_string(stage1.termination);
  report.stage2_termination = to_string(stage2.termination);
  report.final_total = static_cast<double>(stage2.trace.back().weighted_total);
  return report;
}

}  // namespace detail

/// Runs the full two-stage pipeline and writes every artifact into the
/// configured output directory. The config is validated first.
inline RunReport run_transfer(const RunConfig& cfg) {
  if (auto problems = validate(cfg); !problems.empty()) throw ConfigError(std::move(problems));
  if (cfg.precision == Precision::f32) return detail::run_transfer_typed<float>(cfg);
  return detail::run_transfer_typed<double>(cfg);
}

}  // namespace photostyle
