#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "photostyle/error.hpp"
#include "photostyle/features.hpp"
#include "photostyle/losses.hpp"
#include "photostyle/matting.hpp"
#include "photostyle/optimize.hpp"
#include "photostyle/segmentation.hpp"

namespace photostyle {

enum class Precision { f64, f32 };

struct RunPaths {
  std::filesystem::path input;
  std::filesystem::path style;
  std::filesystem::path input_labels;
  std::filesystem::path style_labels;
  std::filesystem::path label_colors;
  std::filesystem::path output_dir = "out";
};

struct Diagnostics {
  bool correspondence = false;
  std::string correspondence_layer = "conv3_1";
  std::size_t correspondence_patch = 3;
  /// Write a PNG every K iterations of each stage; 0 disables.
  std::size_t snapshot_every = 0;
  std::vector<double> lambda_sweep;
  bool dump_laplacian = false;
};

struct RunConfig {
  RunPaths paths;
  ObjectiveWeights weights;
  MattingParams matting;
  ExtractorSpec extractor;
  OptimizerParams stage1;
  OptimizerParams stage2;
  MergeTable merge = MergeTable::defaults();
  OrphanPreferences orphans = default_orphan_preferences();
  Diagnostics diagnostics;
  Precision precision = Precision::f64;

  [[nodiscard]] bool has_labels() const { return !paths.input_labels.empty() || !paths.style_labels.empty(); }
};

/// Aggregated problems found while reading or validating a config.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(ErrorCode::config_error, join(problems)), problems_(std::move(problems)) {}

  [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) out += (out.empty() ? "" : "\n") + p;
    return out;
  }
  std::vector<std::string> problems_;
};

namespace detail {

class TomlReader {
 public:
  explicit TomlReader(std::vector<std::string>& problems) : problems_(problems) {}

  void check_keys(const toml::table& table, const std::string& section, std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, node] : table) {
      const std::string k(key.str());
      if (!ok.contains(k)) problems_.push_back("unknown key '" + qualify(section, k) + "'");
    }
  }

  template <typename T>
  void read(const toml::table& table, const std::string& section, const char* key, T& out) {
    const auto* node = table.get(key);
    if (node == nullptr) return;
    if (auto v = node->value<T>()) {
      out = *v;
    } else {
      problems_.push_back("'" + qualify(section, key) + "' has the wrong type");
    }
  }

  void read_size(const toml::table& table, const std::string& section, const char* key, std::size_t& out) {
    std::int64_t v = static_cast<std::int64_t>(out);
    const bool present = table.get(key) != nullptr;
    read(table, section, key, v);
    if (!present) return;
    if (v < 0) {
      problems_.push_back("'" + qualify(section, key) + "' must be >= 0");
    } else {
      out = static_cast<std::size_t>(v);
    }
  }

  void read_path(const toml::table& table, const std::string& section, const char* key,
                 const std::filesystem::path& base, std::filesystem::path& out) {
    std::string s;
    const bool present = table.get(key) != nullptr;
    read(table, section, key, s);
    if (!present) return;
    out = s.empty() ? std::filesystem::path{} : (base / s).lexically_normal();
  }

  std::map<std::string, double> read_weights(const toml::table& table, const std::string& section, const char* key,
                                             const std::map<std::string, double>& fallback) {
    const auto* node = table.get(key);
    if (node == nullptr) return fallback;
    const auto* t = node->as_table();
    if (t == nullptr) {
      problems_.push_back("'" + qualify(section, key) + "' must be a table of layer = weight");
      return fallback;
    }
    std::map<std::string, double> out;
    for (const auto& [layer, value] : *t) {
      if (auto w = value.value<double>()) {
        out[std::string(layer.str())] = *w;
      } else {
        problems_.push_back("'" + qualify(section, key) + "." + std::string(layer.str()) + "' must be a number");
      }
    }
    return out;
  }

  const toml::table* section(const toml::table& root, const char* name) {
    const auto* node = root.get(name);
    if (node == nullptr) return nullptr;
    if (const auto* t = node->as_table()) return t;
    problems_.push_back("'" + std::string(name) + "' must be a table");
    return nullptr;
  }

 private:
  static std::string qualify(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }
  std::vector<std::string>& problems_;
};

inline std::optional<StyleNormalization> parse_normalization(const std::string& s) {
  if (s == "mask_mean") return StyleNormalization::mask_mean;
  if (s == "plain") return StyleNormalization::plain;
  return std::nullopt;
}

inline std::string to_string(StyleNormalization n) { return n == StyleNormalization::plain ? "plain" : "mask_mean"; }

}  // namespace detail

/// Parses a TOML run config; relative paths resolve against the file's
/// directory. Syntax and type problems are collected, not thrown one by one.
inline RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir,
                                   std::vector<std::string>& problems) {
  RunConfig cfg;
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML syntax error at line " << e.source().begin.line << ": " << e.description();
    problems.push_back(msg.str());
    return cfg;
  }
  detail::TomlReader r(problems);
  r.check_keys(root, "",
               {"paths", "objective", "matting", "extractor", "optimizer", "segmentation", "diagnostics"});

  if (const auto* t = r.section(root, "paths")) {
    r.check_keys(*t, "paths", {"input", "style", "input_labels", "style_labels", "label_colors", "output_dir"});
    r.read_path(*t, "paths", "input", base_dir, cfg.paths.input);
    r.read_path(*t, "paths", "style", base_dir, cfg.paths.style);
    r.read_path(*t, "paths", "input_labels", base_dir, cfg.paths.input_labels);
    r.read_path(*t, "paths", "style_labels", base_dir, cfg.paths.style_labels);
    r.read_path(*t, "paths", "label_colors", base_dir, cfg.paths.label_colors);
    r.read_path(*t, "paths", "output_dir", base_dir, cfg.paths.output_dir);
  }
  if (const auto* t = r.section(root, "objective")) {
    r.check_keys(*t, "objective", {"gamma", "lambda", "normalization", "content_layers", "style_layers"});
    r.read(*t, "objective", "gamma", cfg.weights.gamma);
    r.read(*t, "objective", "lambda", cfg.weights.lambda);
    std::string norm = detail::to_string(cfg.weights.normalization);
    r.read(*t, "objective", "normalization", norm);
    if (auto n = detail::parse_normalization(norm)) {
      cfg.weights.normalization = *n;
    } else {
      problems.push_back("objective.normalization must be \"mask_mean\" or \"plain\"");
    }
    cfg.weights.content = r.read_weights(*t, "objective", "content_layers", cfg.weights.content);
    cfg.weights.style = r.read_weights(*t, "objective", "style_layers", cfg.weights.style);
  }
  if (const auto* t = r.section(root, "matting")) {
    r.check_keys(*t, "matting", {"eps", "window_radius"});
    r.read(*t, "matting", "eps", cfg.matting.eps);
    std::int64_t radius = cfg.matting.window_radius;
    r.read(*t, "matting", "window_radius", radius);
    cfg.matting.window_radius = static_cast<int>(radius);
  }
  if (const auto* t = r.section(root, "extractor")) {
    r.check_keys(*t, "extractor", {"kind", "seed", "bias_range", "path", "layers"});
    std::string kind = "seeded-cnn";
    r.read(*t, "extractor", "kind", kind);
    if (kind == "seeded-cnn") {
      cfg.extractor.kind = ExtractorSpec::Kind::seeded_cnn;
    } else if (kind == "file") {
      cfg.extractor.kind = ExtractorSpec::Kind::file;
    } else {
      problems.push_back("extractor.kind must be \"seeded-cnn\" or \"file\"");
    }
    std::int64_t seed = static_cast<std::int64_t>(cfg.extractor.seed);
    r.read(*t, "extractor", "seed", seed);
    cfg.extractor.seed = static_cast<std::uint64_t>(seed);
    r.read(*t, "extractor", "bias_range", cfg.extractor.bias_range);
    r.read_path(*t, "extractor", "path", base_dir, cfg.extractor.path);
    if (const auto* node = t->get("layers")) {
      const auto* arr = node->as_array();
      if (arr == nullptr) {
        problems.push_back("extractor.layers must be an array of tables");
      } else {
        cfg.extractor.layers.clear();
        for (const auto& item : *arr) {
          const auto* lt = item.as_table();
          if (lt == nullptr) {
            problems.push_back("extractor.layers entries must be tables");
            continue;
          }
          r.check_keys(*lt, "extractor.layers", {"name", "filters", "downsample"});
          ConvLayerSpec l;
          r.read(*lt, "extractor.layers", "name", l.name);
          r.read_size(*lt, "extractor.layers", "filters", l.filters);
          r.read_size(*lt, "extractor.layers", "downsample", l.downsample);
          if (l.name.empty()) problems.push_back("extractor.layers entry without a name");
          cfg.extractor.layers.push_back(l);
        }
      }
    }
  }
  if (const auto* t = r.section(root, "optimizer")) {
    r.check_keys(*t, "optimizer",
                 {"method", "max_iters", "stage1_iters", "stage2_iters", "history", "step_size", "tolerance",
                  "tolerance_window", "seed", "precision"});
    std::string method = to_string(cfg.stage1.method);
    r.read(*t, "optimizer", "method", method);
    OptimizerParams p;
    if (method == "lbfgs") {
      p.method = OptimizerMethod::lbfgs;
    } else if (method == "adam") {
      p.method = OptimizerMethod::adam;
    } else {
      problems.push_back("optimizer.method must be \"lbfgs\" or \"adam\"");
    }
    r.read_size(*t, "optimizer", "max_iters", p.max_iters);
    r.read_size(*t, "optimizer", "history", p.history);
    r.read(*t, "optimizer", "step_size", p.step_size);
    r.read(*t, "optimizer", "tolerance", p.tolerance);
    r.read_size(*t, "optimizer", "tolerance_window", p.tolerance_window);
    std::int64_t seed = 0;
    r.read(*t, "optimizer", "seed", seed);
    p.seed = static_cast<std::uint64_t>(seed);
    cfg.stage1 = p;
    cfg.stage2 = p;
    r.read_size(*t, "optimizer", "stage1_iters", cfg.stage1.max_iters);
    r.read_size(*t, "optimizer", "stage2_iters", cfg.stage2.max_iters);
    std::string precision = "f64";
    r.read(*t, "optimizer", "precision", precision);
    if (precision == "f64") {
      cfg.precision = Precision::f64;
    } else if (precision == "f32") {
      cfg.precision = Precision::f32;
    } else {
      problems.push_back("optimizer.precision must be \"f64\" or \"f32\"");
    }
  }
  if (const auto* t = r.section(root, "segmentation")) {
    r.check_keys(*t, "segmentation", {"use_default_merge", "merge", "orphans"});
    bool defaults = true;
    r.read(*t, "segmentation", "use_default_merge", defaults);
    if (!defaults) {
      cfg.merge = MergeTable{};
      cfg.orphans.clear();
    }
    if (const auto* node = t->get("merge")) {
      if (const auto* mt = node->as_table()) {
        for (const auto& [from, to] : *mt) {
          if (auto v = to.value<std::string>()) {
            cfg.merge.mapping[std::string(from.str())] = *v;
          } else {
            problems.push_back("segmentation.merge." + std::string(from.str()) + " must be a string");
          }
        }
      } else {
        problems.push_back("segmentation.merge must be a table");
      }
    }
    if (const auto* node = t->get("orphans")) {
      if (const auto* ot = node->as_table()) {
        for (const auto& [label, list] : *ot) {
          const auto* arr = list.as_array();
          std::vector<std::string> prefs;
          bool ok = arr != nullptr;
          if (ok) {
            for (const auto& item : *arr) {
              if (auto v = item.value<std::string>()) {
                prefs.push_back(*v);
              } else {
                ok = false;
              }
            }
          }
          if (!ok) {
            problems.push_back("segmentation.orphans." + std::string(label.str()) + " must be an array of strings");
          } else {
            cfg.orphans[std::string(label.str())] = prefs;
          }
        }
      } else {
        problems.push_back("segmentation.orphans must be a table");
      }
    }
  }
  if (const auto* t = r.section(root, "diagnostics")) {
    r.check_keys(*t, "diagnostics",
                 {"correspondence", "correspondence_layer", "correspondence_patch", "snapshot_every", "lambda_sweep",
                  "dump_laplacian"});
    r.read(*t, "diagnostics", "correspondence", cfg.diagnostics.correspondence);
    r.read(*t, "diagnostics", "correspondence_layer", cfg.diagnostics.correspondence_layer);
    r.read_size(*t, "diagnostics", "correspondence_patch", cfg.diagnostics.correspondence_patch);
    r.read_size(*t, "diagnostics", "snapshot_every", cfg.diagnostics.snapshot_every);
    r.read(*t, "diagnostics", "dump_laplacian", cfg.diagnostics.dump_laplacian);
    if (const auto* node = t->get("lambda_sweep")) {
      const auto* arr = node->as_array();
      if (arr == nullptr) {
        problems.push_back("diagnostics.lambda_sweep must be an array of numbers");
      } else {
        for (const auto& item : *arr) {
          if (auto v = item.value<double>()) {
            cfg.diagnostics.lambda_sweep.push_back(*v);
          } else {
            problems.push_back("diagnostics.lambda_sweep must be an array of numbers");
            break;
          }
        }
      }
    }
  }
  return cfg;
}

/// Semantic checks run before any heavy work. Returns every violation.
inline std::vector<std::string> validate(const RunConfig& cfg, bool check_files = true) {
  std::vector<std::string> problems;
  const auto& w = cfg.weights;
  if (!(w.lambda >= 0)) problems.emplace_back("lambda must be ≥ 0");
  if (!(w.gamma >= 0)) problems.emplace_back("gamma must be ≥ 0");
  auto check_weights = [&](const std::map<std::string, double>& table, const char* what) {
    bool any = false;
    for (const auto& [layer, value] : table) {
      if (!(value >= 0)) problems.push_back(std::string(what) + " weight for '" + layer + "' must be ≥ 0");
      if (value > 0) any = true;
      if (cfg.extractor.kind == ExtractorSpec::Kind::seeded_cnn && !cfg.extractor.has_layer(layer)) {
        problems.push_back(std::string(what) + " layer '" + layer + "' is not produced by the extractor");
      }
    }
    if (!any) problems.push_back(std::string(what) + " weights need at least one nonzero entry");
  };
  check_weights(w.content, "content");
  check_weights(w.style, "style");

  if (!(cfg.matting.eps > 0)) problems.emplace_back("matting.eps must be > 0");
  if (cfg.matting.window_radius < 1) problems.emplace_back("matting.window_radius must be ≥ 1");

  for (const auto& p : cfg.extractor.violations()) problems.push_back(p);
  if (cfg.extractor.kind == ExtractorSpec::Kind::file) {
    problems.emplace_back("extractor kind \"file\" provides no gradients and cannot drive a transfer run");
  }
  for (const auto& p : cfg.stage1.violations()) problems.push_back("stage 1: " + p);
  for (const auto& p : cfg.stage2.violations()) problems.push_back("stage 2: " + p);

  for (double l : cfg.diagnostics.lambda_sweep) {
    if (!(l >= 0)) problems.emplace_back("diagnostics.lambda_sweep values must be ≥ 0");
  }
  if (cfg.diagnostics.correspondence) {
    if (cfg.diagnostics.correspondence_patch == 0) problems.emplace_back("diagnostics.correspondence_patch must be ≥ 1");
    if (cfg.extractor.kind == ExtractorSpec::Kind::seeded_cnn &&
        !cfg.extractor.has_layer(cfg.diagnostics.correspondence_layer)) {
      problems.push_back("correspondence layer '" + cfg.diagnostics.correspondence_layer +
                         "' is not produced by the extractor");
    }
  }

  for (const auto& [from, to] : cfg.merge.mapping) {
    if (to.empty()) problems.push_back("segmentation.merge." + from + " maps to an empty label");
  }

  const bool in_labels = !cfg.paths.input_labels.empty();
  const bool st_labels = !cfg.paths.style_labels.empty();
  if (in_labels != st_labels) problems.emplace_back("input_labels and style_labels must be given together");
  if ((in_labels || st_labels) && cfg.paths.label_colors.empty()) {
    problems.emplace_back("paths.label_colors is required when label images are given");
  }
  auto require_file = [&](const std::filesystem::path& p, const char* what) {
    if (p.empty()) {
      problems.push_back(std::string("paths.") + what + " is required");
    } else if (check_files && !std::filesystem::is_regular_file(p)) {
      problems.push_back(std::string(what) + " file not found: " + p.string());
    }
  };
  require_file(cfg.paths.input, "input");
  require_file(cfg.paths.style, "style");
  if (in_labels) require_file(cfg.paths.input_labels, "input_labels");
  if (st_labels) require_file(cfg.paths.style_labels, "style_labels");
  if (!cfg.paths.label_colors.empty()) require_file(cfg.paths.label_colors, "label_colors");
  if (cfg.paths.output_dir.empty()) problems.emplace_back("paths.output_dir must not be empty");
  return problems;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file: " + path.string()});
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::vector<std::string> problems;
  auto cfg = parse_config_text(buffer.str(), path.parent_path(), problems);
  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

/// Parses and fully validates; throws ConfigError listing every violation.
inline RunConfig validate_config(const std::filesystem::path& path) {
  auto cfg = load_config(path);
  auto problems = validate(cfg);
  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

/// Normalized TOML form with every default made explicit.
inline toml::table to_toml(const RunConfig& cfg) {
  auto weights_table = [](const std::map<std::string, double>& m) {
    toml::table t;
    for (const auto& [k, v] : m) t.insert(k, v);
    return t;
  };
  toml::array layers;
  for (const auto& l : cfg.extractor.layers) {
    layers.push_back(toml::table{{"name", l.name},
                                 {"filters", static_cast<std::int64_t>(l.filters)},
                                 {"downsample", static_cast<std::int64_t>(l.downsample)}});
  }
  toml::table merge;
  for (const auto& [k, v] : cfg.merge.mapping) merge.insert(k, v);
  toml::table orphans;
  for (const auto& [k, v] : cfg.orphans) {
    toml::array a;
    for (const auto& s : v) a.push_back(s);
    orphans.insert(k, a);
  }
  toml::array sweep;
  for (double l : cfg.diagnostics.lambda_sweep) sweep.push_back(l);

  return toml::table{
      {"paths", toml::table{{"input", cfg.paths.input.string()},
                            {"style", cfg.paths.style.string()},
                            {"input_labels", cfg.paths.input_labels.string()},
                            {"style_labels", cfg.paths.style_labels.string()},
                            {"label_colors", cfg.paths.label_colors.string()},
                            {"output_dir", cfg.paths.output_dir.string()}}},
      {"objective", toml::table{{"gamma", cfg.weights.gamma},
                                {"lambda", cfg.weights.lambda},
                                {"normalization", detail::to_string(cfg.weights.normalization)},
                                {"content_layers", weights_table(cfg.weights.content)},
                                {"style_layers", weights_table(cfg.weights.style)}}},
      {"matting", toml::table{{"eps", cfg.matting.eps},
                              {"window_radius", static_cast<std::int64_t>(cfg.matting.window_radius)}}},
      {"extractor", toml::table{{"kind", cfg.extractor.kind == ExtractorSpec::Kind::file ? "file" : "seeded-cnn"},
                                {"seed", static_cast<std::int64_t>(cfg.extractor.seed)},
                                {"bias_range", cfg.extractor.bias_range},
                                {"path", cfg.extractor.path.string()},
                                {"layers", layers}}},
      {"optimizer", toml::table{{"method", to_string(cfg.stage1.method)},
                                {"stage1_iters", static_cast<std::int64_t>(cfg.stage1.max_iters)},
                                {"stage2_iters", static_cast<std::int64_t>(cfg.stage2.max_iters)},
                                {"history", static_cast<std::int64_t>(cfg.stage1.history)},
                                {"step_size", cfg.stage1.step_size},
                                {"tolerance", cfg.stage1.tolerance},
                                {"tolerance_window", static_cast<std::int64_t>(cfg.stage1.tolerance_window)},
                                {"seed", static_cast<std::int64_t>(cfg.stage1.seed)},
                                {"precision", cfg.precision == Precision::f32 ? "f32" : "f64"}}},
      {"segmentation", toml::table{{"use_default_merge", false}, {"merge", merge}, {"orphans", orphans}}},
      {"diagnostics", toml::table{{"correspondence", cfg.diagnostics.correspondence},
                                  {"correspondence_layer", cfg.diagnostics.correspondence_layer},
                                  {"correspondence_patch",
                                   static_cast<std::int64_t>(cfg.diagnostics.correspondence_patch)},
                                  {"snapshot_every", static_cast<std::int64_t>(cfg.diagnostics.snapshot_every)},
                                  {"lambda_sweep", sweep},
                                  {"dump_laplacian", cfg.diagnostics.dump_laplacian}}},
  };
}

}  // namespace photostyle
