#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "photostyle/config.hpp"
#include "photostyle/run.hpp"

namespace ps = photostyle;
namespace fs = std::filesystem;

namespace {

const fs::path kSample = PHOTOSTYLE_SAMPLE_DIR;

class ConfigTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("photostyle_cfg_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  // Small run over the bundled sample images.
  std::string sample_config(const std::string& extra = "", bool labels = true) const {
    std::ostringstream s;
    s << "[paths]\n"
      << "input = \"" << (kSample / "input.png").string() << "\"\n"
      << "style = \"" << (kSample / "style.png").string() << "\"\n";
    if (labels) {
      s << "input_labels = \"" << (kSample / "input_labels.png").string() << "\"\n"
        << "style_labels = \"" << (kSample / "style_labels.png").string() << "\"\n"
        << "label_colors = \"" << (kSample / "labels.json").string() << "\"\n";
    }
    s << "output_dir = \"out\"\n\n[optimizer]\nstage1_iters = 8\nstage2_iters = 8\nseed = 3\n" << extra;
    return s.str();
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  // Runs the CLI and returns its exit status; stderr lands in err.txt.
  int cli(const std::string& args) const {
    const std::string cmd = std::string(PHOTOSTYLE_TRANSFER_BIN) + " " + args + " > " + (dir_ / "out.txt").string() +
                            " 2> " + (dir_ / "err.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

bool contains(const std::vector<std::string>& problems, const std::string& needle) {
  for (const auto& p : problems)
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_F(ConfigTest, DefaultsAreApplied) {
  const auto cfg = ps::load_config(write("c.toml", sample_config()));
  EXPECT_EQ(cfg.weights.gamma, 1e2);
  EXPECT_EQ(cfg.weights.lambda, 1e4);
  EXPECT_EQ(cfg.weights.content, (std::map<std::string, double>{{"conv4_2", 1.0}}));
  ASSERT_EQ(cfg.weights.style.size(), 5u);
  for (const auto& [layer, beta] : cfg.weights.style) EXPECT_EQ(beta, 0.2) << layer;
  EXPECT_EQ(cfg.matting.eps, 1e-5);
  EXPECT_EQ(cfg.matting.window_radius, 1);
  EXPECT_EQ(cfg.stage1.history, 10u);
  EXPECT_EQ(cfg.stage1.max_iters, 8u);
  EXPECT_EQ(cfg.paths.output_dir, dir_ / "out");
  EXPECT_TRUE(ps::validate(cfg).empty());
}

TEST_F(ConfigTest, NegativeLambdaIsReported) {
  const auto cfg = ps::load_config(write("c.toml", sample_config("[objective]\nlambda = -1\n")));
  EXPECT_TRUE(contains(ps::validate(cfg), "lambda must be ≥ 0"));
}

TEST_F(ConfigTest, UnknownStyleLayerIsNamed) {
  const auto cfg =
      ps::load_config(write("c.toml", sample_config("[objective]\nstyle_layers = { conv1_1 = 0.5, conv7_3 = 0.5 }\n")));
  EXPECT_TRUE(contains(ps::validate(cfg), "conv7_3"));
}

TEST_F(ConfigTest, AllViolationsAreAggregated) {
  const auto path = write("c.toml", R"([paths]
input = "nope.png"
style = "missing_style.png"

[objective]
lambda = -1
gamma = -2

[matting]
eps = 0
)");
  try {
    (void)ps::validate_config(path);
    FAIL();
  } catch (const ps::ConfigError& e) {
    const auto& p = e.problems();
    EXPECT_TRUE(contains(p, "lambda must be ≥ 0"));
    EXPECT_TRUE(contains(p, "gamma must be ≥ 0"));
    EXPECT_TRUE(contains(p, "matting.eps"));
    EXPECT_TRUE(contains(p, "missing_style.png"));
    EXPECT_TRUE(contains(p, "nope.png"));
  }
}

TEST_F(ConfigTest, SyntaxAndTypeErrorsAreCollected) {
  try {
    (void)ps::load_config(write("c.toml", "[objective]\nlambda = \"big\"\nlamda = 3\n[bogus]\n"));
    FAIL();
  } catch (const ps::ConfigError& e) {
    EXPECT_TRUE(contains(e.problems(), "objective.lambda"));
    EXPECT_TRUE(contains(e.problems(), "objective.lamda"));
    EXPECT_TRUE(contains(e.problems(), "bogus"));
  }
  EXPECT_THROW((void)ps::load_config(write("d.toml", "[paths\n")), ps::ConfigError);
}

TEST_F(ConfigTest, NormalizedEchoRoundTrips) {
  const auto cfg = ps::load_config(write("c.toml", sample_config("[diagnostics]\nlambda_sweep = [1, 100]\n")));
  std::ostringstream text;
  text << ps::to_toml(cfg);
  std::vector<std::string> problems;
  const auto again = ps::parse_config_text(text.str(), "/", problems);
  EXPECT_TRUE(problems.empty());
  std::ostringstream text2;
  text2 << ps::to_toml(again);
  EXPECT_EQ(text.str(), text2.str());
}

TEST_F(ConfigTest, FileExtractorCannotDriveARun) {
  write("f.feat", "");
  const auto cfg = ps::load_config(write("c.toml", sample_config("[extractor]\nkind = \"file\"\npath = \"f.feat\"\n")));
  EXPECT_TRUE(contains(ps::validate(cfg), "no gradients"));
}

TEST_F(ConfigTest, CliValidateEchoesConfig) {
  EXPECT_EQ(cli("validate --config " + write("c.toml", sample_config()).string()), 0);
  EXPECT_NE(slurp(dir_ / "out.txt").find("lambda = 10000"), std::string::npos);
}

TEST_F(ConfigTest, CliMissingStyleExitsTwoAndNamesPath) {
  auto text = sample_config();
  const std::string style = (kSample / "style.png").string();
  text.replace(text.find(style), style.size(), (dir_ / "absent_style.png").string());
  EXPECT_EQ(cli("run --config " + write("c.toml", text).string()), 2);
  EXPECT_NE(slurp(dir_ / "err.txt").find("absent_style.png"), std::string::npos);
}

TEST_F(ConfigTest, CliUsageErrorExitsTwo) { EXPECT_EQ(cli("run"), 2); }

TEST_F(ConfigTest, CliReinhardBaseline) {
  const auto out = dir_ / "r.png";
  EXPECT_EQ(cli("baseline-reinhard --input " + (kSample / "input.png").string() + " --style " +
                (kSample / "style.png").string() + " --out " + out.string()),
            0);
  EXPECT_TRUE(fs::exists(out));
}

TEST_F(ConfigTest, CliCorrespondenceFromFeatureFiles) {
  ps::FeatureMap<double> f("conv3_1", 2, 4, 4);
  for (std::size_t i = 0; i < f.matrix.size(); ++i) f.matrix[i] = static_cast<double>(i);
  ps::write_feature_file<double>({f}, dir_ / "a.feat");
  EXPECT_EQ(cli("correspondence --output-image " + (dir_ / "a.feat").string() + " --style " +
                (dir_ / "a.feat").string() + " --layer conv3_1 --out " + (dir_ / "c.png").string()),
            0);
  const auto image = ps::load_png(dir_ / "c.png");
  EXPECT_NEAR(image(1, 0, 1), 0.25, 1.0 / 255);
  EXPECT_NEAR(image(0, 1, 2), 0.25, 1.0 / 255);
  EXPECT_EQ(cli("correspondence --output-image " + (dir_ / "a.feat").string() + " --style " +
                (dir_ / "a.feat").string() + " --layer conv9_9 --out " + (dir_ / "c.png").string()),
            2);
}

TEST_F(ConfigTest, RunWithoutLabelsUsesOneClass) {
  auto cfg = ps::load_config(write("c.toml", sample_config("", false)));
  const auto inputs = ps::prepare_inputs<double>(cfg);
  ASSERT_EQ(inputs.input_masks.channels(), 1u);
  for (double v : inputs.input_masks.data) EXPECT_EQ(v, 1.0);
  const auto report = ps::run_transfer(cfg);
  EXPECT_TRUE(fs::exists(report.output_dir / "final.png"));
}

TEST_F(ConfigTest, LabelsAreMergedAndOrphansRemapped) {
  const auto cfg = ps::load_config(write("c.toml", sample_config()));
  const auto inputs = ps::prepare_inputs<double>(cfg);
  EXPECT_EQ(inputs.input_masks.classes, (std::vector<std::string>{"building", "sky", "vegetation"}));
  EXPECT_EQ(inputs.style_masks.classes, inputs.input_masks.classes);
}

TEST_F(ConfigTest, RunWritesArtifactsAndManifestMatchesCsv) {
  auto cfg = ps::load_config(write(
      "c.toml", sample_config("[diagnostics]\ncorrespondence = true\nsnapshot_every = 4\nlambda_sweep = [1.0]\n"
                              "dump_laplacian = true\n")));
  const auto report = ps::run_transfer(cfg);
  const auto out = report.output_dir;
  for (const char* f : {"stage1.png", "final.png", "stage1_trace.csv", "stage2_trace.csv", "manifest.json",
                        "correspondence.png", "laplacian.txt", "stage1_iter00004.png", "lambda_1/final.png",
                        "lambda_1/stage2_trace.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  std::istringstream csv(slurp(out / "stage2_trace.csv"));
  std::string line, last;
  std::getline(csv, line);
  EXPECT_EQ(line, "iteration,content,style,matting,total");
  while (std::getline(csv, line)) last = line;
  std::istringstream row(last);
  std::string cell;
  std::vector<double> values;
  while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
  ASSERT_EQ(values.size(), 5u);
  const auto& fb = manifest["final_breakdown"];
  EXPECT_EQ(fb["content"].get<double>(), values[1]);
  EXPECT_EQ(fb["style"].get<double>(), values[2]);
  EXPECT_EQ(fb["matting"].get<double>(), values[3]);
  EXPECT_EQ(fb["total"].get<double>(), values[4]);
  EXPECT_EQ(manifest["config"]["objective"]["lambda"].get<double>(), 1e4);
  EXPECT_TRUE(manifest["stage2"].contains("termination"));
}

TEST_F(ConfigTest, CliOverridesApply) {
  const auto cfg_path = write("c.toml", sample_config());
  EXPECT_EQ(cli("run --config " + cfg_path.string() + " --lambda 5 --gamma 7 --seed 9 --out " + (dir_ / "o").string()),
            0);
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "o" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["objective"]["lambda"].get<double>(), 5.0);
  EXPECT_EQ(manifest["config"]["objective"]["gamma"].get<double>(), 7.0);
  EXPECT_EQ(manifest["config"]["optimizer"]["seed"].get<int>(), 9);
}

TEST_F(ConfigTest, SameConfigIsByteIdentical) {
  const auto cfg_path = write("c.toml", sample_config());
  ASSERT_EQ(cli("run --config " + cfg_path.string() + " --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(cli("run --config " + cfg_path.string() + " --out " + (dir_ / "b").string()), 0);
  for (const char* f : {"stage1.png", "final.png", "stage1_trace.csv", "stage2_trace.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(ConfigTest, SinglePrecisionRunCompletes) {
  auto cfg = ps::load_config(write("c.toml", sample_config("precision = \"f32\"\n")));
  EXPECT_EQ(cfg.precision, ps::Precision::f32);
  const auto report = ps::run_transfer(cfg);
  EXPECT_TRUE(fs::exists(report.output_dir / "final.png"));
}
