#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <vector>

#include "photostyle/feature_file.hpp"
#include "photostyle/losses.hpp"
#include "photostyle/matting.hpp"
#include "support/test_support.hpp"

namespace ps = photostyle;
using ps::test::random_features;
using ps::test::random_image;

namespace {

ps::FeatureMap<double> with_values(ps::FeatureMap<double> f, const std::vector<double>& values) {
  f.matrix = values;
  return f;
}

// Small extractor for objective-level checks: five stages, few filters.
ps::ExtractorSpec small_spec(std::uint64_t seed) {
  ps::ExtractorSpec spec;
  spec.seed = seed;
  spec.bias_range = 0.05;
  spec.layers = {{"conv1_1", 3, 1}, {"conv2_1", 4, 2}, {"conv3_1", 4, 4}, {"conv4_1", 5, 8},
                 {"conv4_2", 5, 8}, {"conv5_1", 5, 8}};
  return spec;
}

}  // namespace

TEST(Gram, IdentityRows) {
  ps::FeatureMap<double> f("l", 2, 1, 2);
  f.matrix = {1, 0, 0, 1};
  const auto g = ps::gram(f);
  EXPECT_EQ(g.values, (std::vector<double>{1, 0, 0, 1}));
}

TEST(Gram, SingleFilterIsSquaredNorm) {
  ps::FeatureMap<double> f("l", 1, 1, 3);
  f.matrix = {1, 2, 3};
  EXPECT_DOUBLE_EQ(ps::gram(f).values[0], 14.0);
}

TEST(Gram, MatchesDoubleLoop) {
  const auto f = random_features("l", 3, 1, 5, 1);
  const auto g = ps::gram(f);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double sum = 0;
      for (std::size_t j = 0; j < 5; ++j) sum += f(i, j) * f(k, j);
      EXPECT_NEAR(g(i, k), sum, 1e-12);
    }
}

TEST(Gram, SymmetricPsd) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = ps::gram(random_features("l", 6, 3, 4, seed));
    Eigen::MatrixXd m(6, 6);
    for (long i = 0; i < 6; ++i)
      for (long k = 0; k < 6; ++k) m(i, k) = g(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    EXPECT_LE((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(ContentLoss, IdenticalMapsVanish) {
  const auto f = random_features("l", 3, 2, 2, 1);
  const auto r = ps::content_loss(f, f);
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.gradient.matrix) EXPECT_EQ(g, 0.0);
}

TEST(ContentLoss, ScalarInstance) {
  ps::FeatureMap<double> o("l", 1, 1, 1, 3.0);
  ps::FeatureMap<double> i("l", 1, 1, 1, 1.0);
  const auto r = ps::content_loss(o, i);
  EXPECT_DOUBLE_EQ(r.value, 2.0);
  EXPECT_DOUBLE_EQ(r.gradient.matrix[0], 2.0);
}

TEST(ContentLoss, GradientMatchesFiniteDifferences) {
  const auto o = random_features("l", 4, 2, 3, 1);
  const auto t = random_features("l", 4, 2, 3, 2);
  const auto numeric = ps::test::central_difference(
      [&](const std::vector<double>& x) { return ps::content_loss(with_values(o, x), t).value; }, o.matrix);
  EXPECT_LT(ps::test::relative_error(ps::content_loss(o, t).gradient.matrix, numeric), 1e-6);
}

TEST(ContentLoss, ShapeMismatch) {
  EXPECT_THROW((void)ps::content_loss(random_features("l", 2, 2, 2, 1), random_features("l", 2, 2, 3, 1)), ps::Error);
}

TEST(StyleLoss, EqualGramsVanish) {
  const auto g = ps::gram(random_features("l", 3, 2, 2, 1));
  EXPECT_EQ(ps::style_loss(g, g, 3).value, 0.0);
}

TEST(StyleLoss, ScalarInstance) {
  ps::GramMatrix<double> a(1), b(1);
  a.values = {4};
  b.values = {2};
  const auto r = ps::style_loss(a, b, 1);
  EXPECT_DOUBLE_EQ(r.value, 2.0);
  EXPECT_DOUBLE_EQ(r.gradient.values[0], 2.0);
}

TEST(StyleLoss, ChainRuleThroughGram) {
  const auto f = random_features("l", 3, 2, 3, 5);
  const auto target = ps::gram(random_features("l", 3, 2, 3, 6));
  auto value = [&](const std::vector<double>& x) { return ps::style_loss(ps::gram(with_values(f, x)), target, 3).value; };
  // dL/dF = 2 (dL/dG) F
  const auto dg = ps::style_loss(ps::gram(f), target, 3).gradient;
  std::vector<double> analytic(f.matrix.size());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < f.spatial(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += dg(i, k) * f(k, j);
      analytic[i * f.spatial() + j] = 2 * s;
    }
  EXPECT_LT(ps::test::relative_error(analytic, ps::test::central_difference(value, f.matrix)), 1e-5);
}

TEST(AugmentedStyle, SingleAllOnesClassEqualsPlainStyleLoss) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto o = random_features("l", 4, 3, 5, seed);
    const auto s = random_features("l", 4, 3, 5, seed + 100);
    const auto ones = ps::LabelMaskStack<double>::all_ones(3, 5);
    const double plain = ps::style_loss(ps::gram(o), ps::gram(s), 4).value;
    EXPECT_NEAR(ps::augmented_style_loss(o, s, ones, ones).value, plain, 1e-12 * std::max(1.0, plain));
    EXPECT_NEAR(ps::augmented_style_loss(o, s, ones, ones, ps::StyleNormalization::plain).value, plain,
                1e-12 * std::max(1.0, plain));
  }
}

TEST(AugmentedStyle, ClassEmptyInBothIsSkipped) {
  const auto o = random_features("l", 2, 2, 2, 1);
  const auto s = random_features("l", 2, 2, 2, 2);
  auto masks = ps::LabelMaskStack<double>({"a", "ghost"}, 2, 2);
  for (std::size_t p = 0; p < 4; ++p) masks(0, p) = 1.0;
  const double with_ghost = ps::augmented_style_loss(o, s, masks, masks).value;
  const auto ones = ps::LabelMaskStack<double>::all_ones(2, 2, "a");
  EXPECT_DOUBLE_EQ(with_ghost, ps::augmented_style_loss(o, s, ones, ones).value);
}

TEST(AugmentedStyle, MatchesPerClassOracleAndFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto o = random_features("l", 3, 3, 4, seed);
    const auto s = random_features("l", 3, 3, 4, seed + 50);
    const auto mo = ps::test::random_partition({"a", "b"}, 3, 4, seed);
    const auto ms = ps::test::random_partition({"a", "b"}, 3, 4, seed + 7);
    for (auto norm : {ps::StyleNormalization::mask_mean, ps::StyleNormalization::plain}) {
      const auto r = ps::augmented_style_loss(o, s, mo, ms, norm);
      EXPECT_NEAR(r.value, ps::test::augmented_style_oracle(o, s, mo, ms, norm), 1e-10 * std::max(1.0, r.value));
      auto value = [&](const std::vector<double>& x) {
        return ps::augmented_style_loss(with_values(o, x), s, mo, ms, norm).value;
      };
      EXPECT_LT(ps::test::relative_error(r.gradient.matrix, ps::test::central_difference(value, o.matrix)), 1e-5)
          << "seed " << seed;
    }
  }
}

TEST(AugmentedStyle, SoftMasksMatchOracle) {
  const auto o = random_features("l", 3, 4, 4, 1);
  const auto s = random_features("l", 3, 6, 5, 2);
  const auto mo = ps::downsample_mask(ps::test::random_partition({"a", "b", "c"}, 9, 9, 3), 4, 4);
  const auto ms = ps::downsample_mask(ps::test::random_partition({"a", "b", "c"}, 13, 11, 4), 6, 5);
  const auto r = ps::augmented_style_loss(o, s, mo, ms);
  EXPECT_NEAR(r.value, ps::test::augmented_style_oracle(o, s, mo, ms, ps::StyleNormalization::mask_mean),
              1e-10 * r.value);
}

TEST(AugmentedStyle, ClassAndShapeMismatch) {
  const auto o = random_features("l", 2, 2, 2, 1);
  const auto a = ps::LabelMaskStack<double>::all_ones(2, 2, "a");
  const auto b = ps::LabelMaskStack<double>::all_ones(2, 2, "b");
  EXPECT_THROW((void)ps::augmented_style_loss(o, o, a, b), ps::Error);
  const auto wrong = ps::LabelMaskStack<double>::all_ones(3, 2, "a");
  EXPECT_THROW((void)ps::augmented_style_loss(o, o, wrong, a), ps::Error);
}

TEST(AugmentedStyle, LossesAreNonNegative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto o = random_features("l", 3, 3, 3, seed);
    const auto s = random_features("l", 3, 3, 3, seed + 1);
    const auto m = ps::test::random_partition({"a", "b"}, 3, 3, seed);
    EXPECT_GE(ps::augmented_style_loss(o, s, m, m).value, 0.0);
    EXPECT_GE(ps::content_loss(o, s).value, 0.0);
  }
}

class ObjectiveTest : public ::testing::Test {
 protected:
  static ps::LabelMaskStack<double> masks(std::size_t h, std::size_t w, std::uint64_t seed) {
    return ps::test::random_partition({"a", "b"}, h, w, seed);
  }
};

TEST_F(ObjectiveTest, BreakdownReconstructsTotal) {
  ps::SeededCnn<double> cnn(small_spec(3));
  const auto input = random_image(12, 12, 1);
  const auto style = random_image(12, 12, 2);
  ps::ObjectiveWeights w;
  w.lambda = 37.0;
  ps::TransferObjective<double> objective(cnn, input, style, masks(12, 12, 1), masks(12, 12, 2),
                                          ps::build_matting_laplacian(input), w);
  const auto bd = objective.evaluate(random_image(12, 12, 3)).breakdown;
  double content = 0, style_sum = 0;
  for (const auto& [layer, v] : bd.content_per_layer) content += w.content.at(layer) * v;
  for (const auto& [layer, v] : bd.style_per_layer) style_sum += w.style.at(layer) * v;
  const double expected = content + w.gamma * style_sum + w.lambda * bd.matting_term;
  EXPECT_NEAR(bd.weighted_total, expected, 1e-10 * std::max(1.0, expected));
  EXPECT_EQ(bd.content_per_layer.size(), 1u);
  EXPECT_EQ(bd.style_per_layer.size(), 5u);
}

TEST_F(ObjectiveTest, OutputEqualsInputLeavesOnlyStyle) {
  ps::SeededCnn<double> cnn(small_spec(4));
  const auto input = random_image(10, 10, 1);
  const auto style = random_image(10, 10, 2);
  ps::ObjectiveWeights w;
  w.lambda = 0;
  const auto ones_in = ps::LabelMaskStack<double>::all_ones(10, 10);
  const auto ones_st = ps::LabelMaskStack<double>::all_ones(10, 10);
  ps::TransferObjective<double> objective(cnn, input, style, ones_in, ones_st, std::nullopt, w);
  const auto bd = objective.evaluate(input).breakdown;
  EXPECT_EQ(bd.content_weighted, 0.0);
  EXPECT_EQ(bd.matting_term, 0.0);
  EXPECT_NEAR(bd.weighted_total, w.gamma * bd.style_weighted, 1e-12 * bd.weighted_total);
}

TEST_F(ObjectiveTest, ZeroLayerWeightsIsolateMatting) {
  ps::SeededCnn<double> cnn(small_spec(5));
  const auto input = random_image(8, 8, 1);
  ps::ObjectiveWeights w;
  w.content = {{"conv4_2", 0.0}};
  w.style = {{"conv1_1", 0.0}};
  w.lambda = 3.0;
  const auto laplacian = ps::build_matting_laplacian(input);
  const auto ones = ps::LabelMaskStack<double>::all_ones(8, 8);
  ps::TransferObjective<double> objective(cnn, input, input, ones, ones, laplacian, w);
  const auto out = random_image(8, 8, 9);
  const auto e = objective.evaluate(out);
  EXPECT_NEAR(e.value(), 3.0 * ps::matting_penalty(laplacian, out), 1e-10);
  const auto mg = ps::matting_gradient(laplacian, out);
  for (std::size_t i = 0; i < mg.size(); ++i) EXPECT_NEAR(e.gradient.storage()[i], 3.0 * mg.storage()[i], 1e-10);
}

TEST_F(ObjectiveTest, FullGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ps::SeededCnn<double> cnn(small_spec(seed + 20));
    const std::size_t side = 8 + (seed % 3) * 4;  // 8, 12, 16
    const auto input = random_image(side, side, seed);
    const auto style = random_image(side, side, seed + 1);
    ps::ObjectiveWeights w;
    w.lambda = 10.0;
    w.gamma = 1.0;
    ps::TransferObjective<double> objective(cnn, input, style, masks(side, side, seed), masks(side, side, seed + 3),
                                            ps::build_matting_laplacian(input), w);
    const auto out = random_image(side, side, seed + 2);
    const auto analytic = objective.evaluate(out).gradient;
    auto f = [&](const std::vector<double>& x) { return objective.evaluate(ps::Image(side, side, x)).value(); };
    EXPECT_LT(ps::test::relative_error(analytic.storage(), ps::test::central_difference(f, out.storage())), 1e-4)
        << "seed " << seed;
  }
}

TEST_F(ObjectiveTest, RejectsMismatchedInputs) {
  ps::SeededCnn<double> cnn(small_spec(1));
  const auto input = random_image(8, 8, 1);
  const auto ones = ps::LabelMaskStack<double>::all_ones(8, 8);
  ps::ObjectiveWeights w;
  w.style["conv9_9"] = 1.0;
  EXPECT_THROW((ps::TransferObjective<double>(cnn, input, input, ones, ones, std::nullopt, w)), ps::Error);
  EXPECT_THROW((ps::TransferObjective<double>(cnn, input, input, ps::LabelMaskStack<double>::all_ones(8, 7), ones,
                                              std::nullopt, {})),
               ps::Error);
  ps::FileFeatureExtractor<double> file_ex({random_features("conv4_2", 2, 1, 1, 1)});
  EXPECT_THROW((ps::TransferObjective<double>(file_ex, input, input, ones, ones, std::nullopt, {})), ps::Error);
}
