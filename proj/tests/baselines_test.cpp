#include <gtest/gtest.h>

#include "photostyle/baselines.hpp"
#include "support/test_support.hpp"

namespace ps = photostyle;
using ps::test::random_image;

namespace {

void expect_stats_match(const ps::reinhard::ChannelStats& a, const ps::reinhard::ChannelStats& b, double tol) {
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(a.mean[c], b.mean[c], tol) << "channel " << c;
    EXPECT_NEAR(a.stddev[c], b.stddev[c], tol) << "channel " << c;
  }
}

}  // namespace

TEST(Reinhard, ColorSpaceRoundTrip) {
  const auto image = random_image(5, 5, 1, 0.05, 1.0);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const ps::reinhard::Vec3 rgb{image.at_pixel(p, 0), image.at_pixel(p, 1), image.at_pixel(p, 2)};
    const auto back = ps::reinhard::lab_to_rgb(ps::reinhard::rgb_to_lab(rgb));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(back[c], rgb[c], 1e-12);
  }
}

TEST(Reinhard, StyleEqualsInputIsIdentity) {
  const auto image = random_image(8, 9, 2, 0.05, 1.0);
  const auto out = ps::reinhard_transfer(image, image);
  for (std::size_t i = 0; i < image.size(); ++i) EXPECT_NEAR(out.storage()[i], image.storage()[i], 1e-6);
}

TEST(Reinhard, ConstantInputTakesStyleMean) {
  const ps::Image gray(4, 4, 0.5);
  const auto style = random_image(6, 5, 3, 0.05, 1.0);
  const auto out = ps::reinhard_transfer(gray, style);
  for (std::size_t p = 1; p < out.pixel_count(); ++p)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.at_pixel(p, c), out.at_pixel(0, c), 1e-12);
  const auto out_stats = ps::reinhard::lab_stats(out);
  const auto style_stats = ps::reinhard::lab_stats(style);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out_stats.mean[c], style_stats.mean[c], 1e-9);
}

TEST(Reinhard, StatisticsMatchStyle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto input = random_image(10, 12, seed, 0.02, 1.0);
    const auto style = random_image(9, 7, seed + 100, 0.02, 0.8);
    const auto out = ps::reinhard_transfer(input, style);
    expect_stats_match(ps::reinhard::lab_stats(out), ps::reinhard::lab_stats(style), 1e-6);
  }
}

TEST(Reinhard, IsIdempotent) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto input = random_image(7, 7, seed, 0.05, 1.0);
    const auto style = random_image(7, 7, seed + 9, 0.05, 0.6);
    const auto once = ps::reinhard_transfer(input, style);
    const auto twice = ps::reinhard_transfer(once, style);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice.storage()[i], once.storage()[i], 1e-6);
  }
}

TEST(Reinhard, RejectsEmptyImages) {
  EXPECT_THROW((void)ps::reinhard_transfer(ps::Image{}, random_image(2, 2, 1)), ps::Error);
}
