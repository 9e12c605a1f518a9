#pragma once

#include <cstdint>
#include <random>

#include "photostyle/features.hpp"
#include "photostyle/image.hpp"
#include "photostyle/losses.hpp"
#include "photostyle/matting.hpp"
#include "photostyle/optimize.hpp"
#include "photostyle/segmentation.hpp"

namespace photostyle {

struct TransferConfig {
  ObjectiveWeights weights;
  MattingParams matting;
  OptimizerParams stage1;
  OptimizerParams stage2;
};

template <typename Real = double>
struct TransferResult {
  StageResult<Real> stage1;
  StageResult<Real> stage2;

  [[nodiscard]] const BasicImage<Real>& stage1_image() const noexcept { return stage1.image; }
  [[nodiscard]] const BasicImage<Real>& final_image() const noexcept { return stage2.image; }
};

/// Uniform(0,1) noise, one draw per channel value in storage order.
template <typename Real = double>
BasicImage<Real> noise_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BasicImage<Real> image(height, width);
  for (auto& v : image.storage()) v = static_cast<Real>(detail::unit_uniform(rng));
  return image;
}

/// Stage 1 minimizes content + augmented style (no photorealism term) from
/// seeded noise; stage 2 adds λ·L_m and warm-starts from the stage-1 image.
template <typename Real>
TransferResult<Real> two_stage_transfer(const FeatureExtractor<Real>& extractor, const BasicImage<Real>& input,
                                        const BasicImage<Real>& style, const LabelMaskStack<Real>& input_masks,
                                        const LabelMaskStack<Real>& style_masks, const TransferConfig& config,
                                        const IterationCallback<Real>& stage1_callback = {},
                                        const IterationCallback<Real>& stage2_callback = {}) {
  TransferObjective<Real> objective(extractor, input, style, input_masks, style_masks,
                                    build_matting_laplacian(input, config.matting), config.weights);
  auto evaluate = [&objective](const BasicImage<Real>& image) { return objective.evaluate(image); };

  TransferResult<Real> result;
  objective.set_lambda(0.0);
  const auto init = noise_image<Real>(input.height(), input.width(), config.stage1.seed);
  result.stage1 = minimize(evaluate, init, config.stage1, stage1_callback);

  objective.set_lambda(config.weights.lambda);
  result.stage2 = minimize(evaluate, result.stage1.image, config.stage2, stage2_callback);
  return result;
}

}  // namespace photostyle
