#pragma once

// Training-time scale augmentation. Delegates to distort_sample so training
// and evaluation degrade images with the same operator.

#include <array>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include "scalebench/scale_distortion.hpp"

namespace scalebench {

/// include_identity draws k from {1,2,4,8}; strict draws from {2,4,8}.
enum class AugmentationMode { include_identity, strict };

inline std::string_view to_string(AugmentationMode m) {
  return m == AugmentationMode::include_identity ? "include_identity" : "strict";
}

inline AugmentationMode parse_augmentation_mode(std::string_view s) {
  if (s == "include_identity") return AugmentationMode::include_identity;
  if (s == "strict") return AugmentationMode::strict;
  throw std::invalid_argument("unknown augmentation mode '" + std::string(s) + "'");
}

template <class Rng>
int sample_augmentation_factor(AugmentationMode mode, Rng& rng) {
  static constexpr std::array<int, 4> kFactors{1, 2, 4, 8};
  const int first = mode == AugmentationMode::include_identity ? 0 : 1;
  std::uniform_int_distribution<int> pick(first, 3);
  return kFactors[pick(rng)];
}

inline constexpr DistortionTarget augmentation_target(const ClassificationSample*) {
  return DistortionTarget::whole_image;
}
inline constexpr DistortionTarget augmentation_target(const BitemporalSample*) {
  return DistortionTarget::second_image_only;
}

/// Degrades with a fixed factor; labels and masks pass through untouched.
template <class Sample>
Sample apply_scale_augmentation(const Sample& sample, int k,
                                Interpolation kind = Interpolation::bilinear) {
  return distort_sample(sample, k, augmentation_target(&sample), kind);
}

/// Identity when disabled; otherwise draws k and degrades the image (or only
/// the second image of a bitemporal pair).
template <class Sample, class Rng>
Sample apply_train_augmentation(const Sample& sample, bool scale_aug, Rng& rng,
                                AugmentationMode mode = AugmentationMode::include_identity,
                                Interpolation kind = Interpolation::bilinear) {
  if (!scale_aug) return sample;
  return apply_scale_augmentation(sample, sample_augmentation_factor(mode, rng), kind);
}

}  // namespace scalebench
