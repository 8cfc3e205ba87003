#pragma once

// Resolution degradation: shrink by an integer factor and resize back to the
// original shape. The same operator serves evaluation variants and
// training-time scale augmentation.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scalebench/image.hpp"
#include "scalebench/resample.hpp"

namespace scalebench {

enum class DistortionTarget { whole_image, second_image_only };

inline std::string_view to_string(DistortionTarget t) {
  return t == DistortionTarget::whole_image ? "whole_image" : "second_image_only";
}

inline DistortionTarget parse_distortion_target(std::string_view s) {
  if (s == "whole_image") return DistortionTarget::whole_image;
  if (s == "second_image_only") return DistortionTarget::second_image_only;
  throw std::invalid_argument("unknown distortion target '" + std::string(s) + "'");
}

struct DistortionSpec {
  std::vector<int> factors{1, 2, 4, 8};
  DistortionTarget target = DistortionTarget::whole_image;
  Interpolation interpolation = Interpolation::bilinear;

  void validate() const {
    if (factors.empty() || factors.front() != 1) {
      throw std::invalid_argument("DistortionSpec: factors must start with 1");
    }
    for (std::size_t i = 1; i < factors.size(); ++i) {
      if (factors[i] <= factors[i - 1]) {
        throw std::invalid_argument(
            "DistortionSpec: factors must be strictly ascending");
      }
    }
  }
};

inline DistortionSpec change_detection_spec() {
  return {{1, 2, 4, 8}, DistortionTarget::second_image_only, Interpolation::bilinear};
}

/// round(side / k) with halves rounded up.
constexpr int reduced_side(int side, int k) { return (2 * side + k) / (2 * k); }

/// Downscale by 1/k and upscale back. k == 1 returns an exact copy.
inline Image distort(const Image& image, int k,
                     Interpolation kind = Interpolation::bilinear) {
  if (k <= 0) throw std::invalid_argument("distort: factor must be >= 1");
  if (k == 1) return image;
  if (k >= std::min(image.height, image.width)) {
    throw std::invalid_argument("distort: factor " + std::to_string(k) +
                                " collapses a " + std::to_string(image.height) +
                                "x" + std::to_string(image.width) + " image");
  }
  const Image small =
      resize(image, reduced_side(image.height, k), reduced_side(image.width, k), kind);
  return resize(small, image.height, image.width, kind);
}

inline ClassificationSample distort_sample(const ClassificationSample& s, int k,
                                           DistortionTarget target,
                                           Interpolation kind) {
  if (target != DistortionTarget::whole_image) {
    throw std::invalid_argument(
        "second_image_only distortion requires a bitemporal sample");
  }
  return {distort(s.image, k, kind), s.label};
}

inline BitemporalSample distort_sample(const BitemporalSample& s, int k,
                                       DistortionTarget target,
                                       Interpolation kind) {
  BitemporalSample out;
  out.first = target == DistortionTarget::whole_image ? distort(s.first, k, kind)
                                                       : s.first;
  out.second = distort(s.second, k, kind);
  out.change_mask = s.change_mask;
  return out;
}

template <class Sample>
struct Variant {
  int factor;
  Sample sample;
};

/// One degraded copy of `sample` per factor of `spec`, in factor order.
template <class Sample>
std::vector<Variant<Sample>> build_eval_variants(const Sample& sample,
                                                 const DistortionSpec& spec) {
  spec.validate();
  std::vector<Variant<Sample>> variants;
  variants.reserve(spec.factors.size());
  for (int k : spec.factors) {
    variants.push_back({k, distort_sample(sample, k, spec.target, spec.interpolation)});
  }
  return variants;
}

}  // namespace scalebench
