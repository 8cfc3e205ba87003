#include <gtest/gtest.h>

#include <torch/torch.h>

#include "scalebench/model_zoo.hpp"
#include "scalebench/scale_distortion.hpp"
#include "test_support.hpp"

using namespace scalebench;
using scalebench::testing::random_image;

namespace {

// Reference degradation through torch's interpolate.
Image torch_distort(const Image& im, int k, Interpolation kind) {
  namespace F = torch::nn::functional;
  auto x = to_tensor(im).unsqueeze(0);
  const std::vector<int64_t> small{reduced_side(im.height, k), reduced_side(im.width, k)};
  const std::vector<int64_t> full{im.height, im.width};
  auto opts = F::InterpolateFuncOptions();
  if (kind == Interpolation::bilinear) {
    opts = opts.mode(torch::kBilinear).align_corners(false);
  } else {
    opts = opts.mode(torch::kNearest);
  }
  x = F::interpolate(x, opts.size(small));
  x = F::interpolate(x, opts.size(full));
  return to_image(x.squeeze(0));
}

float max_abs_diff(const Image& a, const Image& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

}  // namespace

TEST(ReducedSide, RoundsHalfUp) {
  EXPECT_EQ(reduced_side(64, 2), 32);
  EXPECT_EQ(reduced_side(10, 4), 3);  // 2.5 -> 3
  EXPECT_EQ(reduced_side(9, 4), 2);   // 2.25 -> 2
  EXPECT_EQ(reduced_side(11, 2), 6);  // 5.5 -> 6
}

TEST(Distort, FactorOneIsBitwiseCopy) {
  const auto im = random_image(31, 17, 3);
  EXPECT_TRUE(bitwise_equal(distort(im, 1), im));
}

TEST(Distort, RejectsInvalidFactors) {
  const auto im = random_image(16, 16, 1);
  EXPECT_THROW(distort(im, 0), std::invalid_argument);
  EXPECT_THROW(distort(im, -2), std::invalid_argument);
  EXPECT_THROW(distort(im, 16), std::invalid_argument);
}

TEST(Distort, ConstantImagesAreFixedPoints) {
  for (float v : {0.0f, 0.37f, 1.0f}) {
    Image im(40, 40, 3, v);
    for (int k : {2, 4, 8}) {
      for (auto kind : {Interpolation::bilinear, Interpolation::nearest}) {
        const auto out = distort(im, k, kind);
        for (float p : out.pixels) EXPECT_NEAR(p, v, 1e-6f);
      }
    }
  }
}

TEST(Distort, PixelCheckerboardCollapsesToHalfAtFactorTwo) {
  Image im(16, 16, 1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) im.at(y, x, 0) = static_cast<float>((x + y) % 2);
  }
  for (float p : distort(im, 2).pixels) EXPECT_NEAR(p, 0.5f, 1e-6f);
}

TEST(Distort, BilinearMatchesTorchInterpolate) {
  for (int seed = 0; seed < 6; ++seed) {
    const int h = 20 + 7 * seed, w = 64 - 5 * seed;
    const auto im = random_image(h, w, static_cast<std::uint64_t>(seed));
    for (int k : {2, 3, 4, 8}) {
      EXPECT_LT(max_abs_diff(distort(im, k), torch_distort(im, k, Interpolation::bilinear)), 1e-5f)
          << h << "x" << w << " k=" << k;
    }
  }
}

TEST(Distort, NearestMatchesTorchInterpolate) {
  const auto im = random_image(37, 50, 9);
  for (int k : {2, 4, 8}) {
    EXPECT_LT(max_abs_diff(distort(im, k, Interpolation::nearest),
                           torch_distort(im, k, Interpolation::nearest)),
              1e-6f);
  }
}

TEST(Distort, PreservesShapeAndRange) {
  const auto im = random_image(33, 45, 4);
  for (int k : {2, 4, 8}) {
    const auto out = distort(im, k);
    EXPECT_TRUE(out.same_shape(im));
    for (float p : out.pixels) {
      EXPECT_GE(p, 0.0f);
      EXPECT_LE(p, 1.0f);
    }
  }
}

TEST(DistortSample, ClassificationRejectsSecondImageTarget) {
  ClassificationSample s{random_image(16, 16, 1), 3};
  EXPECT_THROW(distort_sample(s, 2, DistortionTarget::second_image_only, Interpolation::bilinear),
               std::invalid_argument);
  const auto out = distort_sample(s, 2, DistortionTarget::whole_image, Interpolation::bilinear);
  EXPECT_EQ(out.label, 3);
}

TEST(BuildEvalVariants, ChangeDetectionKeepsFirstImageAndMask) {
  BitemporalSample s{random_image(32, 32, 1), random_image(32, 32, 2),
                     scalebench::testing::random_mask(32, 32, 3)};
  const auto variants = build_eval_variants(s, change_detection_spec());
  ASSERT_EQ(variants.size(), 4u);
  for (const auto& v : variants) {
    EXPECT_TRUE(bitwise_equal(v.sample.first, s.first));
    EXPECT_EQ(v.sample.change_mask.bits, s.change_mask.bits);
    if (v.factor > 1) {
      EXPECT_FALSE(bitwise_equal(v.sample.second, s.second));
    }
  }
  EXPECT_TRUE(bitwise_equal(variants[0].sample.second, s.second));
}

TEST(BuildEvalVariants, WholeImageDegradesBoth) {
  BitemporalSample s{random_image(32, 32, 1), random_image(32, 32, 2), BinaryMask(32, 32)};
  DistortionSpec spec;
  const auto variants = build_eval_variants(s, spec);
  EXPECT_FALSE(bitwise_equal(variants[2].sample.first, s.first));
  EXPECT_FALSE(bitwise_equal(variants[2].sample.second, s.second));
}

TEST(DistortionSpec, ValidatesFactorList) {
  DistortionSpec spec;
  spec.factors = {2, 4};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.factors = {1, 4, 2};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.factors = {1, 2, 4, 8, 16};
  EXPECT_NO_THROW(spec.validate());
}
