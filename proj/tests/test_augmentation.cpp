#include <gtest/gtest.h>

#include <map>
#include <random>

#include "scalebench/augmentation.hpp"
#include "test_support.hpp"

using namespace scalebench;
using scalebench::testing::random_image;

TEST(AugmentationFactor, UniformOverFourFactors) {
  std::mt19937_64 rng(123);
  const int n = 8000;
  std::map<int, int> counts;
  for (int i = 0; i < n; ++i) ++counts[sample_augmentation_factor(AugmentationMode::include_identity, rng)];
  ASSERT_EQ(counts.size(), 4u);
  double chi2 = 0.0;
  for (int k : {1, 2, 4, 8}) {
    const double expected = n / 4.0;
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  EXPECT_LT(chi2, 16.27);  // df = 3, p = 0.001
}

TEST(AugmentationFactor, StrictModeNeverDrawsIdentity) {
  std::mt19937_64 rng(7);
  std::map<int, int> counts;
  for (int i = 0; i < 6000; ++i) ++counts[sample_augmentation_factor(AugmentationMode::strict, rng)];
  EXPECT_EQ(counts.count(1), 0u);
  double chi2 = 0.0;
  for (int k : {2, 4, 8}) chi2 += (counts[k] - 2000.0) * (counts[k] - 2000.0) / 2000.0;
  EXPECT_LT(chi2, 13.82);  // df = 2, p = 0.001
}

TEST(TrainAugmentation, DisabledIsIdentity) {
  std::mt19937_64 rng(1);
  ClassificationSample s{random_image(32, 32, 2), 1};
  for (int i = 0; i < 20; ++i) {
    const auto out = apply_train_augmentation(s, false, rng);
    EXPECT_TRUE(bitwise_equal(out.image, s.image));
  }
}

TEST(TrainAugmentation, UsesTheEvaluationOperator) {
  ClassificationSample s{random_image(32, 32, 3), 0};
  for (int k : {1, 2, 4, 8}) {
    const auto out = apply_scale_augmentation(s, k);
    EXPECT_TRUE(bitwise_equal(out.image, distort(s.image, k)));
  }
}

TEST(TrainAugmentation, BitemporalDegradesOnlySecondImage) {
  std::mt19937_64 rng(4);
  BitemporalSample s{random_image(32, 32, 5), random_image(32, 32, 6), scalebench::testing::random_mask(32, 32, 7)};
  int degraded = 0;
  for (int i = 0; i < 40; ++i) {
    const auto out = apply_train_augmentation(s, true, rng);
    EXPECT_TRUE(bitwise_equal(out.first, s.first));
    EXPECT_EQ(out.change_mask.bits, s.change_mask.bits);
    degraded += bitwise_equal(out.second, s.second) ? 0 : 1;
  }
  EXPECT_GT(degraded, 0);
  EXPECT_LT(degraded, 40);  // identity is drawn a quarter of the time
}

TEST(AugmentationMode, ParsesNames) {
  EXPECT_EQ(parse_augmentation_mode("strict"), AugmentationMode::strict);
  EXPECT_EQ(parse_augmentation_mode(to_string(AugmentationMode::include_identity)),
            AugmentationMode::include_identity);
  EXPECT_THROW(parse_augmentation_mode("sometimes"), std::invalid_argument);
}
