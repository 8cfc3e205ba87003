#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "scalebench/evaluation.hpp"
#include "scalebench/metrics.hpp"
#include "test_support.hpp"

using namespace scalebench;

namespace {

// Independent trapezoid over the standard grid, written out term by term.
double trapezoid_1248(double s1, double s2, double s4, double s8) {
  return (0.25 - 0.125) * (s8 + s4) / 2.0 + (0.5 - 0.25) * (s4 + s2) / 2.0 + (1.0 - 0.5) * (s2 + s1) / 2.0;
}

RobustnessCurve curve_1248(double s1, double s2, double s4, double s8) {
  const std::vector<int> f{1, 2, 4, 8};
  const std::vector<double> s{s1, s2, s4, s8};
  return RobustnessCurve::from_factors(f, s);
}

}  // namespace

TEST(Accuracy, CountsMatches) {
  const std::vector<int> p{0, 1, 2, 2}, l{0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(accuracy(p, l), 75.0);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), std::invalid_argument);
}

TEST(F1, PerfectAndEmpty) {
  BinaryMask gt(4, 4);
  gt.at(1, 1) = gt.at(2, 2) = 1;
  EXPECT_DOUBLE_EQ(f1_score(confusion(gt, gt)), 100.0);
  // No positives anywhere: defined as perfect agreement.
  EXPECT_DOUBLE_EQ(f1_score(confusion(BinaryMask(4, 4), BinaryMask(4, 4))), 100.0);
  EXPECT_DOUBLE_EQ(f1_score(confusion(BinaryMask(4, 4), gt)), 0.0);
}

TEST(F1, HandComputedCounts) {
  BinaryMask gt(1, 6), pred(1, 6);
  // gt: 1 1 1 0 0 0, pred: 1 1 0 1 0 0 -> tp 2, fp 1, fn 1
  gt.bits = {1, 1, 1, 0, 0, 0};
  pred.bits = {1, 1, 0, 1, 0, 0};
  const auto c = confusion(pred, gt);
  EXPECT_EQ(c.tp, 2);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_EQ(c.tn, 2);
  EXPECT_NEAR(f1_score(c), 100.0 * 4.0 / 6.0, 1e-12);
}

TEST(MicroF1, PoolsCountsAcrossImages) {
  BinaryMask a(1, 2), b(1, 2);
  a.bits = {1, 0};
  b.bits = {1, 1};
  BinaryMask pa(1, 2), pb(1, 2);
  pa.bits = {1, 0};  // perfect
  pb.bits = {0, 0};  // misses both
  const std::vector<BinaryMask> preds{pa, pb}, gts{a, b};
  // Pooled: tp 1, fn 2 -> 2/(2+2) ; per-image mean would be (100+0)/2.
  EXPECT_NEAR(micro_f1(preds, gts), 50.0, 1e-12);
  ConfusionCounts pooled = confusion(pa, a);
  pooled += confusion(pb, b);
  EXPECT_NEAR(f1_score(pooled), 50.0, 1e-12);
}

TEST(Auc, ReproducesPublishedChangeDetectionRows) {
  // Rows of the change-detection benchmark table, 1:1, 1:2, 1:4, 1:8 -> AUC.
  EXPECT_NEAR(auc(curve_1248(90.7, 87.6, 40.2, 2.0)), 63.3, 0.5);
  EXPECT_NEAR(auc(curve_1248(90.6, 87.6, 50.4, 2.0)), 65.2, 0.5);
}

TEST(Auc, MatchesHandTrapezoid) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    EXPECT_NEAR(auc(curve_1248(a, b, c, d)), trapezoid_1248(a, b, c, d), 1e-9);
  }
}

TEST(Auc, FlatCurveIsSevenEighthsOfValue) {
  for (double v : {0.0, 1.0, 42.5, 100.0}) {
    EXPECT_NEAR(auc(curve_1248(v, v, v, v)), 0.875 * v, 1e-9);
  }
}

TEST(Auc, IsLinearInScores) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 100.0);
  for (int t = 0; t < 200; ++t) {
    double s[4], r[4];
    for (auto& x : s) x = u(rng);
    for (auto& x : r) x = u(rng);
    const double alpha = u(rng) / 10.0, beta = u(rng) / 10.0;
    const double lhs = auc(curve_1248(alpha * s[0] + beta * r[0], alpha * s[1] + beta * r[1],
                                      alpha * s[2] + beta * r[2], alpha * s[3] + beta * r[3]));
    const double rhs = alpha * auc(curve_1248(s[0], s[1], s[2], s[3])) +
                       beta * auc(curve_1248(r[0], r[1], r[2], r[3]));
    EXPECT_NEAR(lhs, rhs, 1e-9);
  }
}

TEST(Auc, MonotoneInEachScore) {
  const double base = auc(curve_1248(80, 70, 60, 50));
  EXPECT_GT(auc(curve_1248(81, 70, 60, 50)), base);
  EXPECT_GT(auc(curve_1248(80, 70, 60, 51)), base);
}

TEST(RobustnessCurve, Validation) {
  EXPECT_THROW(RobustnessCurve({{1.0, 5.0}}), std::invalid_argument);
  EXPECT_THROW(RobustnessCurve({{0.5, 5.0}, {0.25, 5.0}, {1.0, 5.0}}), std::invalid_argument);
  EXPECT_THROW(RobustnessCurve({{0.5, 5.0}, {0.75, 5.0}}), std::invalid_argument);
  EXPECT_NO_THROW(RobustnessCurve({{0.5, 5.0}, {1.0, 5.0}}));
}

TEST(Evaluation, OracleChangeDetectorScoresHundredEverywhere) {
  std::vector<BitemporalSample> data;
  for (int i = 0; i < 5; ++i) {
    data.push_back({scalebench::testing::random_image(32, 32, i), scalebench::testing::random_image(32, 32, i + 10),
                    scalebench::testing::random_mask(32, 32, i)});
  }
  FlopsReport ok;
  ok.passed = true;
  const auto r = evaluate_change_detector(oracle_change_detector(), data, change_detection_spec(), ok, 2);
  ASSERT_EQ(r.per_scale.size(), 4u);
  for (const auto& s : r.per_scale) EXPECT_DOUBLE_EQ(s.score, 100.0);
  EXPECT_NEAR(r.auc, 87.5, 1e-9);
}

TEST(Evaluation, RefusesFailedGate) {
  std::vector<ClassificationSample> data{{scalebench::testing::random_image(16, 16, 1), 0}};
  FlopsReport failed;
  failed.passed = false;
  EXPECT_THROW(evaluate_classifier(oracle_classifier(), data, DistortionSpec{}, failed), GateFailure);
}

TEST(Evaluation, ScoreIsIndependentOfBatchSize) {
  std::vector<ClassificationSample> data;
  for (int i = 0; i < 9; ++i) data.push_back({scalebench::testing::random_image(16, 16, i), i % 3});
  // A model that reads pixels: predicts from mean intensity.
  ClassifierFn model = [](std::span<const ClassificationSample> batch) {
    std::vector<int> out;
    for (const auto& s : batch) {
      double m = 0.0;
      for (float p : s.image.pixels) m += p;
      out.push_back(static_cast<int>(m * 1000) % 3);
    }
    return out;
  };
  FlopsReport ok;
  ok.passed = true;
  const auto a = evaluate_classifier(model, data, DistortionSpec{}, ok, 1);
  const auto b = evaluate_classifier(model, data, DistortionSpec{}, ok, 4);
  for (std::size_t i = 0; i < a.per_scale.size(); ++i) EXPECT_EQ(a.per_scale[i].score, b.per_scale[i].score);
}
