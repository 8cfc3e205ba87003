#include <gtest/gtest.h>

#include <torch/torch.h>

#include "scalebench/model_config.hpp"
#include "scalebench/model_zoo.hpp"

using namespace scalebench;

namespace {

// Counts an instantiated backbone by walking its layers: every Linear is
// applied to all tokens, the patch convolution once per grid cell, and each
// block adds the two attention matmuls.
double counted_vit_flops(const BackboneSpec& spec, int side) {
  VisionTransformer vit(spec, side);
  const double grid = side / spec.patch_size;
  const double tokens = grid * grid + (spec.uses_cls_token ? 1 : 0);
  double flops = 0.0;
  int blocks = 0;
  for (const auto& item : vit->named_modules()) {
    const auto& m = item.value();
    if (auto* lin = m->as<torch::nn::Linear>()) {
      flops += 2.0 * tokens * lin->weight.size(0) * lin->weight.size(1);
    } else if (auto* conv = m->as<torch::nn::Conv2d>()) {
      const auto& w = conv->weight;
      flops += 2.0 * grid * grid * w.size(0) * w.size(1) * w.size(2) * w.size(3);
    } else if (m->as<TransformerBlock>()) {
      ++blocks;
    }
  }
  flops += blocks * 2.0 * 2.0 * tokens * tokens * spec.width;
  return flops / 1e9;
}

}  // namespace

TEST(Flops, LinearLayerDefinition) {
  EXPECT_DOUBLE_EQ(linear_flops(10, 4, 3), 240.0);
  EXPECT_DOUBLE_EQ(conv2d_flops(2, 2, 3, 5, 3), 2.0 * 4 * 3 * 5 * 9);
}

TEST(Flops, ClosedFormMatchesLayerWalkOfDeskBackbone) {
  const auto spec = BackboneSpec::desk();
  EXPECT_NEAR(vit_forward_flops(spec, 64), counted_vit_flops(spec, 64), 1e-9);
  EXPECT_NEAR(vit_forward_flops(spec, 32), counted_vit_flops(spec, 32), 1e-9);
}

TEST(Flops, ClosedFormMatchesLayerWalkOfVitBase) {
  const auto spec = BackboneSpec::vit_base_16();
  EXPECT_NEAR(vit_forward_flops(spec, 224), counted_vit_flops(spec, 224), 1e-6);
}

TEST(Flops, VitBaseAt224NearPublishedProfilerFigure) {
  // Profilers report ~17.6 for ViT-B/16 at 224; they count a multiply-add once.
  const double macs = vit_forward_flops(BackboneSpec::vit_base_16(), 224, FlopConvention::multiply_add_as_one);
  EXPECT_NEAR(macs, 17.6, 1.76);
  EXPECT_NEAR(vit_forward_flops(BackboneSpec::vit_base_16(), 224), 2.0 * macs, 1e-9);
}

TEST(Flops, VitBaseAt256PassesClassificationGate) {
  const auto a = classifier_config(BackboneSpec::vit_base_16(), Pooling::cls_token, 45, 256);
  const auto r = gate(a);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.total, 50.0);
  EXPECT_DOUBLE_EQ(r.budget, 50.0);
}

TEST(Flops, OversizedSpecFailsGate) {
  BackboneSpec huge{16, 48, 4096, 32, 4.0, true, 3};
  const auto r = gate(classifier_config(huge, Pooling::cls_token, 10, 256));
  EXPECT_FALSE(r.passed);
  EXPECT_THROW(require_passed(r), GateFailure);
}

TEST(Flops, DeskClassifierPassesWithMargin) {
  const auto r = gate(classifier_config(BackboneSpec::desk(), Pooling::cls_token, 4, 64));
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.total, 1.0);
}

TEST(Flops, ChangeDetectorCountsBackboneTwice) {
  const auto a = change_detector_config(BackboneSpec::desk(), Fusion::subtract, {1, 2, 3, 4}, 64);
  const auto r = gate(a);
  EXPECT_DOUBLE_EQ(r.budget, 100.0);
  ASSERT_GE(r.per_component.size(), 2u);
  EXPECT_EQ(r.per_component[0].second, r.per_component[1].second);
  EXPECT_NEAR(r.per_component[0].second, vit_forward_flops(BackboneSpec::desk(), 64), 1e-12);
  double sum = 0.0;
  for (const auto& [_, g] : r.per_component) sum += g;
  EXPECT_NEAR(r.total, sum, 1e-6 * r.total);
}

TEST(Flops, ConcatFusionCostsMoreThanSubtract) {
  const auto sub = gate(change_detector_config(BackboneSpec::desk(), Fusion::subtract, {1, 2, 3, 4}, 64));
  const auto cat = gate(change_detector_config(BackboneSpec::desk(), Fusion::concat, {1, 2, 3, 4}, 64));
  EXPECT_GT(cat.total, sub.total);
}

TEST(Flops, UnaccountedComponentRejected) {
  std::vector<ComponentCost> costs{ComponentCost::analytic("backbone", 1.0),
                                   ComponentCost::unknown("mystery_head")};
  try {
    gate(costs, Task::classification);
    FAIL() << "expected UnaccountedComponent";
  } catch (const UnaccountedComponent& e) {
    EXPECT_EQ(e.component(), "mystery_head");
  }
  costs[1] = ComponentCost::measured("mystery_head", 2.5);
  const auto r = gate(costs, Task::classification);
  EXPECT_DOUBLE_EQ(r.total, 3.5);
}

TEST(Flops, StrictlyIncreasingInDepthWidthAndSide) {
  const auto base = BackboneSpec::desk();
  const double f = vit_forward_flops(base, 64);
  auto deeper = base;
  deeper.depth += 1;
  auto wider = base;
  wider.width += base.heads;
  EXPECT_GT(vit_forward_flops(deeper, 64), f);
  EXPECT_GT(vit_forward_flops(wider, 64), f);
  EXPECT_GT(vit_forward_flops(base, 72), f);
}

TEST(Flops, RejectsNonDivisibleSide) {
  EXPECT_THROW(vit_forward_flops(BackboneSpec::desk(), 63), std::invalid_argument);
}

TEST(Flops, TotalIsSumOfComponentsForManyAssemblies) {
  for (int side : {32, 64, 128}) {
    for (auto fusion : {Fusion::subtract, Fusion::concat}) {
      const auto r = gate(change_detector_config(BackboneSpec::desk(), fusion, {1, 2, 3, 4}, side));
      double sum = 0.0;
      for (const auto& [_, g] : r.per_component) sum += g;
      EXPECT_NEAR(r.total, sum, 1e-6 * r.total);
      EXPECT_EQ(r.passed, r.total <= r.budget);
    }
  }
}
