#include <gtest/gtest.h>

#include <filesystem>

#include <torch/torch.h>

#include "scalebench/config_io.hpp"
#include "scalebench/errors.hpp"
#include "scalebench/model_zoo.hpp"
#include "test_support.hpp"

using namespace scalebench;
using scalebench::testing::random_image;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "scalebench_model_zoo_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

AssemblyConfig small_cd(Fusion fusion = Fusion::subtract) {
  return change_detector_config(BackboneSpec::desk(), fusion, {1, 2, 3, 4}, 32);
}

}  // namespace

TEST(TensorConversion, RoundTripsImages) {
  const auto im = random_image(7, 9, 1);
  const auto t = to_tensor(im);
  EXPECT_EQ(t.sizes(), (std::vector<int64_t>{3, 7, 9}));
  EXPECT_FLOAT_EQ(t[1][2][3].item<float>(), im.at(2, 3, 1));
  EXPECT_TRUE(bitwise_equal(to_image(t), im));
}

TEST(VisionTransformer, TapShapesAndOrder) {
  torch::manual_seed(0);
  VisionTransformer vit(BackboneSpec::desk(), 64);
  const std::vector<int> taps{1, 2, 3, 4};
  const auto out = vit->forward_with_taps(torch::rand({2, 3, 64, 64}), taps);
  ASSERT_EQ(out.taps.size(), 4u);
  for (int t : taps) EXPECT_EQ(out.taps.at(t).sizes(), (std::vector<int64_t>{2, 128, 8, 8}));
  EXPECT_EQ(out.cls.sizes(), (std::vector<int64_t>{2, 128}));
  EXPECT_EQ(out.patches.sizes(), (std::vector<int64_t>{2, 64, 128}));
}

TEST(VisionTransformer, TappingDoesNotChangeOutput) {
  torch::manual_seed(0);
  VisionTransformer vit(BackboneSpec::desk(), 64);
  vit->eval();
  torch::NoGradGuard ng;
  const auto x = torch::rand({1, 3, 64, 64});
  const std::vector<int> none, all{1, 2, 3, 4};
  const auto a = vit->forward_with_taps(x, none);
  const auto b = vit->forward_with_taps(x, all);
  EXPECT_TRUE(torch::equal(a.patches, b.patches));
  EXPECT_TRUE(torch::equal(a.cls, b.cls));
  EXPECT_TRUE(torch::equal(vit->forward(x).index({torch::indexing::Slice(), 0}), a.cls));
}

TEST(VisionTransformer, RejectsBadTapsAndSides) {
  VisionTransformer vit(BackboneSpec::desk(), 64);
  const std::vector<int> bad{0}, beyond{5};
  EXPECT_THROW(vit->forward_with_taps(torch::rand({1, 3, 64, 64}), bad), std::invalid_argument);
  EXPECT_THROW(vit->forward_with_taps(torch::rand({1, 3, 64, 64}), beyond), std::invalid_argument);
  EXPECT_ANY_THROW(vit->forward(torch::rand({1, 3, 60, 60})));
}

TEST(VisionTransformer, AcceptsOtherInputSides) {
  VisionTransformer vit(BackboneSpec::desk(), 64);
  const auto out = vit->forward(torch::rand({1, 3, 96, 96}));
  EXPECT_EQ(out.size(1), 12 * 12 + 1);
}

TEST(ChangeDetector, OutputsTwoClassMapsAtInputResolution) {
  torch::manual_seed(0);
  ChangeDetector model(small_cd());
  const auto logits = model->forward(torch::rand({2, 3, 32, 32}), torch::rand({2, 3, 32, 32}));
  EXPECT_EQ(logits.sizes(), (std::vector<int64_t>{2, 2, 32, 32}));
}

TEST(ChangeDetector, IdenticalInputsGiveZeroDifferenceFeatures) {
  torch::manual_seed(0);
  ChangeDetector model(small_cd());
  model->eval();
  torch::NoGradGuard ng;
  const auto x = torch::rand({2, 3, 32, 32});
  for (const auto& t : model->fused_taps(x, x.clone())) {
    EXPECT_EQ(t.abs().max().item<float>(), 0.0f);
  }
}

TEST(ChangeDetector, ConcatFusionDoublesChannels) {
  torch::manual_seed(0);
  ChangeDetector model(small_cd(Fusion::concat));
  const auto taps = model->fused_taps(torch::rand({1, 3, 32, 32}), torch::rand({1, 3, 32, 32}));
  ASSERT_EQ(taps.size(), 4u);
  for (const auto& t : taps) EXPECT_EQ(t.size(1), 256);
}

TEST(FuseTaps, RejectsMismatchedGrids) {
  VisionTransformer vit(BackboneSpec::desk(), 32);
  const std::vector<int> layers{1};
  const auto a = vit->forward_with_taps(torch::rand({1, 3, 32, 32}), layers);
  const auto b = vit->forward_with_taps(torch::rand({1, 3, 64, 64}), layers);
  EXPECT_THROW(fuse_taps(a, b, layers, Fusion::subtract), std::invalid_argument);
}

TEST(Classifier, PoolingVariants) {
  for (auto pooling : {Pooling::cls_token, Pooling::global_average}) {
    Classifier model(classifier_config(BackboneSpec::desk(), pooling, 5, 32));
    EXPECT_EQ(model->forward(torch::rand({3, 3, 32, 32})).sizes(), (std::vector<int64_t>{3, 5}));
  }
  BackboneSpec no_cls = BackboneSpec::desk();
  no_cls.uses_cls_token = false;
  EXPECT_THROW(classifier_config(no_cls, Pooling::cls_token, 5, 32), std::invalid_argument);
}

TEST(Assemblies, BackboneAndHeadParametersPartitionTheModel) {
  ChangeDetector model(small_cd());
  const auto backbone = model->backbone_parameters();
  const auto head = model->head_parameters();
  EXPECT_EQ(backbone.size() + head.size(), model->parameters().size());
  for (const auto& p : head) {
    for (const auto& q : backbone) EXPECT_FALSE(p.is_same(q));
  }
}

TEST(Predictor, ProducesMasksOfInputShape) {
  torch::manual_seed(0);
  ChangeDetector model(small_cd());
  const auto predict = make_predictor(model);
  std::vector<BitemporalSample> batch{{random_image(32, 32, 1), random_image(32, 32, 2), BinaryMask(32, 32)}};
  const auto masks = predict(batch);
  ASSERT_EQ(masks.size(), 1u);
  EXPECT_EQ(masks[0].height, 32);
  EXPECT_EQ(masks[0].width, 32);
}

TEST(Checkpoint, RoundTripReproducesOutputsExactly) {
  torch::manual_seed(1);
  ChangeDetector a(small_cd());
  const auto path = temp_path("roundtrip.pt");
  save_checkpoint(path.string(), to_json(a->config()), *a);
  EXPECT_EQ(read_checkpoint_config(path.string()), to_json(a->config()));

  torch::manual_seed(2);
  ChangeDetector b(small_cd());
  load_checkpoint(path.string(), to_json(b->config()), *b);
  a->eval();
  b->eval();
  torch::NoGradGuard ng;
  const auto x = torch::rand({2, 3, 32, 32}), y = torch::rand({2, 3, 32, 32});
  EXPECT_TRUE(torch::equal(a->forward(x, y), b->forward(x, y)));
}

TEST(Checkpoint, ConfigMismatchIsRejected) {
  ChangeDetector a(small_cd());
  const auto path = temp_path("mismatch.pt");
  save_checkpoint(path.string(), to_json(a->config()), *a);
  ChangeDetector other(small_cd(Fusion::concat));
  EXPECT_THROW(load_checkpoint(path.string(), to_json(other->config()), *other), ConfigError);
  // Same header but different structure is caught at the tensor level.
  EXPECT_THROW(load_checkpoint(path.string(), to_json(a->config()), *other), ConfigError);
}

TEST(Checkpoint, MissingFileIsAConfigError) {
  ChangeDetector a(small_cd());
  EXPECT_THROW(load_checkpoint("/nonexistent/model.pt", to_json(a->config()), *a), ConfigError);
}

TEST(CopyWeights, MakesModulesIdentical) {
  torch::manual_seed(3);
  VisionTransformer a(BackboneSpec::desk(), 32);
  VisionTransformer b(BackboneSpec::desk(), 32);
  copy_weights(*a, *b);
  const auto pa = a->parameters(), pb = b->parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}
