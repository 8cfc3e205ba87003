#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <torch/torch.h>

#include "scalebench/errors.hpp"
#include "scalebench/finetune.hpp"
#include "scalebench/synthetic.hpp"

using namespace scalebench;

namespace {

std::vector<ClassificationSample> small_cls_data() {
  SyntheticClsParams p;
  p.side = 32;
  p.num_classes = 3;
  return make_synthetic_classification_fixture(4, p, 11);
}

TrainConfig short_run(bool freeze) {
  auto c = classification_finetune_defaults();
  c.epochs = 2;
  c.batch_size = 4;
  c.warmup_steps = 1;
  c.freeze_backbone = freeze;
  c.optimizer.peak_lr = 1e-3;
  return c;
}

std::set<const void*> impls(const std::vector<torch::Tensor>& ps) {
  std::set<const void*> out;
  for (const auto& p : ps) out.insert(p.unsafeGetTensorImpl());
  return out;
}

}  // namespace

TEST(Finetune, FrozenBackboneIsBitwiseUnchangedAndOnlyHeadHasState) {
  torch::manual_seed(0);
  Classifier model(classifier_config(BackboneSpec::desk(), Pooling::global_average, 3, 32));
  std::vector<torch::Tensor> backbone_before, head_before;
  for (const auto& p : model->backbone_parameters()) backbone_before.push_back(p.clone());
  for (const auto& p : model->head_parameters()) head_before.push_back(p.clone());

  const auto data = small_cls_data();
  std::set<const void*> state_owners;
  TrainHooks hooks;
  hooks.on_finish = [&](const torch::optim::Optimizer& opt) {
    for (const auto& [key, st] : opt.state()) state_owners.insert(key);
  };
  finetune(model, std::span<const ClassificationSample>(data), short_run(true), hooks);

  const auto backbone = model->backbone_parameters();
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    EXPECT_TRUE(torch::equal(backbone[i], backbone_before[i]));
  }
  bool head_moved = false;
  const auto head = model->head_parameters();
  for (std::size_t i = 0; i < head.size(); ++i) head_moved |= !torch::equal(head[i], head_before[i]);
  EXPECT_TRUE(head_moved);

  const auto head_ids = impls(head);
  const auto backbone_ids = impls(backbone);
  EXPECT_FALSE(state_owners.empty());
  for (const void* k : state_owners) {
    EXPECT_TRUE(head_ids.count(k));
    EXPECT_FALSE(backbone_ids.count(k));
  }
}

TEST(Finetune, UnfrozenRunUpdatesTheBackbone) {
  torch::manual_seed(0);
  Classifier model(classifier_config(BackboneSpec::desk(), Pooling::global_average, 3, 32));
  const auto before = model->backbone_parameters()[0].clone();
  const auto data = small_cls_data();
  finetune(model, std::span<const ClassificationSample>(data), short_run(false));
  EXPECT_FALSE(torch::equal(model->backbone_parameters()[0], before));
}

TEST(Finetune, SameSeedConfigAndDataGiveIdenticalWeights) {
  const auto data = small_cls_data();
  auto run = [&] {
    torch::manual_seed(4);
    Classifier model(classifier_config(BackboneSpec::desk(), Pooling::cls_token, 3, 32));
    auto c = short_run(false);
    c.scale_aug = true;
    const auto log = finetune(model, std::span<const ClassificationSample>(data), c);
    return std::make_pair(model->parameters(), log);
  };
  const auto [a, la] = run();
  const auto [b, lb] = run();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a[i], b[i]));
  EXPECT_EQ(la.first_batch_indices, lb.first_batch_indices);
  ASSERT_EQ(la.epochs.size(), 2u);
  EXPECT_EQ(la.epochs[1].mean_loss, lb.epochs[1].mean_loss);
}

TEST(Finetune, FirstBatchLossMatchesAnIndependentMeasurement) {
  const auto data = small_cls_data();
  torch::manual_seed(5);
  Classifier model(classifier_config(BackboneSpec::desk(), Pooling::global_average, 3, 32));
  torch::manual_seed(5);
  Classifier copy(classifier_config(BackboneSpec::desk(), Pooling::global_average, 3, 32));
  const auto log = finetune(model, std::span<const ClassificationSample>(data), short_run(false));
  std::vector<ClassificationSample> first;
  for (auto i : log.first_batch_indices) first.push_back(data[i]);
  EXPECT_NEAR(batch_loss(copy, first), log.first_batch_loss, 1e-5);
}

TEST(Finetune, RejectsTaskMismatchAndEmptyData) {
  Classifier model(classifier_config(BackboneSpec::desk(), Pooling::global_average, 3, 32));
  const auto data = small_cls_data();
  auto wrong = short_run(false);
  wrong.task = Task::change_detection;
  EXPECT_THROW(finetune(model, std::span<const ClassificationSample>(data), wrong), ConfigError);
  EXPECT_THROW(finetune(model, std::span<const ClassificationSample>(), short_run(false)), ConfigError);
}

TEST(Finetune, NonFiniteLossAborts) {
  Classifier model(classifier_config(BackboneSpec::desk(), Pooling::global_average, 3, 32));
  auto data = small_cls_data();
  for (auto& s : data) {
    for (auto& v : s.image.pixels) v = std::nanf("");
  }
  EXPECT_THROW(finetune(model, std::span<const ClassificationSample>(data), short_run(false)),
               NonFiniteLoss);
}

TEST(Finetune, ChangeDetectorTrainsAndLogsEveryEpoch) {
  torch::manual_seed(0);
  ChangeDetector model(change_detector_config(BackboneSpec::desk(), Fusion::subtract, {1, 2, 3, 4}, 32));
  const auto data = make_synthetic_cd_fixture(8, 32, 3);
  auto c = change_detection_defaults();
  c.epochs = 2;
  c.batch_size = 4;
  int calls = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) { EXPECT_EQ(e.epoch, calls++); };
  const auto log = finetune(model, std::span<const BitemporalSample>(data), c, hooks);
  EXPECT_EQ(calls, 2);
  EXPECT_TRUE(std::isfinite(log.epochs.back().mean_loss));
}
