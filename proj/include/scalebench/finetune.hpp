#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "scalebench/augmentation.hpp"
#include "scalebench/lr_schedule.hpp"
#include "scalebench/model_zoo.hpp"

namespace scalebench {

struct OptimizerConfig {
  double peak_lr = 1e-4;
  double min_lr = 1e-5;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct TrainConfig {
  Task task = Task::classification;
  int epochs = 100;
  int batch_size = 64;
  bool freeze_backbone = false;
  bool scale_aug = false;
  AugmentationMode aug_mode = AugmentationMode::include_identity;
  OptimizerConfig optimizer;
  ScheduleKind schedule = ScheduleKind::warmup_cosine;
  int warmup_steps = 10;
  std::vector<int> milestones{60, 80};  // epochs, multistep only
  double gamma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  LrSchedule lr_schedule(long long steps_per_epoch) const;
};

/// Full fine-tuning for classification: 100 epochs, AdamW 1e-4 -> 1e-5.
TrainConfig classification_finetune_defaults();
/// Linear probing: frozen backbone, 100 epochs, AdamW 1e-3 with multistep decay.
TrainConfig linear_probe_defaults();
/// Change detection: 200 epochs, AdamW 6e-5 warmup-cosine, 10 warmup steps, batch 32.
TrainConfig change_detection_defaults();

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double last_lr = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  double first_batch_loss = 0.0;
  std::vector<std::size_t> first_batch_indices;
};

struct TrainHooks {
  /// Written before the first optimizer step when set.
  std::optional<std::filesystem::path> initial_checkpoint;
  /// Called after each epoch.
  std::function<void(const EpochLog&)> on_epoch;
  /// Called once with the optimizer after the last step.
  std::function<void(const torch::optim::Optimizer&)> on_finish;
};

/// Trains in place; the last state is the one to evaluate. With
/// freeze_backbone the backbone is excluded from the optimizer entirely.
TrainLog finetune(Classifier& model, std::span<const ClassificationSample> data,
                  const TrainConfig& config, const TrainHooks& hooks = {});
TrainLog finetune(ChangeDetector& model, std::span<const BitemporalSample> data,
                  const TrainConfig& config, const TrainHooks& hooks = {});

/// Loss of one batch under the current weights, in training mode but without
/// updating anything (batch-norm statistics included).
double batch_loss(Classifier& model, std::span<const ClassificationSample> batch);
double batch_loss(ChangeDetector& model, std::span<const BitemporalSample> batch);

}  // namespace scalebench
