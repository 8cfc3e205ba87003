#pragma once

// End-to-end runs shared by the CLI and the acceptance suite.

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "scalebench/config_io.hpp"
#include "scalebench/dataset_io.hpp"
#include "scalebench/evaluation.hpp"
#include "scalebench/finetune.hpp"
#include "scalebench/ssl_pretrain.hpp"

namespace scalebench {

std::vector<BitemporalSample> load_change_data(const DataConfig& data, bool train);
std::vector<ClassificationSample> load_classification_data(const DataConfig& data, bool train);

/// Pretraining tiles. Synthetic data renders scenes of twice the tile side
/// and tiles both images of every pair.
std::vector<Image> load_pretraining_tiles(const DataConfig& data);

/// Checkpoint header of a bare backbone.
nlohmann::json backbone_checkpoint_config(const BackboneSpec& spec, int reference_side);

struct FinetuneOptions {
  /// Pretrained backbone weights to start from.
  std::optional<std::filesystem::path> init_backbone;
  /// Where to write the trained model.
  std::optional<std::filesystem::path> save_to;
  std::function<void(const EpochLog&)> on_epoch;
};

struct FinetuneOutcome {
  FlopsReport flops;
  TrainLog log;
  RobustnessReport robustness;
  DatasetFingerprint train_data;
  DatasetFingerprint eval_data;
};

/// Seeds torch, builds the assembly, applies the compute gate (throwing
/// GateFailure before any training), trains and evaluates.
FinetuneOutcome run_finetune(const ExperimentConfig& config, const FinetuneOptions& options = {});

struct EvaluateOutcome {
  FlopsReport flops;
  RobustnessReport robustness;
  DatasetFingerprint eval_data;
};

/// Protocol run for a stored model, or for the ground-truth oracle when
/// `checkpoint` is empty.
EvaluateOutcome run_evaluation(const ExperimentConfig& config,
                               const std::optional<std::filesystem::path>& checkpoint);

struct PretrainOutcome {
  PretrainResult result;
  DatasetFingerprint tiles;
};

PretrainOutcome run_pretrain(const ExperimentConfig& config,
                             const std::optional<std::filesystem::path>& save_backbone,
                             TrainingLog* log = nullptr);

}  // namespace scalebench
