#pragma once

// Teacher-student self-distillation skeleton with the overlap-mask decoder
// branch: the decoder sees the student's taps of the first global crop and
// the teacher's taps of the second, and predicts which pixels of the first
// crop the second one covers.

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scalebench/crop_geometry.hpp"
#include "scalebench/lr_schedule.hpp"
#include "scalebench/model_zoo.hpp"
#include "scalebench/resample.hpp"

namespace scalebench {

// ------------------------------------------------------------------ crops

struct Crop {
  Image pixels;
  CropBox box;
};

inline constexpr int kGlobalCrops = 2;
inline constexpr int kLocalCrops = 8;

struct CropBatch {
  std::array<Crop, kGlobalCrops> global;
  std::array<Crop, kLocalCrops> local;
};

struct CropParams {
  int global_side = 224;
  int local_side = 96;
  // Area fractions for random-resized crops (used only with scale_aug).
  double global_scale_min = 0.14, global_scale_max = 1.0;
  double local_scale_min = 0.05, local_scale_max = 0.4;
  double flip_probability = 0.5;
  Interpolation interpolation = Interpolation::bilinear;

  void validate() const;
};

/// Two global and eight local crops. Without scale augmentation every crop
/// copies a fixed-side source square (no resampling); with it, crops cover a
/// random area fraction and aspect ratio and are resized to the fixed sides.
CropBatch make_crops(const Image& image, const CropParams& params, bool scale_aug,
                     std::mt19937_64& rng);

// -------------------------------------------------------------------- EMA

/// teacher <- m * teacher + (1 - m) * student for every parameter.
void ema_update(torch::nn::Module& teacher, const torch::nn::Module& student, double momentum);

// ---------------------------------------------------------- distillation

struct DistillationInputs {
  std::span<const BackboneOutput> student_global;
  std::span<const BackboneOutput> student_local;
  std::span<const BackboneOutput> teacher_global;
};

/// Pluggable token/CLS-level distillation objective.
class DistillationLoss {
 public:
  virtual ~DistillationLoss() = default;
  virtual std::string name() const = 0;
  virtual bool needs_student_views() const = 0;
  virtual torch::Tensor operator()(const DistillationInputs& in) = 0;
};

/// Contributes nothing; leaves the overlap branch as the only objective.
class NoDistillation final : public DistillationLoss {
 public:
  std::string name() const override { return "none"; }
  bool needs_student_views() const override { return false; }
  torch::Tensor operator()(const DistillationInputs&) override { return torch::zeros({}); }
};

/// 1 - cosine similarity between each student view's CLS vector and the
/// teacher's CLS vector of every other global view.
class ClsCosineDistillation final : public DistillationLoss {
 public:
  std::string name() const override { return "cls_cosine"; }
  bool needs_student_views() const override { return true; }
  torch::Tensor operator()(const DistillationInputs& in) override;
};

std::shared_ptr<DistillationLoss> make_distillation(const std::string& name);

// ---------------------------------------------------------- overlap branch

/// (B,S,S) int64 targets: rasterize_overlap_mask(first[i], second[i]).
torch::Tensor overlap_targets(std::span<const CropBox> first, std::span<const CropBox> second);

/// Mean pixel-wise cross-entropy of the decoder's 2-class map in the first
/// crop's frame against the rasterized overlap of the two crops.
torch::Tensor overlap_branch_loss(const std::map<int, torch::Tensor>& first_taps,
                                  const std::map<int, torch::Tensor>& second_taps,
                                  std::span<const CropBox> first_boxes,
                                  std::span<const CropBox> second_boxes,
                                  std::span<const int> layers, MaskDecoder& decoder);

// --------------------------------------------------------------- training

struct PretrainConfig {
  BackboneSpec backbone;
  CropParams crops;
  bool scale_aug = false;
  std::vector<int> tap_layers{3, 5, 8, 12};
  int neck_channels = 64;
  int decoder_channels = 64;
  double overlap_weight = 1.0;
  std::string distillation = "none";
  bool student_only_overlap = false;
  long long total_steps = 200;
  long long steps_per_epoch = 10;
  int warmup_epochs = 5;
  int batch_size = 8;
  double backbone_peak_lr = 5e-4;
  double backbone_min_lr = 2e-6;
  double decoder_peak_lr = 2.5e-4;
  double decoder_min_lr = 2e-6;
  double weight_decay = 0.04;
  EmaSchedule ema;
  std::uint64_t seed = 0;

  void validate() const;
  LrSchedule backbone_schedule() const;
  LrSchedule decoder_schedule() const;
};

/// All mutable pretraining state, owned by the single training thread.
class PretrainState {
 public:
  explicit PretrainState(const PretrainConfig& config);

  const PretrainConfig& config() const noexcept { return config_; }
  VisionTransformer student{nullptr};
  VisionTransformer teacher{nullptr};
  MaskDecoder decoder{nullptr};
  std::unique_ptr<torch::optim::AdamW> optimizer;
  std::shared_ptr<DistillationLoss> distillation;
  long long step = 0;

 private:
  PretrainConfig config_;
};

struct StepLosses {
  long long step = 0;
  double distillation = 0.0;
  double overlap = 0.0;
  double total = 0.0;
  double lr_backbone = 0.0;
  double lr_decoder = 0.0;
  double momentum = 0.0;
};

/// One optimizer step on the student and decoder followed by one EMA update
/// of the teacher. Throws NonFiniteLoss naming `batch_id` on NaN/Inf.
StepLosses pretrain_step(std::span<const CropBatch> batch, PretrainState& state,
                         long long batch_id);

/// Append-only CSV training log (step, loss components, learning rates).
class TrainingLog {
 public:
  explicit TrainingLog(std::filesystem::path path);
  void append(const StepLosses& row);

 private:
  std::filesystem::path path_;
};

struct PretrainResult {
  std::vector<StepLosses> steps;
};

/// Runs config.total_steps steps, drawing batch_size tiles per step.
PretrainResult run_pretraining(PretrainState& state, std::span<const Image> tiles,
                               TrainingLog* log = nullptr);

}  // namespace scalebench
