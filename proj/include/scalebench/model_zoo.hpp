#pragma once

#include <torch/torch.h>

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalebench/evaluation.hpp"
#include "scalebench/image.hpp"
#include "scalebench/model_config.hpp"

namespace scalebench {

// ---------------------------------------------------------------- tensors

/// (3,H,W) float tensor from an HWC image.
torch::Tensor to_tensor(const Image& image);
/// Inverse of to_tensor for a (C,H,W) tensor.
Image to_image(const torch::Tensor& chw);
/// (B,3,H,W) batch; all images must share a shape.
torch::Tensor stack_images(std::span<const Image* const> images);
/// (B,H,W) int64 targets.
torch::Tensor stack_masks(std::span<const BinaryMask* const> masks);
/// Per-pixel argmax of (B,2,H,W) logits.
std::vector<BinaryMask> masks_from_logits(const torch::Tensor& logits);

// --------------------------------------------------------------- backbone

struct BackboneOutput {
  torch::Tensor cls;                   // (B,D); undefined without a cls token
  torch::Tensor patches;               // (B,N,D) patch tokens after the last block
  std::map<int, torch::Tensor> taps;   // block index -> (B,D,g,g)
};

class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int width, int heads, int mlp_hidden);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int heads_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(TransformerBlock);

/// Plain pre-norm ViT. Position embeddings are learned for the reference grid
/// and bicubically resized for other input sides.
class VisionTransformerImpl : public torch::nn::Module {
 public:
  VisionTransformerImpl(const BackboneSpec& spec, int reference_side);

  /// Runs every block and captures the token grid after each requested block
  /// (1-based). Capturing does not alter the final output.
  BackboneOutput forward_with_taps(const torch::Tensor& images, std::span<const int> taps);
  /// All tokens after the last block, (B,T,D), cls first when present.
  torch::Tensor forward(const torch::Tensor& images);

  const BackboneSpec& spec() const noexcept { return spec_; }
  int reference_side() const noexcept { return reference_side_; }

 private:
  torch::Tensor embed(const torch::Tensor& images, int& grid);
  torch::Tensor position_embedding(int grid);

  BackboneSpec spec_;
  int reference_side_;
  torch::nn::Conv2d patch_embed_{nullptr};
  torch::Tensor cls_token_;
  torch::Tensor pos_embed_;
  torch::nn::ModuleList blocks_;
};
TORCH_MODULE(VisionTransformer);

// ------------------------------------------------------------ neck/decoder

/// Turns four uniform token grids into strides {p/2, p, 2p, 4p}: 1x1
/// projection, then 2x transposed conv / identity / 2x max-pool / 4x max-pool.
class PyramidNeckImpl : public torch::nn::Module {
 public:
  PyramidNeckImpl(int in_channels, int channels);
  std::vector<torch::Tensor> forward(const std::vector<torch::Tensor>& grids);

 private:
  torch::nn::ModuleList projections_;
  torch::nn::ConvTranspose2d upsample_{nullptr};
};
TORCH_MODULE(PyramidNeck);

/// Feature-pyramid fusion head: laterals, top-down sum, per-level 3x3 convs,
/// concatenation at the finest level, and a per-pixel classifier resized to
/// the requested output side.
class PyramidDecoderImpl : public torch::nn::Module {
 public:
  PyramidDecoderImpl(int in_channels, int channels, int num_classes);
  torch::Tensor forward(const std::vector<torch::Tensor>& levels, int out_h, int out_w);

 private:
  torch::nn::ModuleList laterals_;
  torch::nn::ModuleList level_convs_;
  torch::nn::Sequential fuse_{nullptr};
  torch::nn::Conv2d classifier_{nullptr};
};
TORCH_MODULE(PyramidDecoder);

class MaskDecoderImpl : public torch::nn::Module {
 public:
  MaskDecoderImpl(int in_channels, int neck_channels, int decoder_channels, int num_classes);
  torch::Tensor forward(const std::vector<torch::Tensor>& grids, int out_side);

 private:
  PyramidNeck neck_{nullptr};
  PyramidDecoder decoder_{nullptr};
};
TORCH_MODULE(MaskDecoder);

/// Elementwise difference or channel concatenation of the taps of two passes.
std::vector<torch::Tensor> fuse_taps(const BackboneOutput& first, const BackboneOutput& second,
                                     std::span<const int> layers, Fusion fusion);

// ------------------------------------------------------------ assemblies

class ClassifierImpl : public torch::nn::Module {
 public:
  explicit ClassifierImpl(const AssemblyConfig& config);
  torch::Tensor forward(const torch::Tensor& images);

  const AssemblyConfig& config() const noexcept { return config_; }
  VisionTransformer& backbone() noexcept { return backbone_; }
  std::vector<torch::Tensor> backbone_parameters() const;
  std::vector<torch::Tensor> head_parameters() const;

 private:
  AssemblyConfig config_;
  VisionTransformer backbone_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Classifier);

/// Siamese change detector: one backbone applied to both images, fused taps,
/// neck and pyramid decoder producing 2-class logits at input resolution.
class ChangeDetectorImpl : public torch::nn::Module {
 public:
  explicit ChangeDetectorImpl(const AssemblyConfig& config);
  torch::Tensor forward(const torch::Tensor& first, const torch::Tensor& second);
  std::vector<torch::Tensor> fused_taps(const torch::Tensor& first, const torch::Tensor& second);

  const AssemblyConfig& config() const noexcept { return config_; }
  VisionTransformer& backbone() noexcept { return backbone_; }
  std::vector<torch::Tensor> backbone_parameters() const;
  std::vector<torch::Tensor> head_parameters() const;

 private:
  AssemblyConfig config_;
  VisionTransformer backbone_{nullptr};
  MaskDecoder decoder_{nullptr};
};
TORCH_MODULE(ChangeDetector);

Classifier build_classifier(const BackboneSpec& backbone, Pooling pooling, int num_classes,
                            int image_side);
ChangeDetector build_change_detector(const BackboneSpec& backbone, Fusion fusion,
                                     std::vector<int> tap_layers, int image_side);

/// Inference-mode predictors for the evaluation protocol.
ClassifierFn make_predictor(Classifier model);
ChangeDetectorFn make_predictor(ChangeDetector model);

// ------------------------------------------------------------ checkpoints

/// Writes `module`'s parameters and buffers together with `config`.
void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     torch::nn::Module& module);
/// Reads the stored config without touching any module.
nlohmann::json read_checkpoint_config(const std::string& path);
/// Loads weights into `module`; throws ConfigError when the stored config
/// differs from `expected_config` or any tensor is missing or misshapen.
void load_checkpoint(const std::string& path, const nlohmann::json& expected_config,
                     torch::nn::Module& module);

/// Copies every parameter and buffer of `from` into `to` (same structure).
void copy_weights(torch::nn::Module& from, torch::nn::Module& to);

}  // namespace scalebench
