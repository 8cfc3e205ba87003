#include "scalebench/model_zoo.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "scalebench/errors.hpp"

namespace F = torch::nn::functional;

namespace scalebench {

// ---------------------------------------------------------------- tensors

torch::Tensor to_tensor(const Image& image) {
  auto hwc = torch::from_blob(const_cast<float*>(image.pixels.data()),
                              {image.height, image.width, image.channels}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous();
}

Image to_image(const torch::Tensor& chw) {
  TORCH_CHECK(chw.dim() == 3, "to_image expects a (C,H,W) tensor");
  auto hwc = chw.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)),
            static_cast<int>(hwc.size(2)));
  std::memcpy(out.pixels.data(), hwc.data_ptr<float>(), out.pixels.size() * sizeof(float));
  return out;
}

torch::Tensor stack_images(std::span<const Image* const> images) {
  TORCH_CHECK(!images.empty(), "stack_images: empty batch");
  const Image& ref = *images.front();
  auto batch = torch::empty({static_cast<long>(images.size()), ref.height, ref.width,
                             ref.channels},
                            torch::kFloat32);
  float* dst = batch.data_ptr<float>();
  for (const Image* im : images) {
    if (!im->same_shape(ref)) throw std::invalid_argument("stack_images: shape mismatch");
    std::memcpy(dst, im->pixels.data(), im->pixels.size() * sizeof(float));
    dst += im->pixels.size();
  }
  return batch.permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor stack_masks(std::span<const BinaryMask* const> masks) {
  TORCH_CHECK(!masks.empty(), "stack_masks: empty batch");
  const auto h = masks.front()->height, w = masks.front()->width;
  auto out = torch::empty({static_cast<long>(masks.size()), h, w}, torch::kInt64);
  auto* dst = out.data_ptr<int64_t>();
  for (const BinaryMask* m : masks) {
    if (m->height != h || m->width != w) {
      throw std::invalid_argument("stack_masks: shape mismatch");
    }
    for (auto b : m->bits) *dst++ = b;
  }
  return out;
}

std::vector<BinaryMask> masks_from_logits(const torch::Tensor& logits) {
  TORCH_CHECK(logits.dim() == 4, "masks_from_logits expects (B,C,H,W)");
  auto labels = logits.argmax(1).to(torch::kUInt8).contiguous();
  const int h = static_cast<int>(labels.size(1)), w = static_cast<int>(labels.size(2));
  std::vector<BinaryMask> out;
  const auto* src = labels.data_ptr<uint8_t>();
  for (long b = 0; b < labels.size(0); ++b) {
    BinaryMask m(h, w);
    std::memcpy(m.bits.data(), src + b * h * w, static_cast<std::size_t>(h) * w);
    out.push_back(std::move(m));
  }
  return out;
}

// --------------------------------------------------------------- backbone

TransformerBlockImpl::TransformerBlockImpl(int width, int heads, int mlp_hidden)
    : heads_(heads) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width}).eps(1e-6)));
  qkv_ = register_module("qkv", torch::nn::Linear(width, 3 * width));
  proj_ = register_module("proj", torch::nn::Linear(width, width));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width}).eps(1e-6)));
  fc1_ = register_module("fc1", torch::nn::Linear(width, mlp_hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(mlp_hidden, width));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), t = x.size(1), d = x.size(2);
  const auto head_dim = d / heads_;
  auto qkv = qkv_(norm1_(x)).reshape({b, t, 3, heads_, head_dim}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0], k = qkv[1], v = qkv[2];
  auto attn = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim));
  auto mixed = torch::matmul(attn.softmax(-1), v).transpose(1, 2).reshape({b, t, d});
  auto y = x + proj_(mixed);
  return y + fc2_(F::gelu(fc1_(norm2_(y))));
}

VisionTransformerImpl::VisionTransformerImpl(const BackboneSpec& spec, int reference_side)
    : spec_(spec), reference_side_(reference_side) {
  spec_.validate();
  const int grid = spec_.grid_side(reference_side);
  patch_embed_ = register_module(
      "patch_embed",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(spec_.in_channels, spec_.width, spec_.patch_size)
                            .stride(spec_.patch_size)));
  if (spec_.uses_cls_token) {
    cls_token_ = register_parameter("cls_token", torch::zeros({1, 1, spec_.width}));
  }
  pos_embed_ = register_parameter("pos_embed", torch::zeros({1, grid * grid, spec_.width}));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < spec_.depth; ++i) {
    blocks_->push_back(TransformerBlock(spec_.width, spec_.heads, spec_.mlp_hidden()));
  }

  torch::NoGradGuard no_grad;
  torch::nn::init::normal_(pos_embed_, 0.0, 0.02);
  if (cls_token_.defined()) torch::nn::init::normal_(cls_token_, 0.0, 0.02);
  for (auto& m : modules(/*include_self=*/false)) {
    if (auto* lin = m->as<torch::nn::Linear>()) {
      torch::nn::init::normal_(lin->weight, 0.0, 0.02);
      torch::nn::init::zeros_(lin->bias);
    }
  }
}

torch::Tensor VisionTransformerImpl::position_embedding(int grid) {
  const int ref = reference_side_ / spec_.patch_size;
  if (grid == ref) return pos_embed_;
  auto as_map = pos_embed_.reshape({1, ref, ref, spec_.width}).permute({0, 3, 1, 2});
  auto resized = F::interpolate(as_map, F::InterpolateFuncOptions()
                                            .size(std::vector<int64_t>{grid, grid})
                                            .mode(torch::kBicubic)
                                            .align_corners(false));
  return resized.permute({0, 2, 3, 1}).reshape({1, grid * grid, spec_.width});
}

torch::Tensor VisionTransformerImpl::embed(const torch::Tensor& images, int& grid) {
  TORCH_CHECK(images.dim() == 4 && images.size(1) == spec_.in_channels,
              "VisionTransformer expects (B,", spec_.in_channels, ",H,W) input");
  TORCH_CHECK(images.size(2) == images.size(3), "VisionTransformer expects square input");
  grid = spec_.grid_side(static_cast<int>(images.size(2)));
  auto tokens = patch_embed_(images).flatten(2).transpose(1, 2);
  tokens = tokens + position_embedding(grid);
  if (cls_token_.defined()) {
    tokens = torch::cat({cls_token_.expand({images.size(0), 1, spec_.width}), tokens}, 1);
  }
  return tokens;
}

BackboneOutput VisionTransformerImpl::forward_with_taps(const torch::Tensor& images,
                                                        std::span<const int> taps) {
  for (int t : taps) {
    if (t < 1 || t > spec_.depth) {
      throw std::invalid_argument("tap layer " + std::to_string(t) + " outside 1.." +
                                  std::to_string(spec_.depth));
    }
  }
  int grid = 0;
  auto x = embed(images, grid);
  const long offset = spec_.uses_cls_token ? 1 : 0;
  BackboneOutput out;
  for (int i = 0; i < spec_.depth; ++i) {
    x = blocks_[i]->as<TransformerBlock>()->forward(x);
    const int layer = i + 1;
    if (std::find(taps.begin(), taps.end(), layer) != taps.end()) {
      out.taps[layer] = x.slice(1, offset)
                            .transpose(1, 2)
                            .reshape({x.size(0), spec_.width, grid, grid});
    }
  }
  if (offset) out.cls = x.select(1, 0);
  out.patches = x.slice(1, offset);
  return out;
}

torch::Tensor VisionTransformerImpl::forward(const torch::Tensor& images) {
  int grid = 0;
  auto x = embed(images, grid);
  for (const auto& block : *blocks_) x = block->as<TransformerBlock>()->forward(x);
  return x;
}

// ------------------------------------------------------------ neck/decoder

namespace {

torch::nn::Sequential conv_bn_relu(int in, int out, int kernel) {
  return torch::nn::Sequential(
      torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2).bias(false)),
      torch::nn::BatchNorm2d(out), torch::nn::ReLU());
}

torch::Tensor resize_to(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

PyramidNeckImpl::PyramidNeckImpl(int in_channels, int channels) {
  projections_ = register_module("projections", torch::nn::ModuleList());
  for (int i = 0; i < kPyramidLevels; ++i) {
    projections_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, channels, 1)));
  }
  upsample_ = register_module(
      "upsample",
      torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(channels, channels, 2).stride(2)));
}

std::vector<torch::Tensor> PyramidNeckImpl::forward(const std::vector<torch::Tensor>& grids) {
  TORCH_CHECK(static_cast<int>(grids.size()) == kPyramidLevels, "neck expects ",
              kPyramidLevels, " grids");
  std::vector<torch::Tensor> levels;
  for (int i = 0; i < kPyramidLevels; ++i) {
    levels.push_back(projections_[i]->as<torch::nn::Conv2d>()->forward(grids[i]));
  }
  levels[0] = upsample_(levels[0]);
  levels[2] = F::max_pool2d(levels[2], F::MaxPool2dFuncOptions(2));
  levels[3] = F::max_pool2d(levels[3], F::MaxPool2dFuncOptions(4));
  return levels;
}

PyramidDecoderImpl::PyramidDecoderImpl(int in_channels, int channels, int num_classes) {
  laterals_ = register_module("laterals", torch::nn::ModuleList());
  level_convs_ = register_module("level_convs", torch::nn::ModuleList());
  for (int i = 0; i < kPyramidLevels; ++i) {
    laterals_->push_back(conv_bn_relu(in_channels, channels, 1));
    level_convs_->push_back(conv_bn_relu(channels, channels, 3));
  }
  fuse_ = register_module("fuse", conv_bn_relu(kPyramidLevels * channels, channels, 3));
  classifier_ = register_module("classifier",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, num_classes, 1)));
}

torch::Tensor PyramidDecoderImpl::forward(const std::vector<torch::Tensor>& levels, int out_h,
                                          int out_w) {
  TORCH_CHECK(static_cast<int>(levels.size()) == kPyramidLevels, "decoder expects ",
              kPyramidLevels, " levels");
  std::vector<torch::Tensor> lat;
  for (int i = 0; i < kPyramidLevels; ++i) {
    lat.push_back(laterals_[i]->as<torch::nn::Sequential>()->forward(levels[i]));
  }
  for (int i = kPyramidLevels - 1; i > 0; --i) {
    lat[i - 1] = lat[i - 1] + resize_to(lat[i], lat[i - 1].size(2), lat[i - 1].size(3));
  }
  const auto h0 = lat[0].size(2), w0 = lat[0].size(3);
  std::vector<torch::Tensor> outs;
  for (int i = 0; i < kPyramidLevels; ++i) {
    outs.push_back(resize_to(level_convs_[i]->as<torch::nn::Sequential>()->forward(lat[i]), h0, w0));
  }
  auto logits = classifier_(fuse_->forward(torch::cat(outs, 1)));
  return resize_to(logits, out_h, out_w);
}

MaskDecoderImpl::MaskDecoderImpl(int in_channels, int neck_channels, int decoder_channels,
                                 int num_classes) {
  neck_ = register_module("neck", PyramidNeck(in_channels, neck_channels));
  decoder_ = register_module("decoder", PyramidDecoder(neck_channels, decoder_channels, num_classes));
}

torch::Tensor MaskDecoderImpl::forward(const std::vector<torch::Tensor>& grids, int out_side) {
  return decoder_->forward(neck_->forward(grids), out_side, out_side);
}

std::vector<torch::Tensor> fuse_taps(const BackboneOutput& first, const BackboneOutput& second,
                                     std::span<const int> layers, Fusion fusion) {
  std::vector<torch::Tensor> fused;
  for (int layer : layers) {
    const auto& a = first.taps.at(layer);
    const auto& b = second.taps.at(layer);
    if (a.sizes() != b.sizes()) {
      throw std::invalid_argument("fuse_taps: grid size mismatch at layer " +
                                  std::to_string(layer));
    }
    switch (fusion) {
      case Fusion::subtract: fused.push_back(a - b); break;
      case Fusion::concat: fused.push_back(torch::cat({a, b}, 1)); break;
      case Fusion::none: throw std::invalid_argument("fuse_taps: fusion 'none'");
    }
  }
  return fused;
}

// ------------------------------------------------------------ assemblies

namespace {

std::vector<torch::Tensor> parameters_except(const torch::nn::Module& whole,
                                             const torch::nn::Module& excluded) {
  std::vector<torch::Tensor> out;
  const auto skip = excluded.parameters();
  for (const auto& p : whole.parameters()) {
    bool in_excluded = false;
    for (const auto& q : skip) {
      if (p.is_same(q)) {
        in_excluded = true;
        break;
      }
    }
    if (!in_excluded) out.push_back(p);
  }
  return out;
}

}  // namespace

ClassifierImpl::ClassifierImpl(const AssemblyConfig& config) : config_(config) {
  config_.validate();
  if (config_.head != HeadKind::linear_classifier) {
    throw std::invalid_argument("Classifier requires a linear_classifier head");
  }
  backbone_ = register_module("backbone", VisionTransformer(config_.backbone, config_.image_side));
  norm_ = register_module(
      "norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config_.backbone.width}).eps(1e-6)));
  head_ = register_module("head", torch::nn::Linear(config_.backbone.width, config_.num_classes));
  torch::NoGradGuard no_grad;
  torch::nn::init::normal_(head_->weight, 0.0, 0.02);
  torch::nn::init::zeros_(head_->bias);
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& images) {
  auto tokens = backbone_->forward(images);
  torch::Tensor pooled;
  if (config_.pooling == Pooling::cls_token) {
    pooled = tokens.select(1, 0);
  } else {
    pooled = tokens.slice(1, config_.backbone.uses_cls_token ? 1 : 0).mean(1);
  }
  return head_(norm_(pooled));
}

std::vector<torch::Tensor> ClassifierImpl::backbone_parameters() const {
  return backbone_->parameters();
}

std::vector<torch::Tensor> ClassifierImpl::head_parameters() const {
  return parameters_except(*this, *backbone_);
}

ChangeDetectorImpl::ChangeDetectorImpl(const AssemblyConfig& config) : config_(config) {
  config_.validate();
  if (config_.head != HeadKind::pyramid_mask_decoder) {
    throw std::invalid_argument("ChangeDetector requires a pyramid_mask_decoder head");
  }
  backbone_ = register_module("backbone", VisionTransformer(config_.backbone, config_.image_side));
  decoder_ = register_module("decoder",
                             MaskDecoder(config_.decoder_in_channels(), config_.neck_channels,
                                         config_.decoder_channels, config_.num_classes));
}

std::vector<torch::Tensor> ChangeDetectorImpl::fused_taps(const torch::Tensor& first,
                                                          const torch::Tensor& second) {
  const auto a = backbone_->forward_with_taps(first, config_.tap_layers);
  const auto b = backbone_->forward_with_taps(second, config_.tap_layers);
  return fuse_taps(a, b, config_.tap_layers, config_.fusion);
}

torch::Tensor ChangeDetectorImpl::forward(const torch::Tensor& first, const torch::Tensor& second) {
  TORCH_CHECK(first.sizes() == second.sizes(), "change detector inputs differ in shape");
  return decoder_->forward(fused_taps(first, second), static_cast<int>(first.size(2)));
}

std::vector<torch::Tensor> ChangeDetectorImpl::backbone_parameters() const {
  return backbone_->parameters();
}

std::vector<torch::Tensor> ChangeDetectorImpl::head_parameters() const {
  return parameters_except(*this, *backbone_);
}

Classifier build_classifier(const BackboneSpec& backbone, Pooling pooling, int num_classes,
                            int image_side) {
  return Classifier(classifier_config(backbone, pooling, num_classes, image_side));
}

ChangeDetector build_change_detector(const BackboneSpec& backbone, Fusion fusion,
                                     std::vector<int> tap_layers, int image_side) {
  return ChangeDetector(change_detector_config(backbone, fusion, std::move(tap_layers), image_side));
}

ClassifierFn make_predictor(Classifier model) {
  return [model](std::span<const ClassificationSample> batch) mutable {
    torch::NoGradGuard no_grad;
    model->eval();
    std::vector<const Image*> images;
    for (const auto& s : batch) images.push_back(&s.image);
    auto pred = model->forward(stack_images(images)).argmax(1).contiguous();
    std::vector<int> out(batch.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<int>(pred[static_cast<long>(i)].item<int64_t>());
    }
    return out;
  };
}

ChangeDetectorFn make_predictor(ChangeDetector model) {
  return [model](std::span<const BitemporalSample> batch) mutable {
    torch::NoGradGuard no_grad;
    model->eval();
    std::vector<const Image*> first, second;
    for (const auto& s : batch) {
      first.push_back(&s.first);
      second.push_back(&s.second);
    }
    return masks_from_logits(model->forward(stack_images(first), stack_images(second)));
  };
}

// ------------------------------------------------------------ checkpoints

namespace {

constexpr const char* kFormatTag = "scalebench-checkpoint-v1";

torch::Tensor string_tensor(const std::string& s) {
  auto t = torch::empty({static_cast<long>(s.size())}, torch::kUInt8);
  if (!s.empty()) std::memcpy(t.data_ptr<uint8_t>(), s.data(), s.size());
  return t;
}

std::string tensor_string(const torch::Tensor& t) {
  auto c = t.contiguous();
  return std::string(reinterpret_cast<const char*>(c.data_ptr<uint8_t>()),
                     static_cast<std::size_t>(c.numel()));
}

std::string read_meta(torch::serialize::InputArchive& archive, const std::string& path,
                      const char* key) {
  torch::Tensor t;
  if (!archive.try_read(key, t)) {
    throw ConfigError("checkpoint " + path + " lacks '" + key + "'");
  }
  return tensor_string(t);
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::json& config,
                     torch::nn::Module& module) {
  torch::serialize::OutputArchive root;
  root.write("meta/format", string_tensor(kFormatTag));
  root.write("meta/config", string_tensor(config.dump()));
  torch::serialize::OutputArchive weights;
  module.save(weights);
  root.write("weights", weights);
  root.save_to(path);
}

nlohmann::json read_checkpoint_config(const std::string& path) {
  torch::serialize::InputArchive root;
  try {
    root.load_from(path);
  } catch (const c10::Error& e) {
    throw ConfigError("cannot read checkpoint " + path + ": " + e.what_without_backtrace());
  }
  if (read_meta(root, path, "meta/format") != kFormatTag) {
    throw ConfigError("checkpoint " + path + " has an unknown format tag");
  }
  return nlohmann::json::parse(read_meta(root, path, "meta/config"));
}

void load_checkpoint(const std::string& path, const nlohmann::json& expected_config,
                     torch::nn::Module& module) {
  const auto stored = read_checkpoint_config(path);
  if (stored != expected_config) {
    throw ConfigError("checkpoint " + path + " config mismatch:\n  stored:   " + stored.dump() +
                      "\n  expected: " + expected_config.dump());
  }
  torch::serialize::InputArchive root;
  root.load_from(path);
  torch::serialize::InputArchive weights;
  if (!root.try_read("weights", weights)) {
    throw ConfigError("checkpoint " + path + " has no weights");
  }
  std::vector<std::pair<std::string, std::vector<int64_t>>> shapes;
  for (const auto& p : module.named_parameters()) shapes.emplace_back(p.key(), p.value().sizes().vec());
  for (const auto& b : module.named_buffers()) shapes.emplace_back(b.key(), b.value().sizes().vec());
  try {
    module.load(weights);
  } catch (const c10::Error& e) {
    throw ConfigError("checkpoint " + path + ": " + e.what_without_backtrace());
  }
  auto params = module.named_parameters();
  auto buffers = module.named_buffers();
  for (const auto& [name, shape] : shapes) {
    const auto* p = params.find(name);
    const auto* b = p ? nullptr : buffers.find(name);
    const auto sizes = p ? p->sizes().vec() : b->sizes().vec();
    if (sizes != shape) throw ConfigError("checkpoint " + path + ": shape mismatch for " + name);
  }
}

void copy_weights(torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  auto src = from.named_parameters();
  auto dst = to.named_parameters();
  if (src.size() != dst.size()) throw std::invalid_argument("copy_weights: structure mismatch");
  for (const auto& item : src) {
    auto* target = dst.find(item.key());
    if (!target || target->sizes() != item.value().sizes()) {
      throw std::invalid_argument("copy_weights: structure mismatch at " + item.key());
    }
    target->copy_(item.value());
  }
  auto src_buf = from.named_buffers();
  auto dst_buf = to.named_buffers();
  for (const auto& item : src_buf) {
    auto* target = dst_buf.find(item.key());
    if (!target) throw std::invalid_argument("copy_weights: missing buffer " + item.key());
    target->copy_(item.value());
  }
}

}  // namespace scalebench
