#include "scalebench/ssl_pretrain.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "scalebench/errors.hpp"

namespace F = torch::nn::functional;

namespace scalebench {

// ------------------------------------------------------------------ crops

void CropParams::validate() const {
  if (global_side <= 0 || local_side <= 0) {
    throw std::invalid_argument("CropParams: crop sides must be positive");
  }
  auto check_range = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
      throw std::invalid_argument(std::string("CropParams: invalid ") + what + " scale range");
    }
  };
  check_range(global_scale_min, global_scale_max, "global");
  check_range(local_scale_min, local_scale_max, "local");
  if (flip_probability < 0.0 || flip_probability > 1.0) {
    throw std::invalid_argument("CropParams: flip_probability outside [0,1]");
  }
}

namespace {

struct SourceRect {
  int x, y, w, h;
};

SourceRect fixed_rect(const Image& image, int side, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> px(0, image.width - side);
  std::uniform_int_distribution<int> py(0, image.height - side);
  const int x = px(rng);
  const int y = py(rng);
  return {x, y, side, side};
}

// Area fraction and log-uniform aspect ratio in [3/4, 4/3], retried until the
// box fits; falls back to the largest centred square.
SourceRect random_resized_rect(const Image& image, double lo, double hi, std::mt19937_64& rng) {
  const double area = static_cast<double>(image.width) * image.height;
  std::uniform_real_distribution<double> scale(lo, hi);
  std::uniform_real_distribution<double> log_ratio(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * scale(rng);
    const double ratio = std::exp(log_ratio(rng));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= image.width && h <= image.height) {
      std::uniform_int_distribution<int> px(0, image.width - w);
      std::uniform_int_distribution<int> py(0, image.height - h);
      const int x = px(rng);
      const int y = py(rng);
      return {x, y, w, h};
    }
  }
  const int side = std::min(image.width, image.height);
  return {(image.width - side) / 2, (image.height - side) / 2, side, side};
}

Crop cut(const Image& image, const SourceRect& r, int out_side, bool flip, Interpolation kind) {
  Image pixels = crop(image, r.x, r.y, r.w, r.h);
  if (r.w != out_side || r.h != out_side) pixels = resize(pixels, out_side, out_side, kind);
  if (flip) pixels = flip_horizontal(pixels);
  return {std::move(pixels), CropBox(r.x, r.y, r.w, r.h, out_side, flip)};
}

}  // namespace

CropBatch make_crops(const Image& image, const CropParams& params, bool scale_aug,
                     std::mt19937_64& rng) {
  params.validate();
  if (image.height < params.global_side || image.width < params.global_side) {
    throw std::invalid_argument("make_crops: image " + std::to_string(image.height) + "x" +
                                std::to_string(image.width) + " smaller than global crop side " +
                                std::to_string(params.global_side));
  }
  std::bernoulli_distribution flip(params.flip_probability);
  auto draw = [&](bool global) {
    const int side = global ? params.global_side : params.local_side;
    SourceRect r = scale_aug
                       ? random_resized_rect(image,
                                             global ? params.global_scale_min : params.local_scale_min,
                                             global ? params.global_scale_max : params.local_scale_max,
                                             rng)
                       : fixed_rect(image, side, rng);
    const bool f = flip(rng);
    return cut(image, r, side, f, params.interpolation);
  };
  auto g0 = draw(true);
  auto g1 = draw(true);
  CropBatch batch{{std::move(g0), std::move(g1)},
                  {draw(false), draw(false), draw(false), draw(false), draw(false), draw(false),
                   draw(false), draw(false)}};
  return batch;
}

// -------------------------------------------------------------------- EMA

void ema_update(torch::nn::Module& teacher, const torch::nn::Module& student, double momentum) {
  if (momentum < 0.0 || momentum > 1.0) {
    throw std::invalid_argument("ema_update: momentum outside [0,1]");
  }
  auto t_params = teacher.named_parameters();
  const auto s_params = student.named_parameters();
  if (t_params.size() != s_params.size()) {
    throw std::invalid_argument("ema_update: parameter sets differ in size");
  }
  torch::NoGradGuard no_grad;
  for (const auto& item : s_params) {
    auto* t = t_params.find(item.key());
    if (!t || t->sizes() != item.value().sizes()) {
      throw std::invalid_argument("ema_update: structural mismatch at '" + item.key() + "'");
    }
    // Blend in double and round once.
    const auto blended = t->to(torch::kFloat64) * momentum + item.value().to(torch::kFloat64) * (1.0 - momentum);
    t->copy_(blended);
  }
}

// ---------------------------------------------------------- distillation

torch::Tensor ClsCosineDistillation::operator()(const DistillationInputs& in) {
  torch::Tensor total = torch::zeros({});
  long terms = 0;
  auto add_view = [&](const BackboneOutput& view, int skip_teacher) {
    TORCH_CHECK(view.cls.defined(), "cls_cosine distillation needs a cls token");
    for (int t = 0; t < static_cast<int>(in.teacher_global.size()); ++t) {
      if (t == skip_teacher) continue;
      auto target = in.teacher_global[t].cls.detach();
      total = total + (1.0 - F::cosine_similarity(view.cls, target,
                                                  F::CosineSimilarityFuncOptions().dim(1)))
                          .mean();
      ++terms;
    }
  };
  for (int g = 0; g < static_cast<int>(in.student_global.size()); ++g) add_view(in.student_global[g], g);
  for (const auto& view : in.student_local) add_view(view, -1);
  return terms ? total / static_cast<double>(terms) : total;
}

std::shared_ptr<DistillationLoss> make_distillation(const std::string& name) {
  if (name == "none") return std::make_shared<NoDistillation>();
  if (name == "cls_cosine") return std::make_shared<ClsCosineDistillation>();
  throw std::invalid_argument("unknown distillation loss '" + name + "'");
}

// ---------------------------------------------------------- overlap branch

torch::Tensor overlap_targets(std::span<const CropBox> first, std::span<const CropBox> second) {
  if (first.size() != second.size() || first.empty()) {
    throw std::invalid_argument("overlap_targets: box lists must be equal and nonempty");
  }
  const int side = first.front().out_size();
  auto out = torch::empty({static_cast<long>(first.size()), side, side}, torch::kInt64);
  auto* dst = out.data_ptr<int64_t>();
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].out_size() != side) {
      throw std::invalid_argument("overlap_targets: first crops differ in output side");
    }
    const auto mask = rasterize_overlap_mask(first[i], second[i]);
    for (auto b : mask.grid.bits) *dst++ = b;
  }
  return out;
}

torch::Tensor overlap_branch_loss(const std::map<int, torch::Tensor>& first_taps,
                                  const std::map<int, torch::Tensor>& second_taps,
                                  std::span<const CropBox> first_boxes,
                                  std::span<const CropBox> second_boxes,
                                  std::span<const int> layers, MaskDecoder& decoder) {
  std::vector<torch::Tensor> fused;
  for (int layer : layers) {
    const auto& a = first_taps.at(layer);
    const auto& b = second_taps.at(layer);
    if (a.sizes() != b.sizes()) {
      throw std::invalid_argument("overlap_branch_loss: feature grids differ at layer " +
                                  std::to_string(layer));
    }
    fused.push_back(torch::cat({a, b}, 1));
  }
  const auto targets = overlap_targets(first_boxes, second_boxes);
  const int side = static_cast<int>(targets.size(1));
  auto logits = decoder->forward(fused, side);
  return F::cross_entropy(logits, targets);
}

// --------------------------------------------------------------- training

void PretrainConfig::validate() const {
  backbone.validate();
  crops.validate();
  (void)backbone.grid_side(crops.global_side);
  (void)backbone.grid_side(crops.local_side);
  if (static_cast<int>(tap_layers.size()) != kPyramidLevels) {
    throw std::invalid_argument("PretrainConfig: overlap decoder needs exactly 4 tap layers");
  }
  for (int t : tap_layers) {
    if (t < 1 || t > backbone.depth) {
      throw std::invalid_argument("PretrainConfig: tap layer out of range");
    }
  }
  if (backbone.grid_side(crops.global_side) % 4 != 0) {
    throw std::invalid_argument("PretrainConfig: global crop grid must be divisible by 4");
  }
  if (total_steps <= 0 || steps_per_epoch <= 0 || warmup_epochs < 0 || batch_size <= 0) {
    throw std::invalid_argument("PretrainConfig: step counts must be positive");
  }
  if (overlap_weight < 0.0) throw std::invalid_argument("PretrainConfig: negative overlap weight");
  ema.validate();
  backbone_schedule().validate();
  decoder_schedule().validate();
}

LrSchedule PretrainConfig::backbone_schedule() const {
  LrSchedule s;
  s.kind = ScheduleKind::warmup_linear;
  s.peak = backbone_peak_lr;
  s.min = backbone_min_lr;
  s.warmup_steps = std::min(total_steps, warmup_epochs * steps_per_epoch);
  s.total_steps = total_steps;
  return s;
}

LrSchedule PretrainConfig::decoder_schedule() const {
  LrSchedule s;
  s.kind = ScheduleKind::warmup_cosine;
  s.peak = decoder_peak_lr;
  s.min = decoder_min_lr;
  s.warmup_steps = std::min(total_steps, warmup_epochs * steps_per_epoch);
  s.total_steps = total_steps;
  return s;
}

PretrainState::PretrainState(const PretrainConfig& config) : config_(config) {
  config_.validate();
  torch::manual_seed(config_.seed);
  student = VisionTransformer(config_.backbone, config_.crops.global_side);
  teacher = VisionTransformer(config_.backbone, config_.crops.global_side);
  copy_weights(*student, *teacher);
  for (auto& p : teacher->parameters()) p.set_requires_grad(false);
  decoder = MaskDecoder(2 * config_.backbone.width, config_.neck_channels,
                        config_.decoder_channels, 2);
  distillation = make_distillation(config_.distillation);

  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(student->parameters(),
                      std::make_unique<torch::optim::AdamWOptions>(
                          torch::optim::AdamWOptions(config_.backbone_peak_lr)
                              .weight_decay(config_.weight_decay)));
  groups.emplace_back(decoder->parameters(),
                      std::make_unique<torch::optim::AdamWOptions>(
                          torch::optim::AdamWOptions(config_.decoder_peak_lr)
                              .weight_decay(config_.weight_decay)));
  optimizer = std::make_unique<torch::optim::AdamW>(std::move(groups));
}

namespace {

torch::Tensor stack_view(std::span<const CropBatch> batch, bool global, int index) {
  std::vector<const Image*> images;
  for (const auto& b : batch) images.push_back(global ? &b.global[index].pixels : &b.local[index].pixels);
  return stack_images(images);
}

void set_lr(torch::optim::AdamW& opt, std::size_t group, double lr) {
  static_cast<torch::optim::AdamWOptions&>(opt.param_groups()[group].options()).lr(lr);
}

}  // namespace

StepLosses pretrain_step(std::span<const CropBatch> batch, PretrainState& state,
                         long long batch_id) {
  if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");
  const auto& cfg = state.config();
  const std::span<const int> taps(cfg.tap_layers);

  StepLosses out;
  out.step = state.step;
  out.lr_backbone = cfg.backbone_schedule().at(state.step);
  out.lr_decoder = cfg.decoder_schedule().at(state.step);
  out.momentum = cfg.ema.at(state.step, cfg.total_steps);
  set_lr(*state.optimizer, 0, out.lr_backbone);
  set_lr(*state.optimizer, 1, out.lr_decoder);

  state.student->train();
  state.decoder->train();

  const bool student_views = state.distillation->needs_student_views();
  std::vector<BackboneOutput> student_global, student_local, teacher_global;
  student_global.push_back(state.student->forward_with_taps(stack_view(batch, true, 0), taps));
  if (student_views || cfg.student_only_overlap) {
    student_global.push_back(state.student->forward_with_taps(stack_view(batch, true, 1), taps));
  }
  if (student_views) {
    for (int j = 0; j < kLocalCrops; ++j) {
      student_local.push_back(state.student->forward_with_taps(stack_view(batch, false, j), {}));
    }
  }
  {
    torch::NoGradGuard no_grad;
    for (int g = 0; g < kGlobalCrops; ++g) {
      teacher_global.push_back(state.teacher->forward_with_taps(stack_view(batch, true, g), taps));
    }
  }

  auto distill = (*state.distillation)({student_global, student_local, teacher_global});

  std::vector<CropBox> first_boxes, second_boxes;
  for (const auto& b : batch) {
    first_boxes.push_back(b.global[0].box);
    second_boxes.push_back(b.global[1].box);
  }
  const auto& second_taps =
      cfg.student_only_overlap ? student_global[1].taps : teacher_global[1].taps;
  auto overlap = overlap_branch_loss(student_global[0].taps, second_taps, first_boxes,
                                     second_boxes, taps, state.decoder);
  auto total = distill + cfg.overlap_weight * overlap;

  out.distillation = distill.item<double>();
  out.overlap = overlap.item<double>();
  out.total = total.item<double>();
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "non-finite pretraining loss at step " << state.step << " (batch " << batch_id
        << "): distillation=" << out.distillation << " overlap=" << out.overlap;
    throw NonFiniteLoss(msg.str(), batch_id);
  }

  state.optimizer->zero_grad();
  total.backward();
  state.optimizer->step();
  ema_update(*state.teacher, *state.student, out.momentum);
  ++state.step;
  return out;
}

TrainingLog::TrainingLog(std::filesystem::path path) : path_(std::move(path)) {
  const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
  std::ofstream f(path_, std::ios::app);
  if (!f) throw std::runtime_error("cannot open training log " + path_.string());
  if (fresh) f << "step,distillation,overlap,total,lr_backbone,lr_decoder,momentum\n";
}

void TrainingLog::append(const StepLosses& r) {
  std::ofstream f(path_, std::ios::app);
  f << std::setprecision(9) << r.step << ',' << r.distillation << ',' << r.overlap << ','
    << r.total << ',' << r.lr_backbone << ',' << r.lr_decoder << ',' << r.momentum << '\n';
}

PretrainResult run_pretraining(PretrainState& state, std::span<const Image> tiles,
                               TrainingLog* log) {
  if (tiles.empty()) throw std::invalid_argument("run_pretraining: no tiles");
  const auto& cfg = state.config();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, tiles.size() - 1);
  PretrainResult result;
  while (state.step < cfg.total_steps) {
    std::vector<CropBatch> batch;
    for (int i = 0; i < cfg.batch_size; ++i) {
      batch.push_back(make_crops(tiles[pick(rng)], cfg.crops, cfg.scale_aug, rng));
    }
    const auto losses = pretrain_step(batch, state, state.step);
    if (log) log->append(losses);
    result.steps.push_back(losses);
  }
  return result;
}

}  // namespace scalebench
