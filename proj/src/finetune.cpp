#include "scalebench/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scalebench/config_io.hpp"
#include "scalebench/errors.hpp"

namespace scalebench {

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("train.epochs must be positive");
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (!(optimizer.peak_lr > optimizer.min_lr) || optimizer.min_lr < 0.0) {
    throw ConfigError("train.optimizer: need peak_lr > min_lr >= 0");
  }
  if (optimizer.weight_decay < 0.0) throw ConfigError("train.optimizer.weight_decay must be >= 0");
  if (warmup_steps < 0) throw ConfigError("train.warmup_steps must be >= 0");
  if (schedule == ScheduleKind::multistep) {
    if (!std::is_sorted(milestones.begin(), milestones.end())) {
      throw ConfigError("train.milestones must be ascending");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train.gamma must lie in (0,1)");
  }
}

LrSchedule TrainConfig::lr_schedule(long long steps_per_epoch) const {
  LrSchedule s;
  s.kind = schedule;
  s.peak = optimizer.peak_lr;
  s.min = optimizer.min_lr;
  s.total_steps = std::max<long long>(1, steps_per_epoch * epochs);
  s.warmup_steps = schedule == ScheduleKind::multistep ? 0 : std::min<long long>(warmup_steps, s.total_steps);
  for (int m : milestones) s.milestones.push_back(static_cast<long long>(m) * steps_per_epoch);
  s.gamma = gamma;
  s.validate();
  return s;
}

TrainConfig classification_finetune_defaults() {
  TrainConfig c;
  c.task = Task::classification;
  c.epochs = 100;
  c.optimizer.peak_lr = 1e-4;
  c.optimizer.min_lr = 1e-5;
  c.schedule = ScheduleKind::warmup_cosine;
  c.warmup_steps = 10;
  return c;
}

TrainConfig linear_probe_defaults() {
  TrainConfig c = classification_finetune_defaults();
  c.freeze_backbone = true;
  c.optimizer.peak_lr = 1e-3;
  c.optimizer.min_lr = 1e-5;
  c.schedule = ScheduleKind::multistep;
  c.milestones = {60, 80};
  c.gamma = 0.1;
  return c;
}

TrainConfig change_detection_defaults() {
  TrainConfig c;
  c.task = Task::change_detection;
  c.epochs = 200;
  c.batch_size = 32;
  c.optimizer.peak_lr = 6e-5;
  c.optimizer.min_lr = 1e-6;
  c.schedule = ScheduleKind::warmup_cosine;
  c.warmup_steps = 10;
  return c;
}

namespace {

torch::Tensor classification_loss(Classifier& model, std::span<const ClassificationSample> batch) {
  std::vector<const Image*> images;
  std::vector<std::int64_t> labels;
  for (const auto& s : batch) {
    images.push_back(&s.image);
    labels.push_back(s.label);
  }
  const auto logits = model->forward(stack_images(images));
  return torch::nn::functional::cross_entropy(logits, torch::tensor(labels, torch::kLong));
}

torch::Tensor change_loss(ChangeDetector& model, std::span<const BitemporalSample> batch) {
  std::vector<const Image*> first, second;
  std::vector<const BinaryMask*> masks;
  for (const auto& s : batch) {
    first.push_back(&s.first);
    second.push_back(&s.second);
    masks.push_back(&s.change_mask);
  }
  const auto logits = model->forward(stack_images(first), stack_images(second));
  return torch::nn::functional::cross_entropy(logits, stack_masks(masks));
}

torch::Tensor loss_of(Classifier& m, std::span<const ClassificationSample> b) {
  return classification_loss(m, b);
}
torch::Tensor loss_of(ChangeDetector& m, std::span<const BitemporalSample> b) {
  return change_loss(m, b);
}

template <class Model>
std::vector<torch::Tensor> trainable_parameters(Model& model, bool freeze_backbone) {
  if (!freeze_backbone) return model->parameters();
  for (auto& p : model->backbone_parameters()) p.set_requires_grad(false);
  return model->head_parameters();
}

template <class Model>
void check_task(Model& model, const TrainConfig& config) {
  if (task_of(model->config()) != config.task) {
    throw ConfigError("training config task does not match the model");
  }
}

template <class Model, class Sample>
TrainLog train_loop(Model& model, std::span<const Sample> data, const TrainConfig& config,
                    const TrainHooks& hooks) {
  config.validate();
  check_task(model, config);
  if (data.empty()) throw ConfigError("training set is empty");

  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const long long steps_per_epoch = static_cast<long long>((data.size() + bs - 1) / bs);
  const auto schedule = config.lr_schedule(steps_per_epoch);

  auto params = trainable_parameters(model, config.freeze_backbone);
  torch::optim::AdamW optimizer(
      params, torch::optim::AdamWOptions(schedule.at(0))
                  .weight_decay(config.optimizer.weight_decay)
                  .betas({config.optimizer.beta1, config.optimizer.beta2}));

  if (hooks.initial_checkpoint) {
    save_checkpoint(hooks.initial_checkpoint->string(), to_json(model->config()), *model);
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  long long step = 0;
  model->train();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    double lr = 0.0;
    long long batches = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      const auto e = std::min(order.size(), b + bs);
      std::vector<Sample> batch;
      batch.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) {
        batch.push_back(apply_train_augmentation(data[order[i]], config.scale_aug, rng,
                                                 config.aug_mode));
      }

      lr = schedule.at(step);
      for (auto& group : optimizer.param_groups()) {
        static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
      }

      auto loss = loss_of(model, std::span<const Sample>(batch));
      const double value = loss.template item<double>();
      if (!std::isfinite(value)) throw NonFiniteLoss("non-finite training loss at batch " + std::to_string(step), step);
      if (step == 0) {
        log.first_batch_loss = value;
        log.first_batch_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                                       order.begin() + static_cast<std::ptrdiff_t>(e));
      }
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();

      total += value;
      ++batches;
      ++step;
    }
    EpochLog entry{epoch, total / static_cast<double>(batches), lr};
    log.epochs.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);
  }
  if (hooks.on_finish) hooks.on_finish(optimizer);
  model->eval();
  return log;
}

template <class Model, class Sample>
double measure_batch_loss(Model& model, std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  std::vector<torch::Tensor> saved;
  for (const auto& buf : model->buffers()) saved.push_back(buf.clone());
  const bool was_training = model->is_training();
  model->train();
  double value = 0.0;
  {
    torch::NoGradGuard no_grad;
    value = loss_of(model, batch).template item<double>();
  }
  auto buffers = model->buffers();
  {
    torch::NoGradGuard no_grad;
    for (std::size_t i = 0; i < buffers.size(); ++i) buffers[i].copy_(saved[i]);
  }
  model->train(was_training);
  return value;
}

}  // namespace

TrainLog finetune(Classifier& model, std::span<const ClassificationSample> data,
                  const TrainConfig& config, const TrainHooks& hooks) {
  return train_loop(model, data, config, hooks);
}

TrainLog finetune(ChangeDetector& model, std::span<const BitemporalSample> data,
                  const TrainConfig& config, const TrainHooks& hooks) {
  return train_loop(model, data, config, hooks);
}

double batch_loss(Classifier& model, std::span<const ClassificationSample> batch) {
  return measure_batch_loss(model, batch);
}

double batch_loss(ChangeDetector& model, std::span<const BitemporalSample> batch) {
  return measure_batch_loss(model, batch);
}

}  // namespace scalebench
