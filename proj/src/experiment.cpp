#include "scalebench/experiment.hpp"

#include <type_traits>

#include "scalebench/errors.hpp"
#include "scalebench/synthetic.hpp"

namespace scalebench {

namespace {

Split split_of(const DataConfig& data, bool train) {
  return parse_split(train ? data.train_split : data.eval_split);
}

}  // namespace

std::vector<BitemporalSample> load_change_data(const DataConfig& data, bool train) {
  if (data.source == DataSource::directory) {
    return load_bitemporal_samples(load_bitemporal_dir(data.root, split_of(data, train)));
  }
  std::vector<BitemporalSample> out;
  const int n = train ? data.train_items : data.eval_items;
  for (auto& p : make_synthetic_cd_pairs(n, data.synthetic_cd, train ? data.train_seed : data.eval_seed)) {
    out.push_back(std::move(p.sample));
  }
  return out;
}

std::vector<ClassificationSample> load_classification_data(const DataConfig& data, bool train) {
  if (data.source == DataSource::directory) {
    return load_classification_samples(load_classification_dir(data.root, split_of(data, train)));
  }
  return make_synthetic_classification_fixture(train ? data.train_items : data.eval_items,
                                               data.synthetic_cls,
                                               train ? data.train_seed : data.eval_seed);
}

std::vector<Image> load_pretraining_tiles(const DataConfig& data) {
  std::vector<Image> sources;
  if (data.source == DataSource::directory) {
    const auto split = split_of(data, true);
    if (std::filesystem::is_directory(std::filesystem::path(data.root) / data.train_split / "A")) {
      for (auto& s : load_bitemporal_samples(load_bitemporal_dir(data.root, split))) {
        sources.push_back(std::move(s.first));
        sources.push_back(std::move(s.second));
      }
    } else {
      for (auto& s : load_classification_samples(load_classification_dir(data.root, split))) {
        sources.push_back(std::move(s.image));
      }
    }
  } else {
    SyntheticCdParams scene = data.synthetic_cd;
    const int factor = std::max(1, 2 * data.tile_side / scene.side);
    scene.side *= factor;
    scene.size_min *= factor;
    scene.size_max *= factor;
    scene.shapes_min *= factor;
    scene.shapes_max *= factor;
    const int scenes = std::max(1, data.train_items / (2 * factor * factor));
    for (auto& p : make_synthetic_cd_pairs(scenes, scene, data.train_seed)) {
      sources.push_back(std::move(p.sample.first));
      sources.push_back(std::move(p.sample.second));
    }
  }
  std::vector<Image> tiles;
  for (const auto& im : sources) {
    for (auto& t : tile_for_pretraining(im, data.tile_side)) tiles.push_back(std::move(t));
  }
  return tiles;
}

nlohmann::json backbone_checkpoint_config(const BackboneSpec& spec, int reference_side) {
  return {{"backbone", to_json(spec)}, {"reference_side", reference_side}};
}

namespace {

template <class Model>
void load_pretrained_backbone(Model& model, const std::filesystem::path& path) {
  auto& backbone = model->backbone();
  load_checkpoint(path.string(),
                  backbone_checkpoint_config(backbone->spec(), backbone->reference_side()),
                  *backbone);
}

template <class Model, class Sample>
FinetuneOutcome finetune_and_evaluate(Model model, const ExperimentConfig& config,
                                      const FinetuneOptions& options, FlopsReport flops,
                                      std::vector<Sample> train, std::vector<Sample> eval) {
  if (options.init_backbone) load_pretrained_backbone(model, *options.init_backbone);
  const auto train_fp = fingerprint(train);
  const auto eval_fp = fingerprint(eval);
  TrainHooks hooks;
  hooks.on_epoch = options.on_epoch;
  auto log = finetune(model, std::span<const Sample>(train), config.train, hooks);
  if (options.save_to) save_checkpoint(options.save_to->string(), to_json(model->config()), *model);
  const auto predictor = make_predictor(model);
  const auto batch = static_cast<std::size_t>(config.eval.batch_size);
  auto report = [&] {
    if constexpr (std::is_same_v<Sample, BitemporalSample>) {
      return evaluate_change_detector(predictor, eval, config.eval.distortion, flops, batch);
    } else {
      return evaluate_classifier(predictor, eval, config.eval.distortion, flops, batch);
    }
  }();
  return {std::move(flops), std::move(log), std::move(report), train_fp, eval_fp};
}

}  // namespace

FinetuneOutcome run_finetune(const ExperimentConfig& config, const FinetuneOptions& options) {
  config.validate();
  auto flops = gate(config.model);
  require_passed(flops);
  torch::manual_seed(config.seed);
  if (config.task == Task::change_detection) {
    ChangeDetector model(config.model);
    return finetune_and_evaluate(model, config, options, std::move(flops),
                                 load_change_data(config.data, true),
                                 load_change_data(config.data, false));
  }
  Classifier model(config.model);
  return finetune_and_evaluate(model, config, options, std::move(flops),
                               load_classification_data(config.data, true),
                               load_classification_data(config.data, false));
}

EvaluateOutcome run_evaluation(const ExperimentConfig& config,
                               const std::optional<std::filesystem::path>& checkpoint) {
  config.validate();
  auto flops = gate(config.model);
  const auto& spec = config.eval.distortion;
  const auto batch = static_cast<std::size_t>(config.eval.batch_size);
  if (config.task == Task::change_detection) {
    const auto eval = load_change_data(config.data, false);
    ChangeDetectorFn predictor = oracle_change_detector();
    if (checkpoint) {
      ChangeDetector model(config.model);
      load_checkpoint(checkpoint->string(), to_json(config.model), *model);
      predictor = make_predictor(model);
    }
    auto report = evaluate_change_detector(predictor, eval, spec, flops, batch);
    return {std::move(flops), std::move(report), fingerprint(eval)};
  }
  const auto eval = load_classification_data(config.data, false);
  ClassifierFn predictor = oracle_classifier();
  if (checkpoint) {
    Classifier model(config.model);
    load_checkpoint(checkpoint->string(), to_json(config.model), *model);
    predictor = make_predictor(model);
  }
  auto report = evaluate_classifier(predictor, eval, spec, flops, batch);
  return {std::move(flops), std::move(report), fingerprint(eval)};
}

PretrainOutcome run_pretrain(const ExperimentConfig& config,
                             const std::optional<std::filesystem::path>& save_backbone,
                             TrainingLog* log) {
  config.validate();
  auto pcfg = config.pretrain;
  pcfg.seed = config.seed;
  const auto tiles = load_pretraining_tiles(config.data);
  PretrainOutcome out;
  out.tiles = fingerprint(tiles);
  PretrainState state(pcfg);
  out.result = run_pretraining(state, tiles, log);
  if (save_backbone) {
    save_checkpoint(save_backbone->string(),
                    backbone_checkpoint_config(pcfg.backbone, pcfg.crops.global_side), *state.teacher);
  }
  return out;
}

}  // namespace scalebench
