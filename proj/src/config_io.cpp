#include "scalebench/config_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scalebench/errors.hpp"

namespace scalebench {

// ----------------------------------------------------------- StrictObject

StrictObject::StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
}

const json* StrictObject::take(const char* key) {
  auto it = j_.find(key);
  if (it == j_.end()) return nullptr;
  consumed_.emplace_back(key);
  return &*it;
}

void StrictObject::finish() const {
  std::string unknown;
  for (const auto& item : j_.items()) {
    if (std::find(consumed_.begin(), consumed_.end(), item.key()) == consumed_.end()) {
      unknown += (unknown.empty() ? "" : ", ") + path_ + "." + item.key();
    }
  }
  if (!unknown.empty()) throw ConfigError("unknown configuration key(s): " + unknown);
}

void StrictObject::fail(const char* key, const std::string& why) const {
  throw ConfigError(path_ + "." + key + ": " + why);
}

namespace {

template <class Enum, class Parse>
void get_enum(StrictObject& o, const char* key, Enum& out, Parse parse) {
  if (const json* v = o.take(key)) {
    if (!v->is_string()) throw ConfigError(o.child_path(key) + ": expected a string");
    try {
      out = parse(v->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(o.child_path(key) + ": " + e.what());
    }
  }
}

void read_backbone(const json& j, const std::string& path, BackboneSpec& s) {
  StrictObject o(j, path);
  o.get("patch_size", s.patch_size);
  o.get("depth", s.depth);
  o.get("width", s.width);
  o.get("heads", s.heads);
  o.get("mlp_ratio", s.mlp_ratio);
  o.get("uses_cls_token", s.uses_cls_token);
  o.get("in_channels", s.in_channels);
  o.finish();
}

void read_model(const json& j, const std::string& path, AssemblyConfig& c) {
  StrictObject o(j, path);
  if (const json* b = o.take("backbone")) read_backbone(*b, o.child_path("backbone"), c.backbone);
  o.get("image_side", c.image_side);
  get_enum(o, "head", c.head, parse_head);
  get_enum(o, "fusion", c.fusion, parse_fusion);
  get_enum(o, "pooling", c.pooling, parse_pooling);
  o.get("tap_layers", c.tap_layers);
  o.get("num_classes", c.num_classes);
  o.get("neck_channels", c.neck_channels);
  o.get("decoder_channels", c.decoder_channels);
  o.finish();
}

void read_train(const json& j, const std::string& path, TrainConfig& c) {
  StrictObject o(j, path);
  o.get("epochs", c.epochs);
  o.get("batch_size", c.batch_size);
  o.get("freeze_backbone", c.freeze_backbone);
  o.get("scale_aug", c.scale_aug);
  get_enum(o, "aug_mode", c.aug_mode, parse_augmentation_mode);
  if (const json* opt = o.take("optimizer")) {
    StrictObject oo(*opt, o.child_path("optimizer"));
    oo.get("peak_lr", c.optimizer.peak_lr);
    oo.get("min_lr", c.optimizer.min_lr);
    oo.get("weight_decay", c.optimizer.weight_decay);
    oo.get("beta1", c.optimizer.beta1);
    oo.get("beta2", c.optimizer.beta2);
    oo.finish();
  }
  get_enum(o, "schedule", c.schedule, parse_schedule);
  o.get("warmup_steps", c.warmup_steps);
  o.get("milestones", c.milestones);
  o.get("gamma", c.gamma);
  o.finish();
}

void read_eval(const json& j, const std::string& path, EvalConfig& c) {
  StrictObject o(j, path);
  o.get("factors", c.distortion.factors);
  get_enum(o, "target", c.distortion.target, parse_distortion_target);
  get_enum(o, "interpolation", c.distortion.interpolation, parse_interpolation);
  o.get("batch_size", c.batch_size);
  o.finish();
}

void read_cd_params(const json& j, const std::string& path, SyntheticCdParams& p) {
  StrictObject o(j, path);
  o.get("side", p.side);
  o.get("shapes_min", p.shapes_min);
  o.get("shapes_max", p.shapes_max);
  o.get("edits_min", p.edits_min);
  o.get("edits_max", p.edits_max);
  o.get("size_min", p.size_min);
  o.get("size_max", p.size_max);
  o.get("photometric_jitter", p.photometric_jitter);
  o.get("noise", p.noise);
  o.get("texture", p.texture);
  o.finish();
}

void read_cls_params(const json& j, const std::string& path, SyntheticClsParams& p) {
  StrictObject o(j, path);
  o.get("side", p.side);
  o.get("num_classes", p.num_classes);
  o.get("noise", p.noise);
  o.finish();
}

void read_data(const json& j, const std::string& path, DataConfig& c) {
  StrictObject o(j, path);
  get_enum(o, "source", c.source, [](const std::string& s) {
    if (s == "synthetic") return DataSource::synthetic;
    if (s == "directory") return DataSource::directory;
    throw std::invalid_argument("unknown data source '" + s + "'");
  });
  o.get("root", c.root);
  o.get("train_split", c.train_split);
  o.get("eval_split", c.eval_split);
  o.get("train_items", c.train_items);
  o.get("eval_items", c.eval_items);
  o.get("train_seed", c.train_seed);
  o.get("eval_seed", c.eval_seed);
  if (const json* cd = o.take("synthetic_cd")) read_cd_params(*cd, o.child_path("synthetic_cd"), c.synthetic_cd);
  if (const json* cls = o.take("synthetic_cls")) read_cls_params(*cls, o.child_path("synthetic_cls"), c.synthetic_cls);
  o.get("tile_side", c.tile_side);
  o.finish();
}

void read_pretrain(const json& j, const std::string& path, PretrainConfig& c) {
  StrictObject o(j, path);
  if (const json* b = o.take("backbone")) read_backbone(*b, o.child_path("backbone"), c.backbone);
  if (const json* cr = o.take("crops")) {
    StrictObject oc(*cr, o.child_path("crops"));
    oc.get("global_side", c.crops.global_side);
    oc.get("local_side", c.crops.local_side);
    oc.get("global_scale_min", c.crops.global_scale_min);
    oc.get("global_scale_max", c.crops.global_scale_max);
    oc.get("local_scale_min", c.crops.local_scale_min);
    oc.get("local_scale_max", c.crops.local_scale_max);
    oc.get("flip_probability", c.crops.flip_probability);
    get_enum(oc, "interpolation", c.crops.interpolation, parse_interpolation);
    oc.finish();
  }
  o.get("scale_aug", c.scale_aug);
  o.get("tap_layers", c.tap_layers);
  o.get("neck_channels", c.neck_channels);
  o.get("decoder_channels", c.decoder_channels);
  o.get("overlap_weight", c.overlap_weight);
  o.get("distillation", c.distillation);
  o.get("student_only_overlap", c.student_only_overlap);
  o.get("total_steps", c.total_steps);
  o.get("steps_per_epoch", c.steps_per_epoch);
  o.get("warmup_epochs", c.warmup_epochs);
  o.get("batch_size", c.batch_size);
  o.get("backbone_peak_lr", c.backbone_peak_lr);
  o.get("backbone_min_lr", c.backbone_min_lr);
  o.get("decoder_peak_lr", c.decoder_peak_lr);
  o.get("decoder_min_lr", c.decoder_min_lr);
  o.get("weight_decay", c.weight_decay);
  if (const json* e = o.take("ema")) {
    StrictObject oe(*e, o.child_path("ema"));
    oe.get("base", c.ema.base);
    oe.get("final", c.ema.final);
    oe.finish();
  }
  o.finish();
}

}  // namespace

// ----------------------------------------------------------------- writers

json to_json(const BackboneSpec& s) {
  return {{"patch_size", s.patch_size}, {"depth", s.depth},         {"width", s.width},
          {"heads", s.heads},           {"mlp_ratio", s.mlp_ratio}, {"uses_cls_token", s.uses_cls_token},
          {"in_channels", s.in_channels}};
}

json to_json(const AssemblyConfig& c) {
  return {{"backbone", to_json(c.backbone)},
          {"image_side", c.image_side},
          {"head", to_string(c.head)},
          {"fusion", to_string(c.fusion)},
          {"pooling", to_string(c.pooling)},
          {"tap_layers", c.tap_layers},
          {"num_classes", c.num_classes},
          {"neck_channels", c.neck_channels},
          {"decoder_channels", c.decoder_channels}};
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"freeze_backbone", c.freeze_backbone},
          {"scale_aug", c.scale_aug},
          {"aug_mode", to_string(c.aug_mode)},
          {"optimizer",
           {{"peak_lr", c.optimizer.peak_lr},
            {"min_lr", c.optimizer.min_lr},
            {"weight_decay", c.optimizer.weight_decay},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2}}},
          {"schedule", to_string(c.schedule)},
          {"warmup_steps", c.warmup_steps},
          {"milestones", c.milestones},
          {"gamma", c.gamma}};
}

json to_json(const DistortionSpec& s) {
  return {{"factors", s.factors},
          {"target", to_string(s.target)},
          {"interpolation", to_string(s.interpolation)}};
}

json to_json(const DataConfig& c) {
  const auto& cd = c.synthetic_cd;
  const auto& cls = c.synthetic_cls;
  return {{"source", c.source == DataSource::synthetic ? "synthetic" : "directory"},
          {"root", c.root},
          {"train_split", c.train_split},
          {"eval_split", c.eval_split},
          {"train_items", c.train_items},
          {"eval_items", c.eval_items},
          {"train_seed", c.train_seed},
          {"eval_seed", c.eval_seed},
          {"synthetic_cd",
           {{"side", cd.side},
            {"shapes_min", cd.shapes_min},
            {"shapes_max", cd.shapes_max},
            {"edits_min", cd.edits_min},
            {"edits_max", cd.edits_max},
            {"size_min", cd.size_min},
            {"size_max", cd.size_max},
            {"photometric_jitter", cd.photometric_jitter},
            {"noise", cd.noise},
            {"texture", cd.texture}}},
          {"synthetic_cls", {{"side", cls.side}, {"num_classes", cls.num_classes}, {"noise", cls.noise}}},
          {"tile_side", c.tile_side}};
}

json to_json(const PretrainConfig& c) {
  return {{"backbone", to_json(c.backbone)},
          {"crops",
           {{"global_side", c.crops.global_side},
            {"local_side", c.crops.local_side},
            {"global_scale_min", c.crops.global_scale_min},
            {"global_scale_max", c.crops.global_scale_max},
            {"local_scale_min", c.crops.local_scale_min},
            {"local_scale_max", c.crops.local_scale_max},
            {"flip_probability", c.crops.flip_probability},
            {"interpolation", to_string(c.crops.interpolation)}}},
          {"scale_aug", c.scale_aug},
          {"tap_layers", c.tap_layers},
          {"neck_channels", c.neck_channels},
          {"decoder_channels", c.decoder_channels},
          {"overlap_weight", c.overlap_weight},
          {"distillation", c.distillation},
          {"student_only_overlap", c.student_only_overlap},
          {"total_steps", c.total_steps},
          {"steps_per_epoch", c.steps_per_epoch},
          {"warmup_epochs", c.warmup_epochs},
          {"batch_size", c.batch_size},
          {"backbone_peak_lr", c.backbone_peak_lr},
          {"backbone_min_lr", c.backbone_min_lr},
          {"decoder_peak_lr", c.decoder_peak_lr},
          {"decoder_min_lr", c.decoder_min_lr},
          {"weight_decay", c.weight_decay},
          {"ema", {{"base", c.ema.base}, {"final", c.ema.final}}}};
}

json to_json(const ExperimentConfig& c) {
  return {{"task", to_string(c.task)},
          {"seed", c.seed},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"eval", {{"factors", c.eval.distortion.factors},
                    {"target", to_string(c.eval.distortion.target)},
                    {"interpolation", to_string(c.eval.distortion.interpolation)},
                    {"batch_size", c.eval.batch_size}}},
          {"data", to_json(c.data)},
          {"pretrain", to_json(c.pretrain)}};
}

// ----------------------------------------------------------------- readers

void ExperimentConfig::validate() const {
  try {
    model.validate();
    train.validate();
    eval.distortion.validate();
    pretrain.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (task_of(model) != task) throw ConfigError("model head does not match task");
  if (train.task != task) throw ConfigError("train.task does not match task");
  if (task == Task::classification &&
      eval.distortion.target == DistortionTarget::second_image_only) {
    throw ConfigError("eval.target second_image_only requires change_detection");
  }
  if (eval.batch_size <= 0) throw ConfigError("eval.batch_size must be positive");
  if (data.source == DataSource::directory && data.root.empty()) {
    throw ConfigError("data.root is required for directory datasets");
  }
  if (data.train_items <= 0 || data.eval_items <= 0) {
    throw ConfigError("data item counts must be positive");
  }
}

ExperimentConfig default_experiment(Task task) {
  ExperimentConfig c;
  c.task = task;
  const auto backbone = BackboneSpec::desk();
  if (task == Task::classification) {
    c.model = classifier_config(backbone, Pooling::cls_token, 4, 64);
    c.train = classification_finetune_defaults();
    c.train.epochs = 30;
    c.train.batch_size = 32;
    c.train.optimizer.peak_lr = 5e-4;
    c.eval.distortion = DistortionSpec{};
    c.data.train_items = 100;
    c.data.eval_items = 25;
  } else {
    c.model = change_detector_config(backbone, Fusion::subtract, default_tap_layers(backbone.depth), 64);
    c.train = change_detection_defaults();
    c.train.epochs = 20;
    c.train.batch_size = 16;
    c.train.optimizer.peak_lr = 1e-3;
    c.train.optimizer.min_lr = 1e-5;
    c.eval.distortion = change_detection_spec();
  }

  c.pretrain.backbone = backbone;
  c.pretrain.tap_layers = default_tap_layers(backbone.depth);
  c.pretrain.crops.global_side = 64;
  c.pretrain.crops.local_side = 32;
  c.pretrain.total_steps = 200;
  c.pretrain.steps_per_epoch = 10;
  c.pretrain.warmup_epochs = 2;
  c.pretrain.backbone_peak_lr = 5e-4;
  c.pretrain.decoder_peak_lr = 1e-3;
  c.data.tile_side = 96;
  return c;
}

ExperimentConfig experiment_from_json(const json& j, ExperimentConfig c) {
  StrictObject o(j, "config");
  get_enum(o, "task", c.task, parse_task);
  o.get("seed", c.seed);
  if (const json* m = o.take("model")) read_model(*m, o.child_path("model"), c.model);
  if (const json* t = o.take("train")) read_train(*t, o.child_path("train"), c.train);
  if (const json* e = o.take("eval")) read_eval(*e, o.child_path("eval"), c.eval);
  if (const json* d = o.take("data")) read_data(*d, o.child_path("data"), c.data);
  if (const json* p = o.take("pretrain")) read_pretrain(*p, o.child_path("pretrain"), c.pretrain);
  o.finish();
  c.train.task = c.task;
  c.train.seed = c.seed;
  c.pretrain.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  Task task = Task::change_detection;
  if (j.is_object() && j.contains("task")) {
    try {
      task = parse_task(j.at("task").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config.task: ") + e.what());
    }
  }
  return experiment_from_json(j, default_experiment(task));
}

AssemblyConfig assembly_from_json(const json& j) {
  AssemblyConfig c;
  read_model(j, "model", c);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

BackboneSpec backbone_from_json(const json& j) {
  BackboneSpec s;
  read_backbone(j, "backbone", s);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::vector<int> parse_factor_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(k);
    } catch (const std::exception&) {
      throw ConfigError("invalid factor '" + item + "' in '" + text + "'");
    }
  }
  DistortionSpec probe;
  probe.factors = out;
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

}  // namespace scalebench
