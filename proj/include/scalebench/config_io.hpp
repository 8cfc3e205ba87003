#pragma once

// Experiment configuration files: JSON with a fixed schema. Unknown keys are
// rejected with the full path of the offending key.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalebench/finetune.hpp"
#include "scalebench/model_config.hpp"
#include "scalebench/scale_distortion.hpp"
#include "scalebench/ssl_pretrain.hpp"
#include "scalebench/synthetic.hpp"

namespace scalebench {

using nlohmann::json;

enum class DataSource { synthetic, directory };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::string root;
  std::string train_split = "train";
  std::string eval_split = "test";
  int train_items = 500;  // synthetic: pairs (change detection) or images per class
  int eval_items = 100;
  std::uint64_t train_seed = 1;
  std::uint64_t eval_seed = 2;
  SyntheticCdParams synthetic_cd;
  SyntheticClsParams synthetic_cls;
  int tile_side = 550;  // pretraining tiler
};

struct EvalConfig {
  DistortionSpec distortion;
  int batch_size = 16;
};

struct ExperimentConfig {
  Task task = Task::change_detection;
  AssemblyConfig model;
  TrainConfig train;
  EvalConfig eval;
  DataConfig data;
  PretrainConfig pretrain;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Desk-scale defaults: depth-4/width-128/patch-8 ViT on 64x64 inputs.
ExperimentConfig default_experiment(Task task);

/// Tracks consumed keys of one JSON object so leftovers can be reported.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path);

  template <class T>
  void get(const char* key, T& out) {
    if (const json* v = take(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception& e) {
        fail(key, e.what());
      }
    }
  }

  /// Marks `key` consumed and returns it, or nullptr when absent.
  const json* take(const char* key);
  std::string child_path(const char* key) const { return path_ + "." + key; }
  /// Throws ConfigError naming every key that was never consumed.
  void finish() const;

 private:
  [[noreturn]] void fail(const char* key, const std::string& why) const;

  const json& j_;
  std::string path_;
  std::vector<std::string> consumed_;
};

json to_json(const BackboneSpec& s);
json to_json(const AssemblyConfig& c);
json to_json(const TrainConfig& c);
json to_json(const DistortionSpec& s);
json to_json(const DataConfig& c);
json to_json(const PretrainConfig& c);
json to_json(const ExperimentConfig& c);

/// Overlays the keys present in `j` onto `base`; throws ConfigError on
/// unknown keys, wrong types, or invalid values.
ExperimentConfig experiment_from_json(const json& j, ExperimentConfig base);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Strict inverse of to_json(AssemblyConfig), e.g. for checkpoint headers.
AssemblyConfig assembly_from_json(const json& j);
BackboneSpec backbone_from_json(const json& j);

/// Parses "1,2,4,8".
std::vector<int> parse_factor_list(const std::string& text);

}  // namespace scalebench
