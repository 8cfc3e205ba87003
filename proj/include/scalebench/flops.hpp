#pragma once

// Closed-form FLOPs of ViT backbones and convolutional heads, and the
// benchmark's per-task compute gate.
//
// Convention: one multiply-accumulate is two FLOPs unless the caller asks for
// the MAC count. Only linear and convolution layers are counted;
// normalization, activations, softmax, pooling and resampling are not.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scalebench/errors.hpp"

namespace scalebench {

enum class FlopConvention { multiply_add_as_two, multiply_add_as_one };

enum class Task { classification, change_detection };

inline std::string_view to_string(Task t) {
  return t == Task::classification ? "classification" : "change_detection";
}

inline Task parse_task(std::string_view s) {
  if (s == "classification") return Task::classification;
  if (s == "change_detection") return Task::change_detection;
  throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

struct BackboneSpec {
  int patch_size = 8;
  int depth = 4;
  int width = 128;
  int heads = 4;
  double mlp_ratio = 4.0;
  bool uses_cls_token = true;
  int in_channels = 3;

  void validate() const {
    if (patch_size <= 0 || depth <= 0 || width <= 0 || heads <= 0 ||
        mlp_ratio <= 0.0 || in_channels <= 0) {
      throw std::invalid_argument("BackboneSpec: all fields must be positive");
    }
    if (width % heads != 0) {
      throw std::invalid_argument("BackboneSpec: width must be divisible by heads");
    }
  }

  int mlp_hidden() const { return static_cast<int>(mlp_ratio * width); }

  int grid_side(int image_side) const {
    if (image_side <= 0 || image_side % patch_size != 0) {
      throw std::invalid_argument("image side " + std::to_string(image_side) +
                                  " is not divisible by patch size " +
                                  std::to_string(patch_size));
    }
    return image_side / patch_size;
  }

  int tokens(int image_side) const {
    const int g = grid_side(image_side);
    return g * g + (uses_cls_token ? 1 : 0);
  }

  static BackboneSpec vit_base_16() { return {16, 12, 768, 12, 4.0, true, 3}; }
  static BackboneSpec desk() { return {}; }

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// t tokens through an m -> n linear map.
constexpr double linear_flops(double tokens, double in_features, double out_features) {
  return 2.0 * tokens * in_features * out_features;
}

constexpr double conv2d_flops(int out_h, int out_w, int in_ch, int out_ch, int kernel) {
  return 2.0 * out_h * out_w * in_ch * out_ch * kernel * kernel;
}

constexpr double transposed_conv2d_flops(int in_h, int in_w, int in_ch, int out_ch,
                                         int kernel) {
  return 2.0 * in_h * in_w * in_ch * out_ch * kernel * kernel;
}

/// Raw FLOPs of one transformer block over t tokens.
inline double vit_block_flops(const BackboneSpec& s, double t) {
  const double d = s.width;
  const double qkv = 2.0 * 3.0 * t * d * d;
  const double attention = 2.0 * 2.0 * t * t * d;
  const double projection = 2.0 * t * d * d;
  const double mlp = 2.0 * 2.0 * t * d * (s.mlp_ratio * d);
  return qkv + attention + projection + mlp;
}

inline double patch_embed_flops(const BackboneSpec& s, int image_side) {
  const double g = s.grid_side(image_side);
  return linear_flops(g * g, s.in_channels * s.patch_size * s.patch_size, s.width);
}

/// Forward-pass GFLOPs of a plain ViT on a square image.
inline double vit_forward_flops(const BackboneSpec& s, int image_side,
                                FlopConvention conv = FlopConvention::multiply_add_as_two) {
  s.validate();
  const double t = s.tokens(image_side);
  double flops = patch_embed_flops(s, image_side) + s.depth * vit_block_flops(s, t);
  if (conv == FlopConvention::multiply_add_as_one) flops /= 2.0;
  return flops / 1e9;
}

inline double budget_gflops(Task task) {
  return task == Task::classification ? 50.0 : 100.0;
}

/// One entry of an assembly's cost breakdown. Components must carry either a
/// closed-form or a measured value; the closed form wins when both exist.
struct ComponentCost {
  std::string name;
  std::optional<double> analytic_gflops;
  std::optional<double> measured_gflops;

  static ComponentCost analytic(std::string name, double gflops) {
    return {std::move(name), gflops, std::nullopt};
  }
  static ComponentCost measured(std::string name, double gflops) {
    return {std::move(name), std::nullopt, gflops};
  }
  static ComponentCost unknown(std::string name) {
    return {std::move(name), std::nullopt, std::nullopt};
  }
};

struct FlopsReport {
  Task task = Task::classification;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> per_component;
  double budget = 0.0;
  bool passed = false;
};

inline FlopsReport gate(std::span<const ComponentCost> components, Task task) {
  FlopsReport report;
  report.task = task;
  report.budget = budget_gflops(task);
  for (const auto& c : components) {
    const auto value = c.analytic_gflops ? c.analytic_gflops : c.measured_gflops;
    if (!value) throw UnaccountedComponent(c.name);
    if (*value < 0.0) {
      throw std::invalid_argument("component '" + c.name + "' has negative FLOPs");
    }
    report.per_component.emplace_back(c.name, *value);
    report.total += *value;
  }
  report.passed = report.total <= report.budget;
  return report;
}

inline void require_passed(const FlopsReport& report) {
  if (!report.passed) {
    throw GateFailure("FLOPs gate failed: " + std::to_string(report.total) +
                      " GFLOPs exceeds the " + std::to_string(report.budget) +
                      " GFLOPs " + std::string(to_string(report.task)) + " budget");
  }
}

}  // namespace scalebench
