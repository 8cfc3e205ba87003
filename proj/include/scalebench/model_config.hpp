#pragma once

// Declarative description of a task assembly (backbone, optional neck, head)
// and its closed-form cost breakdown. Torch-free so the `flops` tool and the
// gate can reason about models without instantiating them.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scalebench/flops.hpp"

namespace scalebench {

enum class HeadKind { linear_classifier, pyramid_mask_decoder };
enum class Fusion { none, subtract, concat };
enum class Pooling { cls_token, global_average };

inline std::string_view to_string(HeadKind h) {
  return h == HeadKind::linear_classifier ? "linear_classifier" : "pyramid_mask_decoder";
}
inline std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::none: return "none";
    case Fusion::subtract: return "subtract";
    case Fusion::concat: return "concat";
  }
  return "none";
}
inline std::string_view to_string(Pooling p) {
  return p == Pooling::cls_token ? "cls_token" : "global_average";
}

inline HeadKind parse_head(std::string_view s) {
  if (s == "linear_classifier") return HeadKind::linear_classifier;
  if (s == "pyramid_mask_decoder") return HeadKind::pyramid_mask_decoder;
  throw std::invalid_argument("unknown head '" + std::string(s) + "'");
}
inline Fusion parse_fusion(std::string_view s) {
  if (s == "none") return Fusion::none;
  if (s == "subtract") return Fusion::subtract;
  if (s == "concat") return Fusion::concat;
  throw std::invalid_argument("unknown fusion '" + std::string(s) + "'");
}
inline Pooling parse_pooling(std::string_view s) {
  if (s == "cls_token") return Pooling::cls_token;
  if (s == "global_average") return Pooling::global_average;
  throw std::invalid_argument("unknown pooling '" + std::string(s) + "'");
}

/// Number of pyramid levels the neck synthesizes (strides p/2, p, 2p, 4p).
inline constexpr int kPyramidLevels = 4;

/// Tap layers spread over the depth the way {3,5,8,12} spreads over 12.
inline std::vector<int> default_tap_layers(int depth) {
  if (depth < kPyramidLevels) {
    throw std::invalid_argument("default_tap_layers: depth below pyramid level count");
  }
  std::vector<int> taps;
  for (int ref : {3, 5, 8, 12}) {
    int layer = static_cast<int>(std::lround(depth * ref / 12.0));
    layer = std::clamp(layer, 1, depth);
    if (!taps.empty() && layer <= taps.back()) layer = taps.back() + 1;
    taps.push_back(layer);
  }
  if (taps.back() > depth) {
    throw std::invalid_argument("default_tap_layers: cannot spread taps over depth");
  }
  return taps;
}

struct AssemblyConfig {
  BackboneSpec backbone;
  int image_side = 64;
  HeadKind head = HeadKind::linear_classifier;
  Fusion fusion = Fusion::none;
  Pooling pooling = Pooling::cls_token;
  std::vector<int> tap_layers;  // 1-based block indices
  int num_classes = 2;
  int neck_channels = 64;
  int decoder_channels = 64;

  int grid_side() const { return backbone.grid_side(image_side); }

  /// Channels of each fused tap entering the neck.
  int decoder_in_channels() const {
    return fusion == Fusion::concat ? 2 * backbone.width : backbone.width;
  }

  void validate() const {
    backbone.validate();
    (void)grid_side();
    if (num_classes < 2) throw std::invalid_argument("AssemblyConfig: num_classes < 2");
    if ((fusion == Fusion::none) != (head == HeadKind::linear_classifier)) {
      throw std::invalid_argument(
          "AssemblyConfig: fusion must be 'none' exactly for the linear classifier");
    }
    if (head == HeadKind::linear_classifier) {
      if (!tap_layers.empty()) {
        throw std::invalid_argument("AssemblyConfig: linear classifier takes no taps");
      }
      if (pooling == Pooling::cls_token && !backbone.uses_cls_token) {
        throw std::invalid_argument(
            "AssemblyConfig: cls_token pooling requested on a backbone without one");
      }
      return;
    }
    if (static_cast<int>(tap_layers.size()) != kPyramidLevels) {
      throw std::invalid_argument("AssemblyConfig: pyramid decoder needs exactly 4 taps");
    }
    for (std::size_t i = 0; i < tap_layers.size(); ++i) {
      const int t = tap_layers[i];
      if (t < 1 || t > backbone.depth) {
        throw std::invalid_argument("AssemblyConfig: tap layer " + std::to_string(t) +
                                    " out of range 1.." + std::to_string(backbone.depth));
      }
      if (i > 0 && t <= tap_layers[i - 1]) {
        throw std::invalid_argument("AssemblyConfig: tap layers must be increasing");
      }
    }
    if (grid_side() % 4 != 0) {
      throw std::invalid_argument("AssemblyConfig: token grid side must be divisible by 4");
    }
    if (neck_channels <= 0 || decoder_channels <= 0) {
      throw std::invalid_argument("AssemblyConfig: channel widths must be positive");
    }
  }
};

inline AssemblyConfig classifier_config(BackboneSpec backbone, Pooling pooling,
                                        int num_classes, int image_side) {
  AssemblyConfig c;
  c.backbone = backbone;
  c.image_side = image_side;
  c.head = HeadKind::linear_classifier;
  c.fusion = Fusion::none;
  c.pooling = pooling;
  c.num_classes = num_classes;
  c.validate();
  return c;
}

inline AssemblyConfig change_detector_config(BackboneSpec backbone, Fusion fusion,
                                             std::vector<int> tap_layers, int image_side) {
  if (fusion == Fusion::none) {
    throw std::invalid_argument("change detector fusion must be subtract or concat");
  }
  AssemblyConfig c;
  c.backbone = backbone;
  c.image_side = image_side;
  c.head = HeadKind::pyramid_mask_decoder;
  c.fusion = fusion;
  c.pooling = Pooling::global_average;
  c.tap_layers = std::move(tap_layers);
  c.num_classes = 2;
  c.validate();
  return c;
}

/// Spatial sides of the four pyramid levels for a token grid of side g.
inline std::vector<int> pyramid_sides(int grid) { return {2 * grid, grid, grid / 2, grid / 4}; }

/// Neck + pyramid decoder cost for fused taps of `in_channels` channels.
inline double mask_decoder_gflops(int grid, int in_channels, int neck_channels,
                                  int decoder_channels, int num_classes) {
  const auto sides = pyramid_sides(grid);
  double neck = 0.0;
  for (int level = 0; level < kPyramidLevels; ++level) {
    neck += conv2d_flops(grid, grid, in_channels, neck_channels, 1);
  }
  neck += transposed_conv2d_flops(grid, grid, neck_channels, neck_channels, 2);

  double decoder = 0.0;
  for (int s : sides) {
    decoder += conv2d_flops(s, s, neck_channels, decoder_channels, 1);
    decoder += conv2d_flops(s, s, decoder_channels, decoder_channels, 3);
  }
  decoder += conv2d_flops(sides[0], sides[0], kPyramidLevels * decoder_channels,
                          decoder_channels, 3);
  decoder += conv2d_flops(sides[0], sides[0], decoder_channels, num_classes, 1);
  return (neck + decoder) / 1e9;
}

inline double neck_gflops(int grid, int in_channels, int neck_channels) {
  double neck = kPyramidLevels * conv2d_flops(grid, grid, in_channels, neck_channels, 1);
  neck += transposed_conv2d_flops(grid, grid, neck_channels, neck_channels, 2);
  return neck / 1e9;
}

/// Cost breakdown of a full forward pass. A change detector runs the shared
/// backbone once per image, so it appears twice.
inline std::vector<ComponentCost> assembly_costs(const AssemblyConfig& c) {
  c.validate();
  const double backbone = vit_forward_flops(c.backbone, c.image_side);
  std::vector<ComponentCost> costs;
  if (c.head == HeadKind::linear_classifier) {
    costs.push_back(ComponentCost::analytic("backbone", backbone));
    costs.push_back(ComponentCost::analytic(
        "linear_head", linear_flops(1, c.backbone.width, c.num_classes) / 1e9));
    return costs;
  }
  const int g = c.grid_side();
  const double neck = neck_gflops(g, c.decoder_in_channels(), c.neck_channels);
  const double total_head = mask_decoder_gflops(g, c.decoder_in_channels(),
                                                c.neck_channels, c.decoder_channels,
                                                c.num_classes);
  costs.push_back(ComponentCost::analytic("backbone[first]", backbone));
  costs.push_back(ComponentCost::analytic("backbone[second]", backbone));
  costs.push_back(ComponentCost::analytic("neck", neck));
  costs.push_back(ComponentCost::analytic("decoder", total_head - neck));
  return costs;
}

inline Task task_of(const AssemblyConfig& c) {
  return c.head == HeadKind::linear_classifier ? Task::classification
                                               : Task::change_detection;
}

inline FlopsReport gate(const AssemblyConfig& c) {
  const auto costs = assembly_costs(c);
  return gate(costs, task_of(c));
}

}  // namespace scalebench
