#pragma once

// Deterministic synthetic datasets standing in for real benchmarks at desk
// scale: bitemporal "building" scenes with pixel-exact change masks, and
// texture classes whose identity lives in high spatial frequencies.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scalebench/image.hpp"

namespace scalebench {

struct Shape {
  enum class Kind { rectangle, ellipse };
  Kind kind = Kind::rectangle;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  std::array<float, 3> color{};

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Pixels covered by any of `shapes` (rectangle: half-open box; ellipse:
/// pixel centers inside the inscribed ellipse).
BinaryMask rasterize_shapes(std::span<const Shape> shapes, int side);

struct SyntheticCdParams {
  int side = 64;
  int shapes_min = 2;
  int shapes_max = 6;
  int edits_min = 1;
  int edits_max = 3;
  int size_min = 6;
  int size_max = 16;
  float photometric_jitter = 0.04f;
  float noise = 0.02f;
  float texture = 0.15f;  // amplitude of the ground grain shared by both images
};

struct SyntheticPair {
  BitemporalSample sample;
  std::vector<Shape> shapes_first;
  std::vector<Shape> shapes_second;
};

/// Pairs whose change mask is the symmetric difference of the two shape
/// rasters. Identical (params, seed) give identical output.
std::vector<SyntheticPair> make_synthetic_cd_pairs(int n_pairs, const SyntheticCdParams& params,
                                                   std::uint64_t seed);

std::vector<BitemporalSample> make_synthetic_cd_fixture(int n_pairs, int side, std::uint64_t seed);

struct SyntheticClsParams {
  int side = 64;
  int num_classes = 4;
  float noise = 0.03f;
};

/// `per_class` images of each texture class, interleaved by class.
std::vector<ClassificationSample> make_synthetic_classification_fixture(
    int per_class, const SyntheticClsParams& params, std::uint64_t seed);

/// Human-readable texture class names, index = class id.
std::vector<std::string> synthetic_class_names(int num_classes);

}  // namespace scalebench
