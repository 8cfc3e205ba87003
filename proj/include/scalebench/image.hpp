#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace scalebench {

/// Interleaved float image, row-major HWC, values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || c <= 0) {
      throw std::invalid_argument("Image: dimensions must be positive");
    }
    pixels.assign(static_cast<std::size_t>(h) * w * c, fill);
  }

  bool empty() const noexcept { return pixels.empty(); }
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
  float at(int y, int x, int c) const { return pixels[index(y, x, c)]; }

  bool same_shape(const Image& other) const noexcept {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Per-pixel binary label map (change masks, overlap targets).
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0) : height(h), width(w) {
    if (h <= 0 || w <= 0) {
      throw std::invalid_argument("BinaryMask: dimensions must be positive");
    }
    bits.assign(static_cast<std::size_t>(h) * w, fill ? 1 : 0);
  }

  std::uint8_t& at(int y, int x) {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct ClassificationSample {
  Image image;
  int label = 0;
};

/// Two co-registered acquisitions of one place and their change annotation.
struct BitemporalSample {
  Image first;
  Image second;
  BinaryMask change_mask;
};

inline bool bitwise_equal(const Image& a, const Image& b) {
  return a.same_shape(b) &&
         std::memcmp(a.pixels.data(), b.pixels.data(),
                     a.pixels.size() * sizeof(float)) == 0;
}

inline void validate(const BitemporalSample& s) {
  if (!s.first.same_shape(s.second)) {
    throw std::invalid_argument("bitemporal sample: image shapes differ");
  }
  if (s.change_mask.height != s.first.height ||
      s.change_mask.width != s.first.width) {
    throw std::invalid_argument("bitemporal sample: mask shape mismatch");
  }
  for (auto b : s.change_mask.bits) {
    if (b > 1) throw std::invalid_argument("bitemporal sample: mask not binary");
  }
}

}  // namespace scalebench
