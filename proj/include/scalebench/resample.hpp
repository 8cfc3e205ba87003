#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scalebench/image.hpp"

namespace scalebench {

enum class Interpolation { bilinear, nearest };

inline std::string_view to_string(Interpolation k) {
  return k == Interpolation::bilinear ? "bilinear" : "nearest";
}

inline Interpolation parse_interpolation(std::string_view s) {
  if (s == "bilinear") return Interpolation::bilinear;
  if (s == "nearest") return Interpolation::nearest;
  throw std::invalid_argument("unknown interpolation '" + std::string(s) + "'");
}

namespace detail {

struct AxisTap {
  int lo;
  int hi;
  float frac;  // weight of `hi`
};

// Half-pixel-center sampling positions, clamped at the borders, no
// antialiasing prefilter.
inline std::vector<AxisTap> bilinear_taps(int in, int out) {
  std::vector<AxisTap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(src);
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, static_cast<float>(src - lo)};
  }
  return taps;
}

inline std::vector<int> nearest_taps(int in, int out) {
  std::vector<int> idx(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    idx[i] = std::min(static_cast<int>(std::floor(i * scale)), in - 1);
  }
  return idx;
}

}  // namespace detail

/// Resizes `src` to out_h x out_w.
inline Image resize(const Image& src, int out_h, int out_w,
                    Interpolation kind = Interpolation::bilinear) {
  if (src.empty()) throw std::invalid_argument("resize: empty image");
  if (out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("resize: output size must be positive");
  }
  Image dst(out_h, out_w, src.channels);
  const int c = src.channels;

  if (kind == Interpolation::nearest) {
    const auto ys = detail::nearest_taps(src.height, out_h);
    const auto xs = detail::nearest_taps(src.width, out_w);
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        for (int ch = 0; ch < c; ++ch) dst.at(y, x, ch) = src.at(ys[y], xs[x], ch);
      }
    }
    return dst;
  }

  const auto ys = detail::bilinear_taps(src.height, out_h);
  const auto xs = detail::bilinear_taps(src.width, out_w);
  for (int y = 0; y < out_h; ++y) {
    const auto& ty = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const auto& tx = xs[x];
      for (int ch = 0; ch < c; ++ch) {
        const float top = src.at(ty.lo, tx.lo, ch) +
                          tx.frac * (src.at(ty.lo, tx.hi, ch) - src.at(ty.lo, tx.lo, ch));
        const float bot = src.at(ty.hi, tx.lo, ch) +
                          tx.frac * (src.at(ty.hi, tx.hi, ch) - src.at(ty.hi, tx.lo, ch));
        dst.at(y, x, ch) = top + ty.frac * (bot - top);
      }
    }
  }
  return dst;
}

/// Pixel rectangle copy, no resampling.
inline Image crop(const Image& src, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > src.width ||
      y + h > src.height) {
    throw std::invalid_argument("crop: rectangle outside image");
  }
  Image dst(h, w, src.channels);
  for (int r = 0; r < h; ++r) {
    const float* from = &src.pixels[src.index(y + r, x, 0)];
    std::copy(from, from + static_cast<std::size_t>(w) * src.channels,
              &dst.pixels[dst.index(r, 0, 0)]);
  }
  return dst;
}

inline Image flip_horizontal(const Image& src) {
  Image dst(src.height, src.width, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int ch = 0; ch < src.channels; ++ch) {
        dst.at(y, src.width - 1 - x, ch) = src.at(y, x, ch);
      }
    }
  }
  return dst;
}

}  // namespace scalebench
