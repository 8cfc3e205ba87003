#pragma once

// Crop rectangles in a shared source frame, the affine maps between source
// and crop-output coordinates, and the overlap target mask of the
// pretraining decoder.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "scalebench/image.hpp"

namespace scalebench {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle in source pixels, half-open [x, x+w) x [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const noexcept { return static_cast<long long>(w) * h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Geometry of one crop: its source rectangle, the square output side it is
/// resized to, and whether the output was mirrored horizontally.
class CropBox {
 public:
  CropBox(int x, int y, int w, int h, int out_size, bool hflip = false)
      : x_(x), y_(y), w_(w), h_(h), out_size_(out_size), hflip_(hflip) {
    if (w <= 0 || h <= 0) {
      throw std::invalid_argument("CropBox: width and height must be positive");
    }
    if (out_size <= 0) {
      throw std::invalid_argument("CropBox: out_size must be positive");
    }
  }

  int x() const noexcept { return x_; }
  int y() const noexcept { return y_; }
  int w() const noexcept { return w_; }
  int h() const noexcept { return h_; }
  int out_size() const noexcept { return out_size_; }
  bool hflip() const noexcept { return hflip_; }
  Rect source_rect() const noexcept { return {x_, y_, w_, h_}; }

  friend bool operator==(const CropBox&, const CropBox&) = default;

 private:
  int x_, y_, w_, h_;
  int out_size_;
  bool hflip_;
};

/// Intersection of the two source rectangles. Touching boxes (zero-area
/// intersection) yield nullopt.
inline std::optional<Rect> overlap_rect(const CropBox& a, const CropBox& b) {
  const int left = std::max(a.x(), b.x());
  const int top = std::max(a.y(), b.y());
  const int right = std::min(a.x() + a.w(), b.x() + b.w());
  const int bottom = std::min(a.y() + a.h(), b.y() + b.h());
  if (right <= left || bottom <= top) return std::nullopt;
  return Rect{left, top, right - left, bottom - top};
}

/// Source frame -> output frame of `c`. The flip is applied after scaling.
inline Point map_point_to_crop(Point p, const CropBox& c) {
  const double s = static_cast<double>(c.out_size());
  double u = (p.x - c.x()) * s / c.w();
  const double v = (p.y - c.y()) * s / c.h();
  if (c.hflip()) u = s - u;
  return {u, v};
}

/// Inverse of map_point_to_crop.
inline Point map_point_from_crop(Point q, const CropBox& c) {
  const double s = static_cast<double>(c.out_size());
  const double u = c.hflip() ? s - q.x : q.x;
  return {c.x() + u * c.w() / s, c.y() + q.y * c.h() / s};
}

/// Output-frame point of crop `from` expressed in the output frame of `to`.
inline Point map_between_crops(Point q, const CropBox& from, const CropBox& to) {
  return map_point_to_crop(map_point_from_crop(q, from), to);
}

/// Binary mask in the output frame of the first crop marking the pixels whose
/// centers fall strictly inside the second crop's source rectangle.
struct OverlapMask {
  BinaryMask grid;
  double coverage_fraction = 0.0;

  int side() const noexcept { return grid.height; }
};

/// Rasterizes the overlap target. The region is separable (axis-aligned
/// boxes), so inclusion is decided per output column and per output row and
/// combined as an outer product.
inline OverlapMask rasterize_overlap_mask(const CropBox& c1, const CropBox& c2) {
  const int n = c1.out_size();
  std::vector<std::uint8_t> col_in(n), row_in(n);
  const double x_lo = c2.x(), x_hi = c2.x() + c2.w();
  const double y_lo = c2.y(), y_hi = c2.y() + c2.h();
  for (int j = 0; j < n; ++j) {
    const double sx = map_point_from_crop({j + 0.5, 0.0}, c1).x;
    col_in[j] = (sx > x_lo && sx < x_hi) ? 1 : 0;
  }
  for (int i = 0; i < n; ++i) {
    const double sy = map_point_from_crop({0.0, i + 0.5}, c1).y;
    row_in[i] = (sy > y_lo && sy < y_hi) ? 1 : 0;
  }

  OverlapMask mask{BinaryMask(n, n), 0.0};
  long long ones = 0;
  for (int i = 0; i < n; ++i) {
    if (!row_in[i]) continue;
    for (int j = 0; j < n; ++j) {
      mask.grid.at(i, j) = col_in[j];
      ones += col_in[j];
    }
  }
  mask.coverage_fraction =
      static_cast<double>(ones) / (static_cast<double>(n) * n);
  return mask;
}

}  // namespace scalebench
