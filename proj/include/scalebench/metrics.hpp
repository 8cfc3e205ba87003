#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "scalebench/image.hpp"

namespace scalebench {

/// Percentage of positions where prediction and label agree.
inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy: length mismatch");
  }
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    correct += predictions[i] == labels[i] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw std::invalid_argument("confusion: mask shape mismatch");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.bits.size(); ++i) {
    const bool p = pred.bits[i] != 0;
    const bool g = gt.bits[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// F1 in percent; a perfect empty prediction (no positives anywhere) is 100.
inline double f1_score(const ConfusionCounts& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  if (denom == 0.0) return 100.0;
  return 100.0 * 2.0 * c.tp / denom;
}

/// F1 of the confusion counts pooled over every pixel of every image.
inline double micro_f1(std::span<const BinaryMask> predictions,
                       std::span<const BinaryMask> ground_truth) {
  if (predictions.size() != ground_truth.size()) {
    throw std::invalid_argument("micro_f1: mask count mismatch");
  }
  ConfusionCounts pooled;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    pooled += confusion(predictions[i], ground_truth[i]);
  }
  return f1_score(pooled);
}

struct CurvePoint {
  double scale;  // 1/k
  double score;  // percent
};

/// Score as a function of the inverse degradation factor; x strictly
/// increasing and ending at 1.
class RobustnessCurve {
 public:
  explicit RobustnessCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
    if (points_.size() < 2) {
      throw std::invalid_argument("RobustnessCurve: need at least two points");
    }
    for (std::size_t i = 1; i < points_.size(); ++i) {
      if (!(points_[i].scale > points_[i - 1].scale)) {
        throw std::invalid_argument("RobustnessCurve: x must be strictly increasing");
      }
    }
    if (points_.front().scale <= 0.0 || points_.back().scale != 1.0) {
      throw std::invalid_argument("RobustnessCurve: x must lie in (0,1] and end at 1");
    }
  }

  /// Builds the curve from per-factor scores; x = 1/k.
  static RobustnessCurve from_factors(std::span<const int> factors,
                                      std::span<const double> scores) {
    if (factors.size() != scores.size()) {
      throw std::invalid_argument("RobustnessCurve: factor/score length mismatch");
    }
    std::vector<CurvePoint> pts;
    pts.reserve(factors.size());
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (factors[i] < 1) throw std::invalid_argument("RobustnessCurve: factor < 1");
      pts.push_back({1.0 / factors[i], scores[i]});
    }
    std::sort(pts.begin(), pts.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.scale < b.scale; });
    return RobustnessCurve(std::move(pts));
  }

  const std::vector<CurvePoint>& points() const noexcept { return points_; }

 private:
  std::vector<CurvePoint> points_;
};

/// Unnormalized trapezoidal area under the curve.
inline double auc(const RobustnessCurve& curve) {
  const auto& p = curve.points();
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    area += (p[i + 1].scale - p[i].scale) * (p[i].score + p[i + 1].score) / 2.0;
  }
  return area;
}

}  // namespace scalebench
