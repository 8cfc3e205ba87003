#pragma once

// The robustness protocol: score a model on every degradation factor and
// integrate the resulting curve.

#include <algorithm>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "scalebench/flops.hpp"
#include "scalebench/metrics.hpp"
#include "scalebench/scale_distortion.hpp"

namespace scalebench {

using ClassifierFn =
    std::function<std::vector<int>(std::span<const ClassificationSample>)>;
using ChangeDetectorFn =
    std::function<std::vector<BinaryMask>(std::span<const BitemporalSample>)>;

struct ScaleScore {
  int factor;
  double score;
};

struct RobustnessReport {
  std::vector<ScaleScore> per_scale;
  RobustnessCurve curve;
  double auc;
};

namespace detail {

inline RobustnessReport assemble_report(const DistortionSpec& spec,
                                        std::vector<double> scores) {
  std::vector<ScaleScore> per_scale;
  for (std::size_t i = 0; i < spec.factors.size(); ++i) {
    per_scale.push_back({spec.factors[i], scores[i]});
  }
  auto curve = RobustnessCurve::from_factors(spec.factors, scores);
  const double area = auc(curve);
  return {std::move(per_scale), std::move(curve), area};
}

template <class Sample>
std::vector<Sample> degrade_range(std::span<const Sample> samples, std::size_t begin,
                                  std::size_t end, int k, const DistortionSpec& spec) {
  std::vector<Sample> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(distort_sample(samples[i], k, spec.target, spec.interpolation));
  }
  return out;
}

}  // namespace detail

/// Accuracy per factor. Refuses to run when the assembly failed its gate.
inline RobustnessReport evaluate_classifier(const ClassifierFn& model,
                                            std::span<const ClassificationSample> data,
                                            const DistortionSpec& spec,
                                            const FlopsReport& flops,
                                            std::size_t batch_size = 64) {
  require_passed(flops);
  spec.validate();
  if (data.empty()) throw std::invalid_argument("evaluate_classifier: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("evaluate_classifier: batch_size 0");

  std::vector<int> labels;
  for (const auto& s : data) labels.push_back(s.label);

  std::vector<double> scores;
  for (int k : spec.factors) {
    std::vector<int> predictions;
    predictions.reserve(data.size());
    for (std::size_t b = 0; b < data.size(); b += batch_size) {
      const auto e = std::min(data.size(), b + batch_size);
      const auto batch = detail::degrade_range(data, b, e, k, spec);
      const auto out = model(batch);
      if (out.size() != batch.size()) {
        throw std::runtime_error("classifier returned wrong number of predictions");
      }
      predictions.insert(predictions.end(), out.begin(), out.end());
    }
    scores.push_back(accuracy(predictions, labels));
  }
  return detail::assemble_report(spec, std::move(scores));
}

/// Micro-F1 per factor over change masks.
inline RobustnessReport evaluate_change_detector(const ChangeDetectorFn& model,
                                                 std::span<const BitemporalSample> data,
                                                 const DistortionSpec& spec,
                                                 const FlopsReport& flops,
                                                 std::size_t batch_size = 16) {
  require_passed(flops);
  spec.validate();
  if (data.empty()) throw std::invalid_argument("evaluate_change_detector: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("evaluate_change_detector: batch_size 0");

  std::vector<double> scores;
  for (int k : spec.factors) {
    ConfusionCounts pooled;
    for (std::size_t b = 0; b < data.size(); b += batch_size) {
      const auto e = std::min(data.size(), b + batch_size);
      const auto batch = detail::degrade_range(data, b, e, k, spec);
      const auto masks = model(batch);
      if (masks.size() != batch.size()) {
        throw std::runtime_error("change detector returned wrong number of masks");
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        pooled += confusion(masks[i], batch[i].change_mask);
      }
    }
    scores.push_back(f1_score(pooled));
  }
  return detail::assemble_report(spec, std::move(scores));
}

/// Predicts the ground truth; the upper bound of the protocol.
inline ClassifierFn oracle_classifier() {
  return [](std::span<const ClassificationSample> batch) {
    std::vector<int> out;
    for (const auto& s : batch) out.push_back(s.label);
    return out;
  };
}

inline ChangeDetectorFn oracle_change_detector() {
  return [](std::span<const BitemporalSample> batch) {
    std::vector<BinaryMask> out;
    for (const auto& s : batch) out.push_back(s.change_mask);
    return out;
  };
}

}  // namespace scalebench
