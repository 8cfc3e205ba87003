#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scalebench {

enum class ScheduleKind { warmup_cosine, warmup_linear, multistep };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::warmup_cosine: return "warmup_cosine";
    case ScheduleKind::warmup_linear: return "warmup_linear";
    case ScheduleKind::multistep: return "multistep";
  }
  return "warmup_cosine";
}

inline ScheduleKind parse_schedule(std::string_view s) {
  if (s == "warmup_cosine") return ScheduleKind::warmup_cosine;
  if (s == "warmup_linear") return ScheduleKind::warmup_linear;
  if (s == "multistep") return ScheduleKind::multistep;
  throw std::invalid_argument("unknown schedule '" + std::string(s) + "'");
}

/// Step-indexed learning rate. Warmup ramps linearly from peak/warmup to
/// peak; the decay phase then reaches min_lr at the last step. Multistep
/// milestones are counted in steps and clamp at min_lr.
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::warmup_cosine;
  double peak = 1e-4;
  double min = 1e-5;
  long long warmup_steps = 0;
  long long total_steps = 1;
  std::vector<long long> milestones;
  double gamma = 0.1;

  void validate() const {
    if (!(peak > min) || min < 0.0) {
      throw std::invalid_argument("LrSchedule: need peak > min >= 0");
    }
    if (total_steps <= 0 || warmup_steps < 0) {
      throw std::invalid_argument("LrSchedule: invalid step counts");
    }
  }

  double at(long long step) const {
    if (kind == ScheduleKind::multistep) {
      double lr = peak;
      for (auto m : milestones) {
        if (step >= m) lr *= gamma;
      }
      return std::max(lr, min);
    }
    if (step < warmup_steps) {
      return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    }
    const long long decay_steps = std::max<long long>(1, total_steps - warmup_steps - 1);
    const double progress =
        std::clamp(static_cast<double>(step - warmup_steps) / decay_steps, 0.0, 1.0);
    if (kind == ScheduleKind::warmup_linear) return peak + (min - peak) * progress;
    return min + 0.5 * (peak - min) * (1.0 + std::cos(std::numbers::pi * progress));
  }
};

/// Teacher momentum annealed from `base` to `final` along a half cosine.
struct EmaSchedule {
  double base = 0.996;
  double final = 1.0;

  void validate() const {
    if (base < 0.0 || base > 1.0 || final < 0.0 || final > 1.0) {
      throw std::invalid_argument("EmaSchedule: momentum must lie in [0,1]");
    }
  }

  double at(long long step, long long total_steps) const {
    if (total_steps <= 1) return base;
    const double progress =
        std::clamp(static_cast<double>(step) / (total_steps - 1), 0.0, 1.0);
    return final - (final - base) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }
};

}  // namespace scalebench
