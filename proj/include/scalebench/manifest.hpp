#pragma once

// Run manifests: one JSON file per run, never rewritten. The "results"
// object holds everything that must reproduce bit-for-bit for a fixed
// config, seed and dataset; run id, timestamps, timings and paths live
// outside it.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scalebench/dataset_io.hpp"
#include "scalebench/evaluation.hpp"

namespace scalebench {

struct RunManifest {
  std::string run_id;
  std::string command;  // pretrain, finetune, evaluate, ...
  std::string timestamp;
  double wall_clock_seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::optional<DatasetFingerprint> dataset;
  std::optional<RobustnessReport> robustness;
  nlohmann::json extra_results = nlohmann::json::object();  // e.g. final losses, FLOPs
  nlohmann::json artifacts = nlohmann::json::object();      // name -> path

  /// Deterministic part of the manifest.
  nlohmann::json results() const;
  nlohmann::json to_json() const;
};

/// Creates a fresh directory `out/<command>-<timestamp>-<n>` and returns its id.
std::string allocate_run_dir(const std::filesystem::path& out, const std::string& command,
                             std::filesystem::path& run_dir);

std::string utc_timestamp();

/// Writes manifest.json; throws if the file already exists.
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
nlohmann::json read_manifest(const std::filesystem::path& path);

/// "factor,scale,score" rows, one per degradation factor.
void write_scores_csv(const std::filesystem::path& path, const RobustnessReport& report);

/// Per-scale score rows plus AUC as stored in a manifest, unparsed.
struct ReportRow {
  std::string run_id;
  std::vector<std::pair<int, std::string>> scores;  // factor -> verbatim number text
  std::string auc;
};

ReportRow report_row(const nlohmann::json& manifest);
/// Markdown table with columns 1:1, 1:2, 1:4, 1:8 (or the union of factors
/// present) and AUC.
std::string render_report(const std::vector<ReportRow>& rows);

/// Score-vs-scale line plot, one curve per entry, written as PNG.
struct PlotSeries {
  std::string label;
  std::vector<ScaleScore> points;
};
void write_curve_plot(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PlotSeries>& series, const std::string& y_label);

}  // namespace scalebench
