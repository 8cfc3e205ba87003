#include "scalebench/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "scalebench/errors.hpp"

namespace fs = std::filesystem;

namespace scalebench {

namespace {

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

nlohmann::json RunManifest::results() const {
  nlohmann::json r = nlohmann::json::object();
  r["command"] = command;
  r["seed"] = seed;
  r["config"] = config;
  if (dataset) r["dataset"] = {{"items", dataset->items}, {"content_hash", dataset->hex()}};
  if (robustness) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : robustness->per_scale) {
      rows.push_back({{"factor", s.factor},
                      {"scale", "1:" + std::to_string(s.factor)},
                      {"score", s.score},
                      {"display", two_decimals(s.score)}});
    }
    r["per_scale"] = std::move(rows);
    r["auc"] = robustness->auc;
    r["auc_display"] = two_decimals(robustness->auc);
  }
  for (const auto& [k, v] : extra_results.items()) r[k] = v;
  return r;
}

nlohmann::json RunManifest::to_json() const {
  return {{"run_id", run_id},
          {"timestamp", timestamp},
          {"wall_clock_seconds", wall_clock_seconds},
          {"artifacts", artifacts},
          {"results", results()}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string allocate_run_dir(const fs::path& out, const std::string& command, fs::path& run_dir) {
  fs::create_directories(out);
  const std::string stamp = utc_timestamp();
  for (int n = 0;; ++n) {
    const std::string id = command + "-" + stamp + "-" + std::to_string(n);
    const fs::path candidate = out / id;
    // create_directory reports false when the directory already exists,
    // which makes allocation race-free between processes.
    if (fs::create_directory(candidate)) {
      run_dir = candidate;
      return id;
    }
  }
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  if (fs::exists(path)) throw std::runtime_error("refusing to overwrite manifest " + path.string());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << m.to_json().dump(2) << '\n';
}

nlohmann::json read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

void write_scores_csv(const fs::path& path, const RobustnessReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "factor,scale,score\n";
  char buf[64];
  for (const auto& s : report.per_scale) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", s.factor, 1.0 / s.factor, s.score);
    out << buf;
  }
}

ReportRow report_row(const nlohmann::json& manifest) {
  try {
    const auto& r = manifest.at("results");
    ReportRow row;
    row.run_id = manifest.at("run_id").get<std::string>();
    for (const auto& s : r.at("per_scale")) {
      row.scores.emplace_back(s.at("factor").get<int>(), s.at("display").get<std::string>());
    }
    row.auc = r.at("auc_display").get<std::string>();
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest has no robustness results: ") + e.what());
  }
}

std::string render_report(const std::vector<ReportRow>& rows) {
  std::set<int> factors{1, 2, 4, 8};
  for (const auto& row : rows) {
    for (const auto& [k, _] : row.scores) factors.insert(k);
  }
  std::ostringstream out;
  out << "| run |";
  for (int k : factors) out << " 1:" << k << " |";
  out << " AUC |\n|---|";
  for (std::size_t i = 0; i < factors.size(); ++i) out << "---|";
  out << "---|\n";
  for (const auto& row : rows) {
    std::map<int, std::string> by_factor(row.scores.begin(), row.scores.end());
    out << "| " << row.run_id << " |";
    for (int k : factors) {
      auto it = by_factor.find(k);
      out << ' ' << (it == by_factor.end() ? "-" : it->second) << " |";
    }
    out << ' ' << row.auc << " |\n";
  }
  return out.str();
}

}  // namespace scalebench
