#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scalebench/cli.hpp"
#include "scalebench/dataset_io.hpp"
#include "scalebench/manifest.hpp"

using namespace scalebench;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "scalebench_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

std::vector<fs::path> manifests_in(const fs::path& out) {
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(out)) {
    if (fs::exists(e.path() / "manifest.json")) found.push_back(e.path() / "manifest.json");
  }
  std::sort(found.begin(), found.end());
  return found;
}

std::string line_count_text(const fs::path& p) {
  std::ifstream in(p);
  std::string all, line;
  while (std::getline(in, line)) all += line + "\n";
  return all;
}

}  // namespace

TEST(Cli, OracleEvaluationWritesScoresAndManifest) {
  const auto dir = fresh_dir("oracle");
  const auto config = write_config(dir, {{"data", {{"eval_items", 6}}}});
  const auto r = cli({"evaluate", "--model", "oracle", "--config", config.string(), "--out", (dir / "runs").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("AUC  87.50"), std::string::npos) << r.out;

  const auto found = manifests_in(dir / "runs");
  ASSERT_EQ(found.size(), 1u);
  const auto run = found[0].parent_path();
  const auto csv = line_count_text(run / "scores.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(run / "curve.png"));
  const auto m = read_manifest(found[0]);
  EXPECT_EQ(m["results"]["auc_display"], "87.50");
  EXPECT_EQ(m["results"]["per_scale"].size(), 4u);
}

TEST(Cli, EveryRunGetsAFreshDirectory) {
  const auto dir = fresh_dir("fresh");
  const auto config = write_config(dir, {{"data", {{"eval_items", 2}}}});
  for (int i = 0; i < 2; ++i) {
    ASSERT_EQ(cli({"evaluate", "--model", "oracle", "--config", config.string(), "--out", (dir / "runs").string()}).code, 0);
  }
  const auto found = manifests_in(dir / "runs");
  ASSERT_EQ(found.size(), 2u);
  EXPECT_NE(read_manifest(found[0])["run_id"], read_manifest(found[1])["run_id"]);
  EXPECT_EQ(read_manifest(found[0])["results"], read_manifest(found[1])["results"]);
}

TEST(Cli, ReportCopiesManifestNumbersVerbatim) {
  const auto dir = fresh_dir("report");
  const auto config = write_config(dir, {{"data", {{"eval_items", 2}}}});
  ASSERT_EQ(cli({"evaluate", "--model", "oracle", "--config", config.string(), "--out", (dir / "runs").string()}).code, 0);
  const auto manifest = manifests_in(dir / "runs").at(0);
  const auto r = cli({"report", manifest.string(), "--out", (dir / "table.md").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_manifest(manifest);
  for (const auto& row : m["results"]["per_scale"]) {
    EXPECT_NE(r.out.find(row["display"].get<std::string>()), std::string::npos);
  }
  EXPECT_NE(r.out.find("| 1:8 |"), std::string::npos);
  EXPECT_EQ(line_count_text(dir / "table.md"), r.out);
}

TEST(Cli, FlopsPresetAndGate) {
  const auto ok = cli({"flops", "--preset", "vit-b16", "--side", "256", "--task", "classification", "--json"});
  EXPECT_EQ(ok.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(ok.out)["passed"].get<bool>());
  const auto big = cli({"flops", "--preset", "vit-b16", "--side", "512", "--task", "classification"});
  EXPECT_EQ(big.code, 2);
  EXPECT_NE(big.out.find("total"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitWithOne) {
  const auto dir = fresh_dir("bad");
  const auto config = write_config(dir, {{"train", {{"epochz", 1}}}});
  const auto r = cli({"finetune", "--config", config.string(), "--out", (dir / "runs").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("config.train.epochz"), std::string::npos);
  EXPECT_EQ(cli({"evaluate", "--out", (dir / "runs").string()}).code, 1);
  EXPECT_EQ(cli({"nonsense"}).code, 1);
}

TEST(Cli, GateFailureStopsFinetuneWithTwo) {
  const auto dir = fresh_dir("gate");
  const nlohmann::json big_model = {
      {"model", {{"image_side", 1024}, {"backbone", {{"patch_size", 16}, {"depth", 12}, {"width", 768}, {"heads", 12}}},
                 {"tap_layers", {3, 6, 9, 12}}}}};
  const auto config = write_config(dir, big_model);
  const auto r = cli({"finetune", "--config", config.string(), "--out", (dir / "runs").string()});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_FALSE(fs::exists(dir / "runs") && !fs::is_empty(dir / "runs"));
}

TEST(Cli, SynthWritesLoadableDatasets) {
  const auto dir = fresh_dir("synth");
  ASSERT_EQ(cli({"synth", "--task", "change_detection", "--out", (dir / "cd").string(), "--split", "test", "--count", "3",
                 "--side", "32"}).code, 0);
  EXPECT_EQ(load_bitemporal_dir(dir / "cd", Split::test).items.size(), 3u);
  ASSERT_EQ(cli({"synth", "--task", "classification", "--out", (dir / "cls").string(), "--split", "train",
                 "--count", "2", "--side", "32"}).code, 0);
  const auto m = load_classification_dir(dir / "cls", Split::train);
  EXPECT_EQ(m.items.size(), 2u * m.class_names.size());
}
