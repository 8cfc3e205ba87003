#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "scalebench/config_io.hpp"
#include "scalebench/errors.hpp"

using namespace scalebench;

namespace {

std::string error_of(const json& j) {
  try {
    experiment_from_json(j, default_experiment(Task::change_detection));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ConfigIo, UnknownKeysAreReportedWithTheirPath) {
  EXPECT_NE(error_of({{"train", {{"epochz", 3}}}}).find("config.train.epochz"), std::string::npos);
  EXPECT_NE(error_of({{"data", {{"synthetic_cd", {{"sides", 3}}}}}}).find("config.data.synthetic_cd.sides"),
            std::string::npos);
  EXPECT_NE(error_of({{"bogus", true}}).find("config.bogus"), std::string::npos);
}

TEST(ConfigIo, WrongTypesAndValuesAreRejected) {
  EXPECT_NE(error_of({{"train", {{"epochs", "many"}}}}).find("config.train.epochs"), std::string::npos);
  EXPECT_FALSE(error_of({{"train", {{"epochs", 0}}}}).empty());
  EXPECT_FALSE(error_of({{"eval", {{"factors", {2, 4}}}}}).empty());
  EXPECT_FALSE(error_of({{"task", "segmentation"}}).empty());
}

TEST(ConfigIo, OverlaysOnlyTheGivenKeys) {
  const auto base = default_experiment(Task::change_detection);
  const auto c = experiment_from_json({{"seed", 7}, {"train", {{"epochs", 3}}}}, base);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.pretrain.seed, 7u);
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.train.batch_size, base.train.batch_size);
  EXPECT_EQ(c.model.tap_layers, base.model.tap_layers);
}

TEST(ConfigIo, RoundTripsThroughJson) {
  for (auto task : {Task::classification, Task::change_detection}) {
    auto c = default_experiment(task);
    c.seed = 3;
    c.train.scale_aug = true;
    c.train.freeze_backbone = true;
    const auto j = to_json(c);
    const auto back = experiment_from_json(j, default_experiment(Task::change_detection));
    EXPECT_EQ(to_json(back), j);
  }
}

TEST(ConfigIo, LoadsFilesUsingTheTaskDefaults) {
  const auto path = std::filesystem::temp_directory_path() / "scalebench_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"task": "classification", "train": {"epochs": 2}})";
  }
  const auto c = load_experiment_config(path);
  EXPECT_EQ(c.task, Task::classification);
  EXPECT_EQ(c.model.head, HeadKind::linear_classifier);
  EXPECT_EQ(c.train.epochs, 2);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_experiment_config(path), ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(ConfigIo, AssemblyHeadersRoundTrip) {
  const auto c = default_experiment(Task::change_detection).model;
  EXPECT_EQ(to_json(assembly_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(assembly_from_json({{"extra", 1}}), ConfigError);
}

TEST(ConfigIo, FactorLists) {
  EXPECT_EQ(parse_factor_list("1,2,4,8"), (std::vector<int>{1, 2, 4, 8}));
  EXPECT_THROW(parse_factor_list("1,x"), ConfigError);
  EXPECT_THROW(parse_factor_list("2,1"), ConfigError);
}
