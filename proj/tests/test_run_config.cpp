// Copyright 2026 The FHA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <numbers>

#include "doctest.h"
#include "error.hpp"
#include "json.hpp"
#include "run_config.hpp"
#include "test_util.hpp"

namespace fha {
namespace {

using testing::CodeOf;

ErrorCode ConfigCode(const std::string& text) {
  return CodeOf([&] { ParseRunConfig(text); });
}

TEST_CASE("angles accept degrees and radians") {
  CHECK(ParseAngleDegrees("40") == 40.0);
  CHECK(ParseAngleDegrees("40deg") == 40.0);
  CHECK(ParseAngleDegrees("-15.5deg") == -15.5);
  CHECK(ParseAngleDegrees("0.7rad") == doctest::Approx(0.7 * 180.0 / std::numbers::pi).epsilon(1e-14));
  for (const char* bad : {"40grad", "forty", "", "40 deg", "nan", "inf"}) {
    CHECK(CodeOf([&] { ParseAngleDegrees(bad); }) == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("a minimal config takes the reference defaults") {
  const auto cfg = ParseRunConfig(R"({"task": "rot40"})");
  CHECK(cfg.task_name == "rot40");
  REQUIRE(cfg.task.has_value());
  CHECK(cfg.task->rotation_deg == 40.0);
  CHECK(cfg.methods.size() == 7);
  CHECK(cfg.shots == std::vector<std::size_t>{1});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0});
  CHECK(cfg.experiment.jobs == 1);
  CHECK(cfg.experiment.tohan.lambda == 0.2);
  CHECK(cfg.experiment.tohan.total_epochs == 500);
  CHECK(cfg.experiment.tohan.pretrain_epochs == 100);
  CHECK(cfg.experiment.tohan.adapt_epochs == 50);
  CHECK(cfg.experiment.source.min_accuracy == 0.8);
  CHECK(cfg.results_path.empty());
  CHECK_FALSE(cfg.data.has_value());
}

TEST_CASE("every block overrides its fields") {
  const auto cfg = ParseRunConfig(R"({
    "task": {"preset": "rot40", "rotation": "0.5rad", "seed": 7, "target_per_class": 12},
    "methods": ["tohan", "st+f"], "shots": [1, 3, 7], "seeds": [3, 4], "jobs": 2,
    "source": {"epochs": 5, "min_accuracy": 0.0},
    "tohan": {"lr": 0.01, "lr_target": 0.002, "total_epochs": 30, "pretrain_epochs": 4, "adapt_epochs": 5},
    "output": {"results": "out.jsonl"}
  })");
  CHECK(cfg.task->rotation_deg == doctest::Approx(0.5 * 180.0 / std::numbers::pi));
  CHECK(cfg.task->seed == 7);
  CHECK(cfg.task->target_per_class == 12);
  CHECK(cfg.methods == std::vector<Method>{Method::kTohan, Method::kStFada});
  CHECK(cfg.shots == std::vector<std::size_t>{1, 3, 7});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.experiment.jobs == 2);
  CHECK(cfg.experiment.source.epochs == 5);
  CHECK(cfg.experiment.tohan.lr_generator == 0.01);
  CHECK(cfg.experiment.tohan.lr_discriminator == 0.01);
  CHECK(cfg.experiment.tohan.lr_target == 0.002);
  CHECK(cfg.experiment.tohan.total_epochs == 30);
  CHECK(cfg.results_path == "out.jsonl");
}

TEST_CASE("unknown fields are rejected at every level") {
  CHECK(ConfigCode(R"({"task": "rot40", "extra": 1})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": {"preset": "rot40", "colour": 1}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "tohan": {"lamda": 0.1}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "source": {"epoch": 3}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "output": {"trace": "t"}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"data": {"source": "a", "target": "b", "target_test": "c", "x": 1}})") ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("range and schema violations are rejected") {
  CHECK(ConfigCode(R"({"task": "rot40", "shots": [0]})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "shots": [8]})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "shots": [1.5]})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "shots": []})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "seeds": [-1]})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "methods": ["magic"]})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "tohan": {"adapt_epochs": 500}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "rot40", "source": {"holdout_fraction": 1.0}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": {"preset": "rot40", "rotation": "3turns"}})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"task": "nonsense"})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode(R"({"seeds": [0]})") == ErrorCode::kInvalidArgument);
  CHECK(ConfigCode("{not json") == ErrorCode::kInvalidArgument);
  try {
    ParseRunConfig(R"({"task": "rot40", "bogus": 1})");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("explicit task specs round trip through JSON") {
  const auto spec = ParseTaskSpec(R"({"name": "mine", "num_classes": 2, "dim": 2,
    "classes": [{"mean": [0.2, 0.2], "std": 0.1}, {"mean": [0.8, 0.8], "covariance": [0.02, 0, 0, 0.02]}],
    "rotation_deg": 30, "translation": [0.1, 0], "source_per_class": 10, "target_per_class": 5,
    "test_per_class": 10, "seed": 3})");
  CHECK(spec.name == "mine");
  CHECK(spec.classes[0].covariance[0] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(spec.classes[0].covariance[1] == 0.0);
  const auto back = ParseTaskSpec(TaskSpecToJson(spec));
  CHECK(back.classes[1].covariance == spec.classes[1].covariance);
  CHECK(back.rotation_deg == 30.0);
  CHECK(back.translation == spec.translation);
  CHECK(MakeSyntheticTask(back).source.Checksum() == MakeSyntheticTask(spec).source.Checksum());
  CHECK(ParseTaskSpec("rot40").rotation_deg == 40.0);
}

TEST_CASE("source blocks parse on their own") {
  CHECK(ParseSourceConfig("").epochs == SourceTrainConfig{}.epochs);
  CHECK(ParseSourceConfig(R"({"epochs": 3})").epochs == 3);
  CHECK(CodeOf([] { ParseSourceConfig(R"({"epochs": 0})"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("data paths resolve against the config directory and load") {
  testing::TempDir dir("cfg");
  const auto task = MakeSyntheticTask(testing::SmallTask());
  SaveDataset(task.source, dir.path() / "s.fhd");
  SaveDataset(task.target, dir.path() / "t.fhd");
  SaveDataset(task.target_test, dir.path() / "tt.fhd");
  const auto cfg = ParseRunConfig(
      R"({"data": {"source": "s.fhd", "target": "t.fhd", "target_test": "tt.fhd", "name": "disk"}})", dir.path());
  CHECK(cfg.task_name == "disk");
  CHECK(cfg.data->source == dir.path() / "s.fhd");
  const auto loaded = LoadTaskData(cfg);
  CHECK(loaded.data.target == task.target);
  CHECK(loaded.name == "disk");

  const auto synth = LoadTaskData(ParseRunConfig(R"({"task": "rot40"})"));
  CHECK(synth.data.source == MakeSyntheticTask(PresetTask("rot40")).source);

  const auto missing = ParseRunConfig(
      R"({"data": {"source": "nope.fhd", "target": "t.fhd", "target_test": "tt.fhd"}})", dir.path());
  CHECK(CodeOf([&] { LoadTaskData(missing); }) == ErrorCode::kIo);
}

}  // namespace
}  // namespace fha
