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

// JSON run configuration. Defaults equal the reference hyperparameters;
// unknown fields are rejected.
//
//   {
//     "task": "rot40" | {"preset": "rot40", "seed": 0, "rotation": "40deg"} | {full spec},
//     "data": {"source": "...", "target": "...", "target_test": "..."},   // optional
//     "methods": ["wa", "ft", "shot", "sfada", "tfada", "stfada", "tohan"],
//     "shots": [1, 3, 7],
//     "seeds": [0, 1, 2],
//     "jobs": 1,
//     "source": {"epochs": 60, "batch": 64, "lr": 0.001, "hidden": 32,
//                "holdout_fraction": 0.2, "min_accuracy": 0.8},
//     "tohan": {"lambda": 0.2, "gen_batch": 32, "pair_batch": 64, "lr": 0.001,
//               "total_epochs": 500, "pretrain_epochs": 100, "adapt_epochs": 50, ...},
//     "output": {"results": "results.jsonl"}
//   }

#ifndef FHA_CORE_RUN_CONFIG_HPP_
#define FHA_CORE_RUN_CONFIG_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "harness.hpp"

namespace fha {

// "40", "40deg", "0.7rad" -> degrees. kInvalidArgument on a bad unit.
double ParseAngleDegrees(std::string_view text);

// A preset name string or an object (preset + overrides, or a full spec).
TaskSpec ParseTaskSpec(std::string_view json_text);
std::string TaskSpecToJson(const TaskSpec& spec);

// The "source" block on its own; empty text gives the defaults.
SourceTrainConfig ParseSourceConfig(std::string_view json_text);

struct DataPaths {
  std::filesystem::path source;
  std::filesystem::path target;
  std::filesystem::path target_test;
};

struct RunConfig {
  std::string task_name;
  std::optional<TaskSpec> task;
  std::optional<DataPaths> data;
  std::vector<Method> methods;
  std::vector<std::size_t> shots;
  std::vector<std::uint64_t> seeds;
  ExperimentConfig experiment;
  std::filesystem::path results_path;
};

// Throws kInvalidArgument on any schema or range violation. Relative data
// paths resolve against base_dir.
RunConfig ParseRunConfig(std::string_view json_text, const std::filesystem::path& base_dir = {});

TaskData LoadTaskData(const RunConfig& cfg);

}  // namespace fha

#endif  // FHA_CORE_RUN_CONFIG_HPP_
