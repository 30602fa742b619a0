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

#include "run_config.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "error.hpp"
#include "json.hpp"

namespace fha {

namespace {

using nlohmann::json;

[[noreturn]] void Bad(const std::string& msg) { Fail(ErrorCode::kInvalidArgument, "config: " + msg); }

void CheckKeys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) Bad(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) Bad("unknown field '" + k + "' in " + where);
  }
}

template <typename T>
T Get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    Bad("field '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

std::size_t GetCount(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) Bad("field '" + std::string(key) + "' in " + where + " must be a non-negative integer");
  return v.get<std::size_t>();
}

double GetAngle(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return ParseAngleDegrees(v.get<std::string>());
  Bad("rotation must be a number of degrees or a string like \"40deg\"");
}

TaskSpec TaskFromJson(const json& j) {
  if (j.is_string()) return PresetTask(j.get<std::string>());
  CheckKeys(j,
            {"preset", "name", "num_classes", "dim", "classes", "rotation", "rotation_deg", "translation",
             "source_per_class", "target_per_class", "test_per_class", "seed"},
            "task");
  TaskSpec spec;
  if (j.contains("preset")) {
    spec = PresetTask(Get<std::string>(j, "preset", "task"));
  } else {
    spec.num_classes = static_cast<std::uint32_t>(GetCount(j, "num_classes", "task"));
    spec.dim = GetCount(j, "dim", "task");
    if (!j.contains("classes")) Bad("task needs 'classes' or 'preset'");
    for (const auto& c : j.at("classes")) {
      CheckKeys(c, {"mean", "covariance", "std"}, "task.classes[]");
      ClassGaussian g;
      g.mean = Get<std::vector<double>>(c, "mean", "task.classes[]");
      if (c.contains("covariance")) {
        g.covariance = Get<std::vector<double>>(c, "covariance", "task.classes[]");
      } else {
        const double s = c.contains("std") ? Get<double>(c, "std", "task.classes[]") : 1.0;
        g.covariance.assign(spec.dim * spec.dim, 0.0);
        for (std::size_t i = 0; i < spec.dim; ++i) g.covariance[i * spec.dim + i] = s * s;
      }
      spec.classes.push_back(std::move(g));
    }
  }
  if (j.contains("name")) spec.name = Get<std::string>(j, "name", "task");
  if (j.contains("rotation")) spec.rotation_deg = GetAngle(j.at("rotation"));
  if (j.contains("rotation_deg")) spec.rotation_deg = Get<double>(j, "rotation_deg", "task");
  if (j.contains("translation")) spec.translation = Get<std::vector<double>>(j, "translation", "task");
  if (j.contains("source_per_class")) spec.source_per_class = GetCount(j, "source_per_class", "task");
  if (j.contains("target_per_class")) spec.target_per_class = GetCount(j, "target_per_class", "task");
  if (j.contains("test_per_class")) spec.test_per_class = GetCount(j, "test_per_class", "task");
  if (j.contains("seed")) spec.seed = Get<std::uint64_t>(j, "seed", "task");
  return spec;
}

SourceTrainConfig SourceFromJson(const json& s) {
  CheckKeys(s, {"epochs", "batch", "lr", "hidden", "holdout_fraction", "min_accuracy"}, "source");
  SourceTrainConfig sc;
  if (s.contains("epochs")) sc.epochs = GetCount(s, "epochs", "source");
  if (s.contains("batch")) sc.batch = GetCount(s, "batch", "source");
  if (s.contains("lr")) sc.lr = Get<double>(s, "lr", "source");
  if (s.contains("hidden")) sc.hidden = GetCount(s, "hidden", "source");
  if (s.contains("holdout_fraction")) sc.holdout_fraction = Get<double>(s, "holdout_fraction", "source");
  if (s.contains("min_accuracy")) sc.min_accuracy = Get<double>(s, "min_accuracy", "source");
  if (sc.epochs == 0 || sc.batch == 0 || sc.hidden == 0 || !(sc.lr > 0.0)) Bad("source settings must be positive");
  if (sc.holdout_fraction < 0.0 || sc.holdout_fraction >= 1.0) Bad("holdout_fraction must be in [0,1)");
  return sc;
}

json ParseJson(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    Bad(std::string("not valid JSON: ") + e.what());
  }
}

}  // namespace

double ParseAngleDegrees(std::string_view text) {
  const std::string s(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    Fail(ErrorCode::kInvalidArgument, "invalid angle: '" + s + "'");
  }
  const std::string unit = s.substr(used);
  if (!std::isfinite(value)) Fail(ErrorCode::kInvalidArgument, "invalid angle: '" + s + "'");
  if (unit.empty() || unit == "deg") return value;
  if (unit == "rad") return value * 180.0 / std::numbers::pi;
  Fail(ErrorCode::kInvalidArgument, "invalid angle unit '" + unit + "' (use deg or rad)");
}

SourceTrainConfig ParseSourceConfig(std::string_view json_text) {
  if (json_text.empty()) return {};
  return SourceFromJson(ParseJson(json_text));
}

TaskSpec ParseTaskSpec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception&) {
    // Bare preset names are accepted as well.
    return PresetTask(json_text);
  }
  TaskSpec spec = TaskFromJson(j);
  ValidateTaskSpec(spec);
  return spec;
}

std::string TaskSpecToJson(const TaskSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["num_classes"] = spec.num_classes;
  j["dim"] = spec.dim;
  j["classes"] = json::array();
  for (const auto& c : spec.classes) j["classes"].push_back({{"mean", c.mean}, {"covariance", c.covariance}});
  j["rotation_deg"] = spec.rotation_deg;
  if (!spec.translation.empty()) j["translation"] = spec.translation;
  j["source_per_class"] = spec.source_per_class;
  j["target_per_class"] = spec.target_per_class;
  j["test_per_class"] = spec.test_per_class;
  j["seed"] = spec.seed;
  return j.dump(2);
}

RunConfig ParseRunConfig(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json j = ParseJson(json_text);
  CheckKeys(j, {"task", "data", "methods", "shots", "seeds", "jobs", "source", "tohan", "output"}, "config");
  RunConfig cfg;
  try {
    if (!j.contains("task") && !j.contains("data")) Bad("config needs 'task' or 'data'");
    if (j.contains("task")) {
      cfg.task = TaskFromJson(j.at("task"));
      ValidateTaskSpec(*cfg.task);
      cfg.task_name = cfg.task->name;
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      CheckKeys(d, {"source", "target", "target_test", "name"}, "data");
      auto path = [&](const char* key) {
        std::filesystem::path p = Get<std::string>(d, key, "data");
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      };
      cfg.data = DataPaths{path("source"), path("target"), path("target_test")};
      if (d.contains("name")) cfg.task_name = Get<std::string>(d, "name", "data");
      if (cfg.task_name.empty()) cfg.task_name = "custom";
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) throw;
    Bad(e.what());
  }

  if (j.contains("methods")) {
    for (const auto& m : j.at("methods")) {
      if (!m.is_string()) Bad("methods must be strings");
      const auto parsed = ParseMethod(m.get<std::string>());
      if (!parsed) Bad("unknown method '" + m.get<std::string>() + "'");
      cfg.methods.push_back(*parsed);
    }
  } else {
    cfg.methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  }
  if (j.contains("shots")) {
    for (const auto& s : j.at("shots")) {
      if (!s.is_number_unsigned()) Bad("shots must be integers");
      cfg.shots.push_back(s.get<std::size_t>());
    }
  } else {
    cfg.shots = {1};
  }
  for (auto s : cfg.shots) {
    if (s < 1 || s > kMaxShots) Bad("shots must lie in 1..7, got " + std::to_string(s));
  }
  if (j.contains("seeds")) {
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned()) Bad("seeds must be non-negative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    cfg.seeds = {0};
  }
  if (cfg.methods.empty() || cfg.shots.empty() || cfg.seeds.empty()) Bad("methods, shots and seeds must be non-empty");
  if (j.contains("jobs")) cfg.experiment.jobs = std::max<std::size_t>(1, GetCount(j, "jobs", "config"));

  if (j.contains("source")) cfg.experiment.source = SourceFromJson(j.at("source"));
  if (j.contains("tohan")) {
    const auto& t = j.at("tohan");
    CheckKeys(t,
              {"lambda", "gen_batch", "pair_batch", "lr", "lr_generator", "lr_pretrain", "lr_target",
               "lr_discriminator", "total_epochs", "pretrain_epochs", "adapt_epochs", "per_group", "z_dim",
               "gen_hidden", "disc_hidden", "finetune_epochs"},
              "tohan");
    auto& tc = cfg.experiment.tohan;
    if (t.contains("lambda")) tc.lambda = Get<double>(t, "lambda", "tohan");
    if (t.contains("gen_batch")) tc.gen_batch = GetCount(t, "gen_batch", "tohan");
    if (t.contains("pair_batch")) tc.pair_batch = GetCount(t, "pair_batch", "tohan");
    if (t.contains("lr")) {
      tc.lr_generator = tc.lr_pretrain = tc.lr_target = tc.lr_discriminator = Get<double>(t, "lr", "tohan");
    }
    if (t.contains("lr_generator")) tc.lr_generator = Get<double>(t, "lr_generator", "tohan");
    if (t.contains("lr_pretrain")) tc.lr_pretrain = Get<double>(t, "lr_pretrain", "tohan");
    if (t.contains("lr_target")) tc.lr_target = Get<double>(t, "lr_target", "tohan");
    if (t.contains("lr_discriminator")) tc.lr_discriminator = Get<double>(t, "lr_discriminator", "tohan");
    if (t.contains("total_epochs")) tc.total_epochs = GetCount(t, "total_epochs", "tohan");
    if (t.contains("pretrain_epochs")) tc.pretrain_epochs = GetCount(t, "pretrain_epochs", "tohan");
    if (t.contains("adapt_epochs")) tc.adapt_epochs = GetCount(t, "adapt_epochs", "tohan");
    if (t.contains("per_group")) tc.per_group = GetCount(t, "per_group", "tohan");
    if (t.contains("z_dim")) tc.z_dim = GetCount(t, "z_dim", "tohan");
    if (t.contains("gen_hidden")) tc.gen_hidden = GetCount(t, "gen_hidden", "tohan");
    if (t.contains("disc_hidden")) tc.disc_hidden = GetCount(t, "disc_hidden", "tohan");
    if (t.contains("finetune_epochs")) tc.finetune_epochs = GetCount(t, "finetune_epochs", "tohan");
  }
  try {
    ValidateTohanConfig(cfg.experiment.tohan);
  } catch (const Error& e) {
    Bad(e.what());
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    CheckKeys(o, {"results"}, "output");
    if (o.contains("results")) cfg.results_path = Get<std::string>(o, "results", "output");
  }
  return cfg;
}

TaskData LoadTaskData(const RunConfig& cfg) {
  TaskData td;
  td.name = cfg.task_name;
  if (cfg.data) {
    td.data.source = LoadDataset(cfg.data->source);
    td.data.target = LoadDataset(cfg.data->target);
    td.data.target_test = LoadDataset(cfg.data->target_test);
    const auto& s = td.data;
    Require(s.source.dim() == s.target.dim() && s.target.dim() == s.target_test.dim() &&
                s.source.num_classes() == s.target.num_classes() &&
                s.target.num_classes() == s.target_test.num_classes(),
            ErrorCode::kInvalidArgument, "source, target and target_test disagree on shape");
  } else {
    td.data = MakeSyntheticTask(*cfg.task);
  }
  return td;
}

}  // namespace fha
