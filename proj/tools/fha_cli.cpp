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

// fha: generate tasks, train source hypotheses, run adaptation
// experiments and summarize their results.
//
// Exit codes: 0 success, 1 runtime or partial failure, 2 usage or
// validation error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fha/fha.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct TaskDeleter {
  void operator()(fha_task* t) const { fha_task_free(t); }
};
struct DatasetDeleter {
  void operator()(fha_dataset* d) const { fha_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(fha_model* m) const { fha_model_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { fha_string_free(s); }
};
using TaskPtr = std::unique_ptr<fha_task, TaskDeleter>;
using DatasetPtr = std::unique_ptr<fha_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<fha_model, ModelDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

int Report(const std::string& what, fha_status st) {
  std::fprintf(stderr, "fha: %s: %s (%s)\n", what.c_str(), fha_last_error(), fha_status_name(st));
  return kExitRuntime;
}

int Usage(const std::string& msg) {
  std::fprintf(stderr, "fha: %s\n", msg.c_str());
  return kExitUsage;
}

bool IsValidation(fha_status st) {
  return st == FHA_ERR_INVALID_ARGUMENT || st == FHA_ERR_PROTOCOL || st == FHA_ERR_SHAPE_MISMATCH;
}

std::optional<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool WriteFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

// "0..9", "0,2,5" or a mix: "0..3,7".
std::optional<std::vector<std::uint64_t>> ParseList(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const auto dots = part.find("..");
      std::size_t used = 0;
      if (dots == std::string::npos) {
        out.push_back(std::stoull(part, &used));
        if (used != part.size()) return std::nullopt;
        continue;
      }
      const std::string lo_s = part.substr(0, dots), hi_s = part.substr(dots + 2);
      const std::uint64_t lo = std::stoull(lo_s, &used);
      if (used != lo_s.size()) return std::nullopt;
      const std::uint64_t hi = std::stoull(hi_s, &used);
      if (used != hi_s.size() || hi < lo) return std::nullopt;
      for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// gen-data ----------------------------------------------------------------

struct GenDataArgs {
  std::string task = "rot40";
  std::string rotation;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int CmdGenData(const GenDataArgs& a) {
  fha_task* raw = nullptr;
  fha_status st = fha_task_create(a.task.c_str(), &raw);
  if (st != FHA_OK) return IsValidation(st) ? Usage(std::string("invalid task: ") + fha_last_error()) : Report("task", st);
  TaskPtr task(raw);
  fha_task_set_seed(task.get(), a.seed);
  if (!a.rotation.empty()) {
    st = fha_task_set_rotation(task.get(), a.rotation.c_str());
    if (st != FHA_OK) return Usage(std::string("invalid rotation: ") + fha_last_error());
  }
  std::error_code ec;
  std::filesystem::create_directories(a.out, ec);
  if (ec) return Usage("cannot create output directory " + a.out + ": " + ec.message());
  const char* names[] = {"source.fhd", "target.fhd", "target_test.fhd"};
  for (int split = 0; split < 3; ++split) {
    fha_dataset* ds = nullptr;
    st = fha_task_generate(task.get(), split, &ds);
    if (st != FHA_OK) return Report("generate", st);
    DatasetPtr owned(ds);
    const std::string path = (std::filesystem::path(a.out) / names[split]).string();
    st = fha_dataset_save(ds, path.c_str());
    if (st != FHA_OK) return Report("save " + path, st);
    std::printf("%s %s %zu\n", names[split], Hex(fha_dataset_checksum(ds)).c_str(), fha_dataset_size(ds));
  }
  char* spec = nullptr;
  if (fha_task_to_json(task.get(), &spec) == FHA_OK) {
    StringPtr owned(spec);
    WriteFile((std::filesystem::path(a.out) / "task.json").string(), std::string(spec) + "\n");
  }
  return kExitOk;
}

// train-source --------------------------------------------------------------

struct TrainSourceArgs {
  std::string data;
  std::string test;
  std::string config;
  std::string name;
  std::uint64_t seed = 0;
  std::string out = "source_model.json";
};

int CmdTrainSource(const TrainSourceArgs& a) {
  std::string cfg;
  if (!a.config.empty()) {
    auto text = ReadFile(a.config);
    if (!text) return Usage("cannot read " + a.config);
    cfg = *text;
  }
  fha_dataset* raw = nullptr;
  fha_status st = fha_dataset_load(a.data.c_str(), &raw);
  if (st != FHA_OK) return Report("load " + a.data, st);
  DatasetPtr source(raw);
  fha_model* model_raw = nullptr;
  st = fha_model_train_source(source.get(), cfg.empty() ? nullptr : cfg.c_str(), a.seed, a.name.c_str(), &model_raw);
  if (st != FHA_OK) {
    if (st == FHA_ERR_INVALID_ARGUMENT) return Usage(fha_last_error());
    return Report("train-source", st);
  }
  ModelPtr model(model_raw);
  st = fha_model_save(model.get(), a.out.c_str());
  if (st != FHA_OK) return Report("save " + a.out, st);
  if (!a.test.empty()) {
    fha_dataset* test_raw = nullptr;
    st = fha_dataset_load(a.test.c_str(), &test_raw);
    if (st != FHA_OK) return Report("load " + a.test, st);
    DatasetPtr test(test_raw);
    double acc = 0.0;
    st = fha_model_accuracy(model.get(), test.get(), &acc);
    if (st != FHA_OK) return Report("accuracy", st);
    std::printf("accuracy %.6f\n", acc);
  }
  return kExitOk;
}

// run ---------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string task;
  std::string data;
  std::vector<std::string> methods;
  std::string shots;
  std::string seeds;
  std::string out;
  std::size_t jobs = 0;
};

int CmdRun(const RunArgs& a) {
  std::string text;
  std::string base_dir;
  if (!a.config.empty()) {
    auto file = ReadFile(a.config);
    if (!file) return Usage("cannot read config " + a.config);
    text = *file;
    base_dir = std::filesystem::path(a.config).parent_path().string();
  }
  nlohmann::json cfg;
  if (!text.empty()) {
    try {
      cfg = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      return Usage(std::string("config is not valid JSON: ") + e.what());
    }
  } else {
    cfg = nlohmann::json::object();
  }
  // Flags override the config document.
  if (!a.task.empty()) cfg["task"] = a.task;
  if (!a.data.empty()) {
    const std::filesystem::path d(a.data);
    cfg["data"] = {{"source", (d / "source.fhd").string()},
                   {"target", (d / "target.fhd").string()},
                   {"target_test", (d / "target_test.fhd").string()}};
    // gen-data leaves the task spec next to the splits; reuse its name.
    if (auto spec = ReadFile((d / "task.json").string())) {
      const auto j = nlohmann::json::parse(*spec, nullptr, false);
      if (j.is_object() && j.contains("name") && j["name"].is_string()) cfg["data"]["name"] = j["name"];
    }
    if (a.task.empty() && cfg.contains("task")) cfg.erase("task");
  }
  if (!a.methods.empty()) {
    std::vector<std::string> all;
    for (const auto& m : a.methods) {
      std::stringstream ss(m);
      std::string part;
      while (std::getline(ss, part, ',')) all.push_back(part);
    }
    cfg["methods"] = all;
  }
  if (!a.shots.empty()) {
    auto list = ParseList(a.shots);
    if (!list) return Usage("invalid --shots '" + a.shots + "'");
    cfg["shots"] = *list;
  }
  if (!a.seeds.empty()) {
    auto list = ParseList(a.seeds);
    if (!list) return Usage("invalid --seeds '" + a.seeds + "'");
    cfg["seeds"] = *list;
  }
  const std::string doc = cfg.dump();
  fha_status st = fha_config_validate(doc.c_str(), base_dir.c_str());
  if (st != FHA_OK) return Usage(std::string("invalid configuration: ") + fha_last_error());
  const std::string out = a.out.empty() && !cfg.contains("output") ? "results.jsonl" : a.out;
  std::size_t completed = 0, failed = 0;
  st = fha_run_config(doc.c_str(), base_dir.c_str(), out.empty() ? nullptr : out.c_str(), a.jobs, &completed,
                      &failed);
  if (st == FHA_ERR_PARTIAL) {
    std::fprintf(stderr, "fha: %zu run(s) failed, %zu completed\n", failed, completed);
    return kExitRuntime;
  }
  if (st != FHA_OK) return Report("run", st);
  std::fprintf(stderr, "fha: %zu run(s) completed\n", completed);
  return kExitOk;
}

// summarize -----------------------------------------------------------------

struct SummarizeArgs {
  std::string results;
  std::string format = "table";
  std::string out;
};

int CmdSummarize(const SummarizeArgs& a) {
  char* text = nullptr;
  char* diag = nullptr;
  std::size_t skipped = 0;
  const fha_status st = fha_summarize(a.results.c_str(), a.format.c_str(), &text, &skipped, &diag);
  StringPtr text_owned(text), diag_owned(diag);
  if (diag != nullptr && diag[0] != '\0') std::fprintf(stderr, "%s", diag);
  if (text == nullptr) return Report("summarize", st);
  if (a.out.empty()) {
    std::fputs(text, stdout);
  } else if (!WriteFile(a.out, text)) {
    std::fprintf(stderr, "fha: cannot write %s\n", a.out.c_str());
    return kExitRuntime;
  }
  if (st != FHA_OK) {
    std::fprintf(stderr, "fha: %zu malformed line(s) skipped\n", skipped);
    return kExitRuntime;
  }
  return kExitOk;
}

// dump-embed ----------------------------------------------------------------

struct DumpEmbedArgs {
  std::string model;
  std::vector<std::string> data;  // path[:domain]
  std::string out;
};

int CmdDumpEmbed(const DumpEmbedArgs& a) {
  fha_model* raw = nullptr;
  fha_status st = fha_model_load(a.model.c_str(), &raw);
  if (st != FHA_OK) return Report("load " + a.model, st);
  ModelPtr model(raw);
  std::vector<DatasetPtr> owned;
  std::vector<const fha_dataset*> sets;
  std::vector<std::string> domains;
  for (const auto& spec : a.data) {
    const auto colon = spec.rfind(':');
    const std::string path = colon == std::string::npos ? spec : spec.substr(0, colon);
    std::string domain = colon == std::string::npos ? std::filesystem::path(spec).stem().string()
                                                    : spec.substr(colon + 1);
    fha_dataset* ds = nullptr;
    st = fha_dataset_load(path.c_str(), &ds);
    if (st != FHA_OK) return Report("load " + path, st);
    owned.emplace_back(ds);
    sets.push_back(ds);
    domains.push_back(std::move(domain));
  }
  std::vector<const char*> domain_ptrs;
  for (const auto& d : domains) domain_ptrs.push_back(d.c_str());
  char* csv = nullptr;
  int degenerate = 0;
  st = fha_dump_embedding(model.get(), sets.data(), domain_ptrs.data(), sets.size(), &csv, &degenerate);
  if (st != FHA_OK) return Report("dump-embed", st);
  StringPtr csv_owned(csv);
  if (degenerate) std::fprintf(stderr, "fha: degenerate covariance, using raw coordinates\n");
  if (a.out.empty()) {
    std::fputs(csv, stdout);
  } else if (!WriteFile(a.out, csv)) {
    std::fprintf(stderr, "fha: cannot write %s\n", a.out.c_str());
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("FHA_LOG"); level != nullptr && level[0] != '\0') {
    if (fha_set_log_level(level) != FHA_OK) return Usage(std::string("FHA_LOG must be error, info or debug"));
  }

  CLI::App app{"Few-shot hypothesis adaptation experiments"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate source, target and target-test datasets");
  gen_cmd->add_option("--task", gen.task, "Preset name or JSON task spec")->capture_default_str();
  gen_cmd->add_option("--rotation", gen.rotation, "Override rotation, e.g. 40deg or 0.7rad");
  gen_cmd->add_option("--seed", gen.seed, "Task seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  TrainSourceArgs ts;
  auto* ts_cmd = app.add_subcommand("train-source", "Train a source hypothesis");
  ts_cmd->add_option("--data", ts.data, "Source dataset (FHD1)")->required();
  ts_cmd->add_option("--test", ts.test, "Dataset to report accuracy on");
  ts_cmd->add_option("--config", ts.config, "JSON file with source training settings");
  ts_cmd->add_option("--name", ts.name, "Task name stored in the model");
  ts_cmd->add_option("--seed", ts.seed, "Training seed")->capture_default_str();
  ts_cmd->add_option("--out", ts.out, "Model file")->capture_default_str();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment batch");
  run_cmd->add_option("--config", run.config, "JSON run configuration");
  run_cmd->add_option("--task", run.task, "Preset task name");
  run_cmd->add_option("--data", run.data, "Directory written by gen-data");
  run_cmd->add_option("--method", run.methods, "Methods (repeatable or comma separated)");
  run_cmd->add_option("--shots", run.shots, "Shots, e.g. 1,3,7");
  run_cmd->add_option("--seeds", run.seeds, "Seeds, e.g. 0..9");
  run_cmd->add_option("--out", run.out, "Results file (JSON lines)");
  run_cmd->add_option("--jobs", run.jobs, "Concurrent seeds");

  SummarizeArgs sum;
  auto* sum_cmd = app.add_subcommand("summarize", "Summarize a results file");
  sum_cmd->add_option("results", sum.results, "Results file")->required();
  sum_cmd->add_option("--format", sum.format, "table or csv")
      ->check(CLI::IsMember({"table", "csv"}))
      ->capture_default_str();
  sum_cmd->add_option("--out", sum.out, "Write here instead of stdout");

  DumpEmbedArgs emb;
  auto* emb_cmd = app.add_subcommand("dump-embed", "Export a 2-D PCA embedding of encoder features");
  emb_cmd->add_option("--model", emb.model, "Model file")->required();
  emb_cmd->add_option("--data", emb.data, "Dataset, optionally path:domain (repeatable)")->required();
  emb_cmd->add_option("--out", emb.out, "CSV output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*gen_cmd) return CmdGenData(gen);
  if (*ts_cmd) return CmdTrainSource(ts);
  if (*run_cmd) {
    if (run.config.empty() && run.task.empty() && run.data.empty()) return Usage("run needs --config, --task or --data");
    return CmdRun(run);
  }
  if (*sum_cmd) return CmdSummarize(sum);
  if (*emb_cmd) return CmdDumpEmbed(emb);
  return kExitUsage;
}
