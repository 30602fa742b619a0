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

#include "fha/fha.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>

#include "data.hpp"
#include "error.hpp"
#include "harness.hpp"
#include "log.hpp"
#include "run_config.hpp"
#include "trainers.hpp"

struct fha_task {
  fha::TaskSpec spec;
};

struct fha_dataset {
  fha::Dataset data;
};

struct fha_model {
  fha::SourceHypothesis hypothesis;
};

namespace {

thread_local std::string g_last_error;

fha_status Record(fha_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
fha_status Guard(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const fha::Error& e) {
    return Record(static_cast<fha_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return Record(FHA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Record(FHA_ERR_INTERNAL, e.what());
  } catch (...) {
    return Record(FHA_ERR_INTERNAL, "unknown error");
  }
}

fha_status NullArg(const char* what) {
  return Record(FHA_ERR_INVALID_ARGUMENT, std::string(what) + " must not be null");
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::filesystem::path BaseDir(const char* base_dir) {
  return base_dir == nullptr ? std::filesystem::path{} : std::filesystem::path(base_dir);
}

}  // namespace

extern "C" {

const char* fha_version(void) { return "0.1.0"; }

const char* fha_last_error(void) { return g_last_error.c_str(); }

const char* fha_status_name(fha_status status) {
  switch (status) {
    case FHA_OK: return "ok";
    case FHA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FHA_ERR_PROTOCOL: return "protocol violation";
    case FHA_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case FHA_ERR_FORMAT: return "format error";
    case FHA_ERR_IO: return "i/o error";
    case FHA_ERR_NUMERICAL: return "numerical error";
    case FHA_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case FHA_ERR_QUALITY_GATE: return "quality gate";
    case FHA_ERR_PARTIAL: return "partial failure";
    case FHA_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

fha_status fha_set_log_level(const char* level) {
  if (level == nullptr) return NullArg("level");
  return Guard([&] {
    fha::LogLevel parsed;
    if (!fha::ParseLogLevel(level, &parsed)) return Record(FHA_ERR_INVALID_ARGUMENT, "unknown log level");
    fha::SetLogLevel(parsed);
    return FHA_OK;
  });
}

fha_status fha_task_create(const char* spec, fha_task** out) {
  if (spec == nullptr) return NullArg("spec");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fha_task{fha::ParseTaskSpec(spec)};
    return FHA_OK;
  });
}

fha_status fha_task_set_seed(fha_task* task, uint64_t seed) {
  if (task == nullptr) return NullArg("task");
  task->spec.seed = seed;
  return FHA_OK;
}

fha_status fha_task_set_rotation(fha_task* task, const char* angle) {
  if (task == nullptr) return NullArg("task");
  if (angle == nullptr) return NullArg("angle");
  return Guard([&] {
    fha::TaskSpec next = task->spec;
    next.rotation_deg = fha::ParseAngleDegrees(angle);
    fha::ValidateTaskSpec(next);
    task->spec = std::move(next);
    return FHA_OK;
  });
}

fha_status fha_task_to_json(const fha_task* task, char** out) {
  if (task == nullptr) return NullArg("task");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = CopyString(fha::TaskSpecToJson(task->spec));
    return FHA_OK;
  });
}

void fha_task_free(fha_task* task) { delete task; }

fha_status fha_task_generate(const fha_task* task, int split, fha_dataset** out) {
  if (task == nullptr) return NullArg("task");
  if (out == nullptr) return NullArg("out");
  if (split < 0 || split > 2) return Record(FHA_ERR_INVALID_ARGUMENT, "split must be 0, 1 or 2");
  return Guard([&] {
    fha::SyntheticTask t = fha::MakeSyntheticTask(task->spec);
    fha::Dataset& pick = split == 0 ? t.source : split == 1 ? t.target : t.target_test;
    *out = new fha_dataset{std::move(pick)};
    return FHA_OK;
  });
}

fha_status fha_dataset_load(const char* path, fha_dataset** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fha_dataset{fha::LoadDataset(path)};
    return FHA_OK;
  });
}

fha_status fha_dataset_save(const fha_dataset* ds, const char* path) {
  if (ds == nullptr) return NullArg("dataset");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    fha::SaveDataset(ds->data, path);
    return FHA_OK;
  });
}

size_t fha_dataset_size(const fha_dataset* ds) { return ds == nullptr ? 0 : ds->data.size(); }
size_t fha_dataset_dim(const fha_dataset* ds) { return ds == nullptr ? 0 : ds->data.dim(); }
uint32_t fha_dataset_classes(const fha_dataset* ds) { return ds == nullptr ? 0 : ds->data.num_classes(); }
uint64_t fha_dataset_checksum(const fha_dataset* ds) { return ds == nullptr ? 0 : ds->data.Checksum(); }
void fha_dataset_free(fha_dataset* ds) { delete ds; }

fha_status fha_model_train_source(const fha_dataset* source, const char* config_json, uint64_t seed,
                                  const char* task_name, fha_model** out) {
  if (source == nullptr) return NullArg("source");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    const fha::SourceTrainConfig cfg = fha::ParseSourceConfig(config_json == nullptr ? "" : config_json);
    *out = new fha_model{fha::TrainSource(source->data, cfg, seed, task_name == nullptr ? "" : task_name)};
    return FHA_OK;
  });
}

fha_status fha_model_save(const fha_model* model, const char* path) {
  if (model == nullptr) return NullArg("model");
  if (path == nullptr) return NullArg("path");
  return Guard([&] {
    fha::nn::SaveModelFile(fha::ToModelFile(model->hypothesis), path);
    return FHA_OK;
  });
}

fha_status fha_model_load(const char* path, fha_model** out) {
  if (path == nullptr) return NullArg("path");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = new fha_model{fha::FromModelFile(fha::nn::LoadModelFile(path))};
    return FHA_OK;
  });
}

fha_status fha_model_accuracy(const fha_model* model, const fha_dataset* test, double* out) {
  if (model == nullptr) return NullArg("model");
  if (test == nullptr) return NullArg("test");
  if (out == nullptr) return NullArg("out");
  return Guard([&] {
    *out = fha::Accuracy(model->hypothesis.model, test->data);
    return FHA_OK;
  });
}

void fha_model_free(fha_model* model) { delete model; }

fha_status fha_config_validate(const char* config_json, const char* base_dir) {
  if (config_json == nullptr) return NullArg("config");
  return Guard([&] {
    const fha::RunConfig cfg = fha::ParseRunConfig(config_json, BaseDir(base_dir));
    if (cfg.data) {
      for (const auto& p : {cfg.data->source, cfg.data->target, cfg.data->target_test}) {
        if (!std::filesystem::exists(p)) fha::Fail(fha::ErrorCode::kInvalidArgument, "no such dataset: " + p.string());
      }
    }
    return FHA_OK;
  });
}

fha_status fha_run_config(const char* config_json, const char* base_dir, const char* results_path, size_t jobs,
                          size_t* completed, size_t* failed) {
  if (config_json == nullptr) return NullArg("config");
  return Guard([&] {
    fha::RunConfig cfg = fha::ParseRunConfig(config_json, BaseDir(base_dir));
    if (results_path != nullptr) cfg.results_path = results_path;
    if (cfg.results_path.empty()) fha::Fail(fha::ErrorCode::kInvalidArgument, "no results path given");
    if (jobs > 0) cfg.experiment.jobs = jobs;
    const fha::TaskData task = fha::LoadTaskData(cfg);
    fha::JsonlResultSink sink(cfg.results_path);
    const auto results = fha::RunExperiment(task, cfg.methods, cfg.shots, cfg.seeds, cfg.experiment, &sink);
    std::size_t bad = 0;
    for (const auto& r : results) bad += r.ok() ? 0 : 1;
    if (completed != nullptr) *completed = results.size() - bad;
    if (failed != nullptr) *failed = bad;
    if (bad > 0) return Record(FHA_ERR_PARTIAL, std::to_string(bad) + " of " + std::to_string(results.size()) + " runs failed");
    return FHA_OK;
  });
}

fha_status fha_summarize(const char* results_path, const char* format, char** out, size_t* skipped,
                         char** diagnostics) {
  if (results_path == nullptr) return NullArg("results_path");
  if (out == nullptr) return NullArg("out");
  const std::string fmt = format == nullptr ? "table" : format;
  if (fmt != "table" && fmt != "csv") return Record(FHA_ERR_INVALID_ARGUMENT, "format must be table or csv");
  return Guard([&] {
    std::ifstream in(results_path);
    if (!in) fha::Fail(fha::ErrorCode::kIo, std::string("cannot open ") + results_path);
    std::vector<fha::RunResult> results;
    std::ostringstream diag;
    std::size_t bad = 0;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.empty()) continue;
      try {
        results.push_back(fha::ParseResultLine(line));
      } catch (const fha::Error& e) {
        ++bad;
        diag << "line " << n << ": " << e.what() << "\n";
      }
    }
    if (skipped != nullptr) *skipped = bad;
    if (diagnostics != nullptr) *diagnostics = CopyString(diag.str());
    if (results.empty()) fha::Fail(fha::ErrorCode::kInsufficientData, "no valid result records");
    const fha::SummaryTable table = fha::Summarize(results);
    *out = CopyString(fmt == "csv" ? table.ToCsv() : table.ToText());
    if (bad > 0) return Record(FHA_ERR_FORMAT, std::to_string(bad) + " malformed line(s) skipped");
    return FHA_OK;
  });
}

fha_status fha_dump_embedding(const fha_model* model, const fha_dataset* const* datasets, const char* const* domains,
                              size_t count, char** out_csv, int* degenerate) {
  if (model == nullptr) return NullArg("model");
  if (out_csv == nullptr) return NullArg("out_csv");
  if (count > 0 && (datasets == nullptr || domains == nullptr)) return NullArg("datasets");
  return Guard([&] {
    std::vector<fha::TaggedDataset> tagged;
    for (size_t i = 0; i < count; ++i) {
      if (datasets[i] == nullptr || domains[i] == nullptr) fha::Fail(fha::ErrorCode::kInvalidArgument, "null dataset");
      tagged.push_back({domains[i], &datasets[i]->data});
    }
    const fha::Embedding e = fha::DumpEmbedding(model->hypothesis.model.encoder, tagged);
    if (degenerate != nullptr) *degenerate = e.degenerate ? 1 : 0;
    *out_csv = CopyString(fha::EmbeddingCsv(e));
    return FHA_OK;
  });
}

void fha_string_free(char* s) { std::free(s); }

}  // extern "C"
