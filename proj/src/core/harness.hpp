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

// Seeded multi-run experiments, result records, summary tables and 2-D
// embedding export.

#ifndef FHA_CORE_HARNESS_HPP_
#define FHA_CORE_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "model.hpp"
#include "trainers.hpp"

namespace fha {

enum class Method { kWa, kFt, kShot, kSFada, kTFada, kStFada, kTohan };
inline constexpr Method kAllMethods[] = {Method::kWa,    Method::kFt,     Method::kShot, Method::kSFada,
                                         Method::kTFada, Method::kStFada, Method::kTohan};

std::string_view ToString(Method m);
// Accepts the canonical names plus "s+f", "t+f", "st+f".
std::optional<Method> ParseMethod(std::string_view s);

struct RunResult {
  Method method = Method::kWa;
  std::string task;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double wa_accuracy = 0.0;
  double wall_ms = 0.0;
  // Last recorded loss per phase ("adapt_target.loss", ...); not serialized.
  std::map<std::string, double> final_losses;
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

// One JSON object per line. Success records carry exactly method, task,
// n_t, seed, accuracy, wa_accuracy, wall_ms; failed runs carry error in
// place of the three measurements.
std::string FormatResultLine(const RunResult& r);
RunResult ParseResultLine(std::string_view line);

class ResultSink {
 public:
  virtual ~ResultSink() = default;
  virtual void Append(const RunResult& r) = 0;
};

// Appends one flushed line per record under a mutex.
class JsonlResultSink : public ResultSink {
 public:
  explicit JsonlResultSink(const std::filesystem::path& path, bool truncate = true);
  void Append(const RunResult& r) override;

 private:
  std::mutex mu_;
  std::ofstream out_;
};

struct ExperimentConfig {
  SourceTrainConfig source;
  TohanConfig tohan;
  std::size_t jobs = 1;
};

struct TaskData {
  std::string name;
  SyntheticTask data;
};

// One RunResult per (method, n_t, seed), sorted by (seed, n_t, method).
// The source hypothesis and few-shot set are shared across methods for a
// given (seed, n_t). Failures are recorded, not thrown.
std::vector<RunResult> RunExperiment(const TaskData& task, std::span<const Method> methods,
                                     std::span<const std::size_t> shots, std::span<const std::uint64_t> seeds,
                                     const ExperimentConfig& cfg, ResultSink* sink = nullptr);

// Trains one method on an already prepared hypothesis and few-shot set.
EncoderClassifier TrainMethod(Method method, const SourceHypothesis& h, const FewShotSet& fs,
                              const TohanConfig& cfg, Trace* trace = nullptr);

struct SummaryRow {
  Method method = Method::kWa;
  std::size_t shots = 0;
  double mean = 0.0;                // fraction
  std::optional<double> std_dev;    // sample std, fraction; empty for one seed
  std::size_t seeds = 0;

  // "87.7±0.7" in percent; "87.7±n/a" for a single seed.
  std::string Cell() const;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;  // ordered by method, then n_t
  std::size_t failed_runs = 0;

  std::string ToText() const;
  // Header: method,n_t,mean_pct,std_pct,seeds
  std::string ToCsv() const;
};

SummaryTable Summarize(std::span<const RunResult> results);

struct EmbeddingPoint {
  double x = 0.0;
  double y = 0.0;
  int label = 0;
  std::string domain;
};

struct Embedding {
  std::vector<EmbeddingPoint> points;
  bool degenerate = false;  // fell back to the first two raw dimensions
};

struct TaggedDataset {
  std::string domain;
  const Dataset* data = nullptr;
};

// PCA of encoder outputs to 2-D. Each component's largest-magnitude
// loading is positive.
Embedding DumpEmbedding(const nn::Mlp& encoder, std::span<const TaggedDataset> datasets);
std::string EmbeddingCsv(const Embedding& e);

}  // namespace fha

#endif  // FHA_CORE_HARNESS_HPP_
