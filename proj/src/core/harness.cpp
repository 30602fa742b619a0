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

#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "error.hpp"
#include "json.hpp"
#include "log.hpp"

namespace fha {

namespace {

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string FormatFixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double ElapsedMs(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void CollectFinalLosses(const Trace& trace, std::map<std::string, double>& out) {
  for (const auto& r : trace.records) {
    for (const auto& [k, v] : r.losses) out[std::string(ToString(r.phase)) + "." + k] = v;
  }
}

}  // namespace

std::string_view ToString(Method m) {
  switch (m) {
    case Method::kWa: return "wa";
    case Method::kFt: return "ft";
    case Method::kShot: return "shot";
    case Method::kSFada: return "sfada";
    case Method::kTFada: return "tfada";
    case Method::kStFada: return "stfada";
    case Method::kTohan: return "tohan";
  }
  return "?";
}

std::optional<Method> ParseMethod(std::string_view s) {
  for (Method m : kAllMethods) {
    if (ToString(m) == s) return m;
  }
  if (s == "s+f") return Method::kSFada;
  if (s == "t+f") return Method::kTFada;
  if (s == "st+f") return Method::kStFada;
  return std::nullopt;
}

std::string FormatResultLine(const RunResult& r) {
  std::string line = "{\"method\":\"" + std::string(ToString(r.method)) + "\",\"task\":" + nlohmann::json(r.task).dump() +
                     ",\"n_t\":" + std::to_string(r.shots) + ",\"seed\":" + std::to_string(r.seed);
  if (r.error) {
    line += ",\"error\":" + nlohmann::json(*r.error).dump();
  } else {
    line += ",\"accuracy\":" + FormatDouble(r.accuracy) + ",\"wa_accuracy\":" + FormatDouble(r.wa_accuracy) +
            ",\"wall_ms\":" + FormatFixed(r.wall_ms, 3);
  }
  return line + "}";
}

RunResult ParseResultLine(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("not a JSON record: ") + e.what());
  }
  try {
    Require(j.is_object(), ErrorCode::kFormat, "record is not an object");
    RunResult r;
    const auto method = ParseMethod(j.at("method").get<std::string>());
    Require(method.has_value(), ErrorCode::kFormat, "unknown method");
    r.method = *method;
    r.task = j.at("task").get<std::string>();
    r.shots = j.at("n_t").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    std::size_t expected = 5;
    if (j.contains("error")) {
      r.error = j.at("error").get<std::string>();
    } else {
      r.accuracy = j.at("accuracy").get<double>();
      r.wa_accuracy = j.at("wa_accuracy").get<double>();
      r.wall_ms = j.at("wall_ms").get<double>();
      Require(r.accuracy >= 0.0 && r.accuracy <= 1.0 && r.wa_accuracy >= 0.0 && r.wa_accuracy <= 1.0,
              ErrorCode::kFormat, "accuracy outside [0,1]");
      expected = 7;
    }
    Require(j.size() == expected, ErrorCode::kFormat, "unexpected fields in record");
    return r;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed record: ") + e.what());
  }
}

JsonlResultSink::JsonlResultSink(const std::filesystem::path& path, bool truncate)
    : out_(path, truncate ? std::ios::trunc : std::ios::app) {
  Require(static_cast<bool>(out_), ErrorCode::kIo, "cannot open results file: " + path.string());
}

void JsonlResultSink::Append(const RunResult& r) {
  const std::string line = FormatResultLine(r) + "\n";
  std::lock_guard<std::mutex> lock(mu_);
  out_ << line;
  out_.flush();
  Require(static_cast<bool>(out_), ErrorCode::kIo, "failed to append result record");
}

EncoderClassifier TrainMethod(Method method, const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg,
                              Trace* trace) {
  switch (method) {
    case Method::kWa: return h.model;
    case Method::kFt: return TrainFt(h, fs, cfg, trace);
    case Method::kShot: return TrainShot(h, fs, cfg, trace);
    case Method::kSFada: return RunTwoStep(TwoStepMethod::kSourceFada, h, fs, cfg, trace);
    case Method::kTFada: return RunTwoStep(TwoStepMethod::kTargetFada, h, fs, cfg, trace);
    case Method::kStFada: return RunTwoStep(TwoStepMethod::kSourceTargetFada, h, fs, cfg, trace);
    case Method::kTohan: return TrainTohan(h, fs, cfg, trace).model;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown method");
}

std::vector<RunResult> RunExperiment(const TaskData& task, std::span<const Method> methods,
                                     std::span<const std::size_t> shots, std::span<const std::uint64_t> seeds,
                                     const ExperimentConfig& cfg, ResultSink* sink) {
  Require(!methods.empty() && !shots.empty() && !seeds.empty(), ErrorCode::kInvalidArgument,
          "experiment needs at least one method, shot count and seed");
  ValidateTohanConfig(cfg.tohan);

  std::mutex mu;
  std::vector<RunResult> results;
  auto emit = [&](RunResult r) {
    std::lock_guard<std::mutex> lock(mu);
    if (sink != nullptr) {
      try {
        sink->Append(r);
      } catch (const Error& e) {
        Log(LogLevel::kError, e.what());
      }
    }
    results.push_back(std::move(r));
  };
  auto fail_all = [&](std::uint64_t seed, std::span<const std::size_t> shot_list, const std::string& what) {
    for (auto s : shot_list) {
      for (Method m : methods) {
        RunResult r;
        r.method = m;
        r.task = task.name;
        r.shots = s;
        r.seed = seed;
        r.error = what;
        emit(std::move(r));
      }
    }
  };

  auto run_seed = [&](std::uint64_t seed) {
    SourceHypothesis h;
    double wa = 0.0;
    try {
      h = TrainSource(task.data.source, cfg.source, seed, task.name);
      wa = EvalWa(h, task.data.target_test);
    } catch (const std::exception& e) {
      fail_all(seed, shots, e.what());
      return;
    }
    for (std::size_t s : shots) {
      FewShotSet fs;
      try {
        fs = SampleFewShot(task.data.target, s, DeriveSeed(seed, "shots/" + std::to_string(s)));
      } catch (const std::exception& e) {
        fail_all(seed, std::span<const std::size_t>(&s, 1), e.what());
        continue;
      }
      TohanConfig tcfg = cfg.tohan;
      tcfg.seed = DeriveSeed(seed, s);
      for (Method m : methods) {
        RunResult r;
        r.method = m;
        r.task = task.name;
        r.shots = s;
        r.seed = seed;
        r.wa_accuracy = wa;
        const auto start = std::chrono::steady_clock::now();
        try {
          Trace trace;
          const EncoderClassifier model = TrainMethod(m, h, fs, tcfg, &trace);
          r.accuracy = Accuracy(model, task.data.target_test);
          CollectFinalLosses(trace, r.final_losses);
        } catch (const std::exception& e) {
          r.error = e.what();
        }
        r.wall_ms = ElapsedMs(start);
        if (GetLogLevel() >= LogLevel::kInfo) {
          Log(LogLevel::kInfo, std::string(ToString(m)) + " n_t=" + std::to_string(s) + " seed=" + std::to_string(seed) +
                                   (r.ok() ? " acc=" + FormatFixed(r.accuracy, 4) : " error: " + *r.error));
        }
        emit(std::move(r));
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, seeds.size());
  if (jobs == 1) {
    for (auto seed : seeds) run_seed(seed);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) run_seed(seeds[i]);
      });
    }
    for (auto& t : workers) t.join();
  }

  auto position = [](auto span, auto value) {
    return static_cast<std::size_t>(std::find(span.begin(), span.end(), value) - span.begin());
  };
  std::stable_sort(results.begin(), results.end(), [&](const RunResult& a, const RunResult& b) {
    const auto ka = std::make_tuple(position(seeds, a.seed), position(shots, a.shots), position(methods, a.method));
    const auto kb = std::make_tuple(position(seeds, b.seed), position(shots, b.shots), position(methods, b.method));
    return ka < kb;
  });
  return results;
}

std::string SummaryRow::Cell() const {
  std::string cell = FormatFixed(100.0 * mean, 1) + "±";
  return cell + (std_dev ? FormatFixed(100.0 * *std_dev, 1) : std::string("n/a"));
}

SummaryTable Summarize(std::span<const RunResult> results) {
  Require(!results.empty(), ErrorCode::kInvalidArgument, "no results to summarize");
  std::map<std::pair<int, std::size_t>, std::vector<double>> groups;
  SummaryTable table;
  for (const auto& r : results) {
    if (!r.ok()) {
      ++table.failed_runs;
      continue;
    }
    groups[{static_cast<int>(r.method), r.shots}].push_back(r.accuracy);
  }
  for (const auto& [key, acc] : groups) {
    SummaryRow row;
    row.method = static_cast<Method>(key.first);
    row.shots = key.second;
    row.seeds = acc.size();
    double sum = 0.0;
    for (double a : acc) sum += a;
    row.mean = sum / static_cast<double>(acc.size());
    if (acc.size() >= 2) {
      double ss = 0.0;
      for (double a : acc) ss += (a - row.mean) * (a - row.mean);
      row.std_dev = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    }
    table.rows.push_back(row);
  }
  return table;
}

std::string SummaryTable::ToText() const {
  std::vector<std::size_t> shot_cols;
  for (const auto& r : rows) {
    if (std::find(shot_cols.begin(), shot_cols.end(), r.shots) == shot_cols.end()) shot_cols.push_back(r.shots);
  }
  std::sort(shot_cols.begin(), shot_cols.end());
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-8s", "method");
  os << buf;
  for (auto s : shot_cols) {
    std::snprintf(buf, sizeof(buf), " %12s", (std::to_string(s) + "-shot").c_str());
    os << buf;
  }
  os << '\n';
  for (Method m : kAllMethods) {
    bool any = false;
    std::string line;
    std::snprintf(buf, sizeof(buf), "%-8s", std::string(ToString(m)).c_str());
    line += buf;
    for (auto s : shot_cols) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) { return r.method == m && r.shots == s; });
      const std::string cell = it == rows.end() ? "-" : it->Cell();
      any = any || it != rows.end();
      // The "±" sign is two bytes wide in UTF-8 but one column on screen.
      const std::size_t width = 12 + (cell.find("±") != std::string::npos ? 1 : 0);
      line += " " + std::string(width > cell.size() ? width - cell.size() : 0, ' ') + cell;
    }
    if (any) os << line << '\n';
  }
  if (failed_runs > 0) os << "(" << failed_runs << " failed runs excluded)\n";
  return os.str();
}

std::string SummaryTable::ToCsv() const {
  std::ostringstream os;
  os << "method,n_t,mean_pct,std_pct,seeds\n";
  for (const auto& r : rows) {
    os << ToString(r.method) << ',' << r.shots << ',' << FormatDouble(100.0 * r.mean) << ','
       << (r.std_dev ? FormatDouble(100.0 * *r.std_dev) : std::string()) << ',' << r.seeds << '\n';
  }
  return os.str();
}

Embedding DumpEmbedding(const nn::Mlp& encoder, std::span<const TaggedDataset> datasets) {
  Require(encoder.arch.output_width() >= 2, ErrorCode::kInvalidArgument, "embedding export needs encoder width >= 2");
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index total = 0;
  for (const auto& t : datasets) {
    Require(t.data != nullptr, ErrorCode::kInvalidArgument, "null dataset");
    blocks.push_back(encoder(t.data->FeatureMatrix()));
    total += blocks.back().rows();
  }
  Require(total > 0, ErrorCode::kInvalidArgument, "no samples to embed");
  Eigen::MatrixXd z(total, static_cast<Eigen::Index>(encoder.arch.output_width()));
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    z.middleRows(off, b.rows()) = b;
    off += b.rows();
  }

  Embedding out;
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd centered = z.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(total - 1, 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const auto k = cov.rows();
  const double top = eig.eigenvalues()[k - 1];
  const double second = eig.eigenvalues()[k - 2];
  Eigen::MatrixXd proj(total, 2);
  if (!(top > 0.0) || second <= 1e-12 * cov.trace()) {
    out.degenerate = true;
    proj = z.leftCols(2);
  } else {
    Eigen::MatrixXd axes(k, 2);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd v = eig.eigenvectors().col(k - 1 - c);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v[arg] < 0) v = -v;
      axes.col(c) = v;
    }
    proj = centered * axes;
  }

  off = 0;
  for (const auto& t : datasets) {
    for (std::size_t i = 0; i < t.data->size(); ++i, ++off) {
      out.points.push_back({proj(off, 0), proj(off, 1), static_cast<int>(t.data->label(i)), t.domain});
    }
  }
  return out;
}

std::string EmbeddingCsv(const Embedding& e) {
  std::ostringstream os;
  os << "x,y,label,domain\n";
  for (const auto& p : e.points) os << FormatDouble(p.x) << ',' << FormatDouble(p.y) << ',' << p.label << ',' << p.domain << '\n';
  return os.str();
}

}  // namespace fha
