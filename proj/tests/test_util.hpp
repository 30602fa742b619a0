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

// Test-side oracles and fixtures. Nothing here calls the library's own
// gradient checker; finite differences are recomputed independently.

#ifndef FHA_TESTS_TEST_UTIL_HPP_
#define FHA_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "data.hpp"
#include "error.hpp"
#include "trainers.hpp"

namespace fha::testing {

// Central differences of f at p with step h.
inline std::vector<double> NumericGrad(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> p, double h = 1e-5) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = f(p);
    p[i] = saved - h;
    const double down = f(p);
    p[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Max over entries of |a - n| / max(|a|, |n|, floor).
inline double MaxRelError(const std::vector<double>& a, const std::vector<double>& n, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

inline std::vector<double> ToVec(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  // Row-major flattening.
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[k++] = m(r, c);
  return v;
}

inline Eigen::MatrixXd FromVec(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[k++];
  return m;
}

inline Eigen::MatrixXd UniformMatrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = 0.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

// Rows of a probability simplex, bounded away from the clamp.
inline Eigen::MatrixXd RandomProbs(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m = UniformMatrix(rng, rows, cols, 0.05, 1.0);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) /= m.row(r).sum();
  return m;
}

template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

// Small preset for trainer tests; seconds, not minutes.
inline TaskSpec SmallTask(const std::string& name = "rot40", std::uint64_t seed = 0) {
  TaskSpec spec = PresetTask(name, seed);
  spec.source_per_class = 120;
  spec.target_per_class = 20;
  spec.test_per_class = 100;
  return spec;
}

inline SourceTrainConfig FastSource() {
  SourceTrainConfig cfg;
  cfg.epochs = 40;
  cfg.min_accuracy = 0.0;
  return cfg;
}

// Short schedule with the default shape (T_f < T_max, one pretraining block).
inline TohanConfig FastTohan(std::uint64_t seed = 0) {
  TohanConfig cfg;
  cfg.total_epochs = 40;
  cfg.pretrain_epochs = 10;
  cfg.adapt_epochs = 8;
  cfg.finetune_epochs = 10;
  cfg.seed = seed;
  return cfg;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fha-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fha::testing

#endif  // FHA_TESTS_TEST_UTIL_HPP_
