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

// Synthetic two-domain tasks, few-shot target sampling and the FHD1 dataset
// file format.

#ifndef FHA_CORE_DATA_HPP_
#define FHA_CORE_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fha {

// Feature matrix in [0,1]^d (row-major 32-bit floats) with labels in [0, N).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::uint32_t num_classes);
  // Validates ranges; throws kInvalidArgument on violation.
  Dataset(std::vector<float> features, std::vector<std::uint32_t> labels,
          std::size_t dim, std::uint32_t num_classes);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t dim() const { return dim_; }
  std::uint32_t num_classes() const { return num_classes_; }

  std::span<const float> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  std::uint32_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<float>& features() const { return features_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  void Append(std::span<const float> x, std::uint32_t label);
  Dataset Subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> ClassCounts() const;

  // Features widened to 64-bit, one sample per row.
  Eigen::MatrixXd FeatureMatrix() const;
  std::vector<int> IntLabels() const;

  // FNV-1a over the encoded file bytes.
  std::uint64_t Checksum() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::uint32_t num_classes_ = 0;
  std::vector<float> features_;
  std::vector<std::uint32_t> labels_;
};

struct ClassGaussian {
  std::vector<double> mean;        // length d
  std::vector<double> covariance;  // d*d row-major, symmetric positive definite
};

struct TaskSpec {
  std::string name = "custom";
  std::uint32_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<ClassGaussian> classes;
  // Rotation of the (0,1) coordinate plane about the mixture centroid.
  double rotation_deg = 0.0;
  std::vector<double> translation;  // empty means zero
  std::size_t source_per_class = 0;
  std::size_t target_per_class = 0;
  std::size_t test_per_class = 0;
  std::uint64_t seed = 0;
};

void ValidateTaskSpec(const TaskSpec& spec);

// Named presets: "rot<deg>" (3 classes, 2-D), with optional "-c<N>" and
// "-d<D>" suffixes, e.g. "rot180-c2" or "rot30-c4-d8".
TaskSpec PresetTask(std::string_view name, std::uint64_t seed = 0);

struct SyntheticTask {
  Dataset source;
  Dataset target;
  Dataset target_test;
};

SyntheticTask MakeSyntheticTask(const TaskSpec& spec);

inline constexpr std::size_t kMaxShots = 7;

struct FewShotSet {
  std::size_t shots = 0;
  // Indices into the target training split, grouped by class.
  std::vector<std::vector<std::size_t>> indices;
  // The selected samples, class-blocked in index order.
  Dataset samples;
};

FewShotSet SampleFewShot(const Dataset& target, std::size_t shots,
                         std::uint64_t seed);

std::vector<std::uint8_t> EncodeDataset(const Dataset& ds);
Dataset DecodeDataset(std::span<const std::uint8_t> bytes);
void SaveDataset(const Dataset& ds, const std::filesystem::path& path);
Dataset LoadDataset(const std::filesystem::path& path);

}  // namespace fha

#endif  // FHA_CORE_DATA_HPP_
