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

#include "data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "error.hpp"
#include "rng.hpp"

namespace fha {

namespace {

constexpr char kMagic[4] = {'F', 'H', 'D', '1'};
constexpr std::size_t kHeaderBytes = 16;

// Preset geometry: class means evenly spaced on a circle.
constexpr double kPresetRadius = 1.0;
constexpr double kPresetSigma = 0.45;
constexpr std::size_t kPresetSourcePerClass = 300;
constexpr std::size_t kPresetTargetPerClass = 40;
constexpr std::size_t kPresetTestPerClass = 300;

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

}  // namespace

Dataset::Dataset(std::size_t dim, std::uint32_t num_classes)
    : dim_(dim), num_classes_(num_classes) {
  Require(dim >= 1, ErrorCode::kInvalidArgument, "dataset dimension must be >= 1");
}

Dataset::Dataset(std::vector<float> features, std::vector<std::uint32_t> labels,
                 std::size_t dim, std::uint32_t num_classes)
    : dim_(dim),
      num_classes_(num_classes),
      features_(std::move(features)),
      labels_(std::move(labels)) {
  Require(dim >= 1, ErrorCode::kInvalidArgument, "dataset dimension must be >= 1");
  Require(features_.size() == labels_.size() * dim, ErrorCode::kInvalidArgument,
          "feature count does not match labels x dim");
  for (float f : features_) {
    Require(f >= 0.0f && f <= 1.0f, ErrorCode::kInvalidArgument,
            "feature outside [0,1]");
  }
  for (auto y : labels_) {
    Require(y < num_classes_, ErrorCode::kInvalidArgument, "label out of range");
  }
}

void Dataset::Append(std::span<const float> x, std::uint32_t label) {
  Require(x.size() == dim_, ErrorCode::kShapeMismatch, "sample dimension mismatch");
  Require(label < num_classes_, ErrorCode::kInvalidArgument, "label out of range");
  for (float f : x) {
    Require(f >= 0.0f && f <= 1.0f, ErrorCode::kInvalidArgument,
            "feature outside [0,1]");
  }
  features_.insert(features_.end(), x.begin(), x.end());
  labels_.push_back(label);
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Dataset out(dim_, num_classes_);
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (auto i : indices) {
    Require(i < size(), ErrorCode::kInvalidArgument, "subset index out of range");
    auto r = row(i);
    out.features_.insert(out.features_.end(), r.begin(), r.end());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::ClassCounts() const {
  std::vector<std::size_t> counts(num_classes_, 0);
  for (auto y : labels_) ++counts[y];
  return counts;
}

Eigen::MatrixXd Dataset::FeatureMatrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features_[i * dim_ + j];
    }
  }
  return m;
}

std::vector<int> Dataset::IntLabels() const {
  return {labels_.begin(), labels_.end()};
}

std::uint64_t Dataset::Checksum() const {
  auto bytes = EncodeDataset(*this);
  return Fnv1a(bytes.data(), bytes.size());
}

void ValidateTaskSpec(const TaskSpec& spec) {
  auto bad = [](const std::string& msg) { Fail(ErrorCode::kInvalidArgument, "invalid task spec: " + msg); };
  if (spec.num_classes < 2) bad("num_classes must be >= 2");
  if (spec.dim < 1) bad("dim must be >= 1");
  if (spec.source_per_class == 0 || spec.target_per_class == 0 || spec.test_per_class == 0) {
    bad("sample counts must be positive");
  }
  if (spec.classes.size() != spec.num_classes) bad("need one Gaussian per class");
  for (const auto& c : spec.classes) {
    if (c.mean.size() != spec.dim) bad("class mean has wrong length");
    if (c.covariance.size() != spec.dim * spec.dim) bad("class covariance has wrong size");
    for (double v : c.mean) {
      if (!std::isfinite(v)) bad("non-finite class mean");
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
        c.covariance.data(), static_cast<Eigen::Index>(spec.dim), static_cast<Eigen::Index>(spec.dim));
    if (!cov.allFinite() || !cov.isApprox(cov.transpose())) bad("covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) bad("covariance must be positive definite");
  }
  if (!std::isfinite(spec.rotation_deg)) bad("non-finite rotation");
  if (spec.rotation_deg != 0.0 && spec.dim < 2) bad("rotation needs dim >= 2");
  if (!spec.translation.empty() && spec.translation.size() != spec.dim) {
    bad("translation has wrong length");
  }
}

TaskSpec PresetTask(std::string_view name, std::uint64_t seed) {
  auto bad = [&] { Fail(ErrorCode::kInvalidArgument, "unknown task preset: " + std::string(name)); };
  if (!name.starts_with("rot")) bad();
  std::string rest(name.substr(3));
  std::size_t pos = 0;
  double deg = 0.0;
  try {
    deg = std::stod(rest, &pos);
  } catch (const std::exception&) {
    bad();
  }
  std::uint32_t classes = 3;
  std::size_t dim = 2;
  rest = rest.substr(pos);
  while (!rest.empty()) {
    if (rest.size() < 3 || rest[0] != '-') bad();
    char key = rest[1];
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(rest.substr(2), &used);
    } catch (const std::exception&) {
      bad();
    }
    if (key == 'c') {
      classes = static_cast<std::uint32_t>(v);
    } else if (key == 'd') {
      dim = v;
    } else {
      bad();
    }
    rest = rest.substr(2 + used);
  }

  TaskSpec spec;
  spec.name = std::string(name);
  spec.num_classes = classes;
  spec.dim = dim;
  spec.rotation_deg = deg;
  spec.source_per_class = kPresetSourcePerClass;
  spec.target_per_class = kPresetTargetPerClass;
  spec.test_per_class = kPresetTestPerClass;
  spec.seed = seed;
  for (std::uint32_t c = 0; c < classes; ++c) {
    ClassGaussian g;
    g.mean.assign(dim, 0.0);
    const double angle = std::numbers::pi / 2 + 2 * std::numbers::pi * c / classes;
    g.mean[0] = kPresetRadius * std::cos(angle);
    if (dim >= 2) g.mean[1] = kPresetRadius * std::sin(angle);
    g.covariance.assign(dim * dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) g.covariance[j * dim + j] = kPresetSigma * kPresetSigma;
    spec.classes.push_back(std::move(g));
  }
  ValidateTaskSpec(spec);
  return spec;
}

SyntheticTask MakeSyntheticTask(const TaskSpec& spec) {
  ValidateTaskSpec(spec);
  const auto d = static_cast<Eigen::Index>(spec.dim);

  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
  for (const auto& c : spec.classes) centroid += Eigen::Map<const Eigen::VectorXd>(c.mean.data(), d);
  centroid /= static_cast<double>(spec.num_classes);

  Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
  if (!spec.translation.empty()) shift = Eigen::Map<const Eigen::VectorXd>(spec.translation.data(), d);

  // A fixed cube around the centroid, large enough for every class at 4 sigma
  // under any rotation plus the translation. Shared by all three splits.
  double half = 0.0;
  std::vector<Eigen::MatrixXd> chol;
  for (const auto& c : spec.classes) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
        c.covariance.data(), d, d);
    chol.emplace_back(Eigen::LLT<Eigen::MatrixXd>(cov).matrixL());
    const double spread = (Eigen::Map<const Eigen::VectorXd>(c.mean.data(), d) - centroid).norm();
    half = std::max(half, spread + 4.0 * std::sqrt(cov.diagonal().maxCoeff()));
  }
  half += shift.norm();

  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);

  auto draw = [&](std::size_t per_class, bool transform, std::uint64_t stream) {
    Rng rng(DeriveSeed(spec.seed, stream));
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset out(spec.dim, spec.num_classes);
    std::vector<float> row(spec.dim);
    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
      Eigen::Map<const Eigen::VectorXd> mean(spec.classes[c].mean.data(), d);
      for (std::size_t i = 0; i < per_class; ++i) {
        Eigen::VectorXd z(d);
        for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(rng);
        Eigen::VectorXd x = mean + chol[c] * z;
        if (transform) {
          if (d >= 2) {
            const double u = x[0] - centroid[0];
            const double v = x[1] - centroid[1];
            x[0] = centroid[0] + cs * u - sn * v;
            x[1] = centroid[1] + sn * u + cs * v;
          }
          x += shift;
        }
        for (Eigen::Index j = 0; j < d; ++j) {
          const double lo = centroid[j] - half;
          const double t = (std::clamp(x[j], lo, centroid[j] + half) - lo) / (2 * half);
          row[static_cast<std::size_t>(j)] = std::clamp(static_cast<float>(t), 0.0f, 1.0f);
        }
        out.Append(row, c);
      }
    }
    return out;
  };

  SyntheticTask task;
  task.source = draw(spec.source_per_class, false, 1);
  task.target = draw(spec.target_per_class, true, 2);
  task.target_test = draw(spec.test_per_class, true, 3);
  return task;
}

FewShotSet SampleFewShot(const Dataset& target, std::size_t shots, std::uint64_t seed) {
  Require(shots >= 1 && shots <= kMaxShots, ErrorCode::kProtocol,
          "few-shot protocol allows 1..7 samples per class, got " + std::to_string(shots));
  const auto n_classes = target.num_classes();
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < target.size(); ++i) by_class[target.label(i)].push_back(i);

  Rng rng(DeriveSeed(seed, "few-shot"));
  FewShotSet fs;
  fs.shots = shots;
  fs.indices.resize(n_classes);
  std::vector<std::size_t> flat;
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    auto& pool = by_class[c];
    Require(pool.size() >= shots, ErrorCode::kInsufficientData,
            "class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                " samples, fewer than " + std::to_string(shots) + " shots");
    Shuffle(pool, rng);
    fs.indices[c].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(shots));
    std::sort(fs.indices[c].begin(), fs.indices[c].end());
    flat.insert(flat.end(), fs.indices[c].begin(), fs.indices[c].end());
  }
  fs.samples = target.Subset(flat);
  return fs;
}

std::vector<std::uint8_t> EncodeDataset(const Dataset& ds) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * (ds.features().size() + ds.size()));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  PutU32(out, static_cast<std::uint32_t>(ds.size()));
  PutU32(out, static_cast<std::uint32_t>(ds.dim()));
  PutU32(out, ds.num_classes());
  for (float f : ds.features()) PutU32(out, std::bit_cast<std::uint32_t>(f));
  for (auto y : ds.labels()) PutU32(out, y);
  return out;
}

Dataset DecodeDataset(std::span<const std::uint8_t> bytes) {
  Require(bytes.size() >= kHeaderBytes, ErrorCode::kFormat, "truncated header");
  Require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::kFormat, "bad magic");
  const std::uint64_t n = GetU32(bytes, 4);
  const std::uint64_t d = GetU32(bytes, 8);
  const std::uint32_t classes = GetU32(bytes, 12);
  Require(d >= 1, ErrorCode::kFormat, "dimension must be >= 1");
  const std::uint64_t expected = kHeaderBytes + 4 * (n * d + n);
  Require(bytes.size() >= expected, ErrorCode::kFormat, "truncated payload");
  Require(bytes.size() == expected, ErrorCode::kFormat, "trailing bytes after payload");

  std::vector<float> features(n * d);
  std::size_t off = kHeaderBytes;
  for (auto& f : features) {
    f = std::bit_cast<float>(GetU32(bytes, off));
    off += 4;
  }
  std::vector<std::uint32_t> labels(n);
  for (auto& y : labels) {
    y = GetU32(bytes, off);
    off += 4;
    Require(y < classes, ErrorCode::kFormat, "label out of range");
  }
  for (float f : features) {
    Require(f >= 0.0f && f <= 1.0f, ErrorCode::kFormat, "feature outside [0,1]");
  }
  return Dataset(std::move(features), std::move(labels), d, classes);
}

void SaveDataset(const Dataset& ds, const std::filesystem::path& path) {
  auto bytes = EncodeDataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

Dataset LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeDataset(bytes);
}

}  // namespace fha
