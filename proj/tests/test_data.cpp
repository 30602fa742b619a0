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

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "data.hpp"
#include "doctest.h"
#include "error.hpp"
#include "model.hpp"
#include "test_util.hpp"
#include "trainers.hpp"

namespace fha {
namespace {

using testing::CodeOf;

void CheckUnitCube(const Dataset& ds) {
  for (float f : ds.features()) {
    REQUIRE(f >= 0.0f);
    REQUIRE(f <= 1.0f);
  }
}

Eigen::VectorXd ClassMean(const Dataset& ds, std::uint32_t c) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.dim()));
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.label(i) != c) continue;
    for (std::size_t j = 0; j < ds.dim(); ++j) m[static_cast<Eigen::Index>(j)] += ds.row(i)[j];
    ++n;
  }
  return m / static_cast<double>(n);
}

TEST_CASE("generated features stay inside the unit cube") {
  for (const char* name : {"rot0", "rot40", "rot180-c2", "rot90-c4-d5", "rot30-c3-d16"}) {
    for (std::uint64_t seed : {0u, 7u}) {
      TaskSpec spec = PresetTask(name, seed);
      spec.translation.assign(spec.dim, 0.5);
      const auto t = MakeSyntheticTask(spec);
      CheckUnitCube(t.source);
      CheckUnitCube(t.target);
      CheckUnitCube(t.target_test);
      CHECK(t.source.size() == spec.source_per_class * spec.num_classes);
      CHECK(t.target_test.size() == spec.test_per_class * spec.num_classes);
    }
  }
}

TEST_CASE("synthetic tasks are deterministic under the seed") {
  const auto spec = PresetTask("rot40", 3);
  const auto a = MakeSyntheticTask(spec);
  const auto b = MakeSyntheticTask(spec);
  CHECK(a.source == b.source);
  CHECK(a.target == b.target);
  CHECK(a.target_test == b.target_test);
  CHECK(a.source.Checksum() == b.source.Checksum());
  const auto c = MakeSyntheticTask(PresetTask("rot40", 4));
  CHECK(c.source.Checksum() != a.source.Checksum());
}

TEST_CASE("target test split is disjoint from the target training split") {
  const auto t = MakeSyntheticTask(PresetTask("rot40", 1));
  std::set<std::vector<float>> train;
  for (std::size_t i = 0; i < t.target.size(); ++i) train.emplace(t.target.row(i).begin(), t.target.row(i).end());
  for (std::size_t i = 0; i < t.target_test.size(); ++i) {
    CHECK(train.count({t.target_test.row(i).begin(), t.target_test.row(i).end()}) == 0);
  }
}

TEST_CASE("identity transform keeps class means within three standard errors") {
  // Per seed, every (class, coordinate) mean difference must stay under
  // 3 SE; at least 95% of seeds must pass.
  int passing = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    TaskSpec spec = PresetTask("rot0", static_cast<std::uint64_t>(s));
    spec.source_per_class = 60;
    spec.target_per_class = 60;
    spec.test_per_class = 1;
    const auto t = MakeSyntheticTask(spec);
    bool ok = true;
    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
      const auto ms = ClassMean(t.source, c);
      const auto mt = ClassMean(t.target, c);
      for (Eigen::Index j = 0; j < ms.size(); ++j) {
        auto var = [&](const Dataset& ds, double mean) {
          double acc = 0.0;
          std::size_t n = 0;
          for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.label(i) != c) continue;
            const double v = ds.row(i)[static_cast<std::size_t>(j)] - mean;
            acc += v * v;
            ++n;
          }
          return acc / static_cast<double>(n - 1) / static_cast<double>(n);
        };
        const double se = std::sqrt(var(t.source, ms[j]) + var(t.target, mt[j]));
        if (std::abs(ms[j] - mt[j]) >= 3.0 * se) ok = false;
      }
    }
    passing += ok ? 1 : 0;
  }
  CHECK(passing >= 95);
}

TEST_CASE("a 180 degree rotation swaps antipodal class means") {
  const auto spec = PresetTask("rot180-c2", 5);
  const auto t = MakeSyntheticTask(spec);
  const auto s0 = ClassMean(t.source, 0), s1 = ClassMean(t.source, 1);
  const auto t0 = ClassMean(t.target_test, 0), t1 = ClassMean(t.target_test, 1);
  CHECK((t0 - s1).norm() < 0.02);
  CHECK((t1 - s0).norm() < 0.02);
}

TEST_CASE("a 180 degree swap makes the source model wrong on the target") {
  // Accuracy on the swapped task is close to one minus the source accuracy.
  const auto spec = PresetTask("rot180-c2", 2);
  auto same = spec;
  same.rotation_deg = 0.0;
  const auto t = MakeSyntheticTask(spec);
  const auto source_test = MakeSyntheticTask(same).target_test;
  const auto h = TrainSource(t.source, testing::FastSource(), 0);
  const double src = Accuracy(h.model, source_test);
  const double wa = EvalWa(h, t.target_test);
  CHECK(src > 0.9);
  CHECK(wa < 0.5);
  CHECK(std::abs(wa - (1.0 - src)) < 0.03);
}

TEST_CASE("invalid task specs are rejected") {
  TaskSpec ok = PresetTask("rot40");
  auto code = [](TaskSpec s) { return CodeOf([&] { MakeSyntheticTask(s); }); };
  TaskSpec s = ok;
  s.num_classes = 1;
  s.classes.resize(1);
  CHECK(code(s) == ErrorCode::kInvalidArgument);
  s = ok;
  s.source_per_class = 0;
  CHECK(code(s) == ErrorCode::kInvalidArgument);
  s = ok;
  s.classes[0].covariance = {1.0, 2.0, 2.0, 1.0};  // indefinite
  CHECK(code(s) == ErrorCode::kInvalidArgument);
  s = ok;
  s.dim = 0;
  CHECK(code(s) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { PresetTask("spin40"); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { PresetTask("rot40-x3"); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { PresetTask("rot40-c1"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("few-shot sampling returns n_t per class without duplicates") {
  const auto t = MakeSyntheticTask(PresetTask("rot40-c4", 0));
  for (std::size_t n = 1; n <= kMaxShots; ++n) {
    const auto fs = SampleFewShot(t.target, n, 11);
    CHECK(fs.shots == n);
    CHECK(fs.samples.size() == n * 4);
    const auto counts = fs.samples.ClassCounts();
    for (auto c : counts) CHECK(c == n);
    std::set<std::size_t> seen;
    for (std::uint32_t c = 0; c < 4; ++c) {
      REQUIRE(fs.indices[c].size() == n);
      for (auto i : fs.indices[c]) {
        CHECK(t.target.label(i) == c);
        CHECK(seen.insert(i).second);
      }
    }
  }
}

TEST_CASE("few-shot sampling is deterministic and seed dependent") {
  const auto t = MakeSyntheticTask(PresetTask("rot40", 0));
  const auto a = SampleFewShot(t.target, 3, 5);
  const auto b = SampleFewShot(t.target, 3, 5);
  const auto c = SampleFewShot(t.target, 3, 6);
  CHECK(a.indices == b.indices);
  CHECK(a.samples == b.samples);
  CHECK(a.indices != c.indices);
}

TEST_CASE("few-shot protocol bounds") {
  const auto t = MakeSyntheticTask(PresetTask("rot40", 0));
  CHECK(CodeOf([&] { SampleFewShot(t.target, 8, 0); }) == ErrorCode::kProtocol);
  CHECK(CodeOf([&] { SampleFewShot(t.target, 0, 0); }) == ErrorCode::kProtocol);
  const auto one = SampleFewShot(t.target, 1, 0);
  CHECK(one.samples.size() == 3);
  // A class with two samples cannot give three shots.
  Dataset tiny(2, 2);
  const float a[2] = {0.1f, 0.2f};
  for (int i = 0; i < 5; ++i) tiny.Append(a, 0);
  tiny.Append(a, 1);
  tiny.Append(a, 1);
  CHECK(CodeOf([&] { SampleFewShot(tiny, 3, 0); }) == ErrorCode::kInsufficientData);
}

TEST_CASE("dataset file round trip is bit exact") {
  testing::TempDir dir("data");
  const auto t = MakeSyntheticTask(PresetTask("rot40-c3-d5", 9));
  const auto path = dir.path() / "s.fhd";
  SaveDataset(t.source, path);
  const auto back = LoadDataset(path);
  CHECK(back == t.source);
  CHECK(std::memcmp(back.features().data(), t.source.features().data(), t.source.features().size() * 4) == 0);
  CHECK(std::filesystem::file_size(path) == 16 + t.source.size() * (5 * 4 + 4));
}

TEST_CASE("dataset encoding matches the documented byte layout") {
  Dataset ds(2, 3);
  const float r0[2] = {0.0f, 1.0f};
  const float r1[2] = {0.5f, 0.25f};
  ds.Append(r0, 2);
  ds.Append(r1, 0);
  const auto bytes = EncodeDataset(ds);
  std::vector<std::uint8_t> expect = {'F', 'H', 'D', '1', 2, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0};
  for (float f : {0.0f, 1.0f, 0.5f, 0.25f}) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int k = 0; k < 4; ++k) expect.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
  }
  for (std::uint32_t y : {2u, 0u}) {
    for (int k = 0; k < 4; ++k) expect.push_back(static_cast<std::uint8_t>(y >> (8 * k)));
  }
  CHECK(bytes == expect);
}

TEST_CASE("empty dataset encodes as a bare header") {
  Dataset empty(4, 2);
  const auto bytes = EncodeDataset(empty);
  CHECK(bytes.size() == 16);
  const auto back = DecodeDataset(bytes);
  CHECK(back.empty());
  CHECK(back.dim() == 4);
  CHECK(back.num_classes() == 2);
}

TEST_CASE("malformed dataset files raise format errors") {
  Dataset ds(2, 2);
  const float r[2] = {0.3f, 0.6f};
  ds.Append(r, 1);
  const auto good = EncodeDataset(ds);
  auto decode = [](std::vector<std::uint8_t> b) { return CodeOf([&] { DecodeDataset(b); }); };

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(decode(bad_magic) == ErrorCode::kFormat);
  CHECK(decode({good.begin(), good.begin() + 10}) == ErrorCode::kFormat);
  CHECK(decode({good.begin(), good.end() - 1}) == ErrorCode::kFormat);
  auto trailing = good;
  trailing.push_back(0);
  CHECK(decode(trailing) == ErrorCode::kFormat);
  auto bad_label = good;
  bad_label[good.size() - 4] = 7;
  CHECK(decode(bad_label) == ErrorCode::kFormat);
  auto bad_feature = good;
  const float big = 1.5f;
  std::memcpy(bad_feature.data() + 16, &big, 4);
  CHECK(decode(bad_feature) == ErrorCode::kFormat);
  CHECK(CodeOf([] { LoadDataset("/nonexistent/dir/x.fhd"); }) == ErrorCode::kIo);
}

TEST_CASE("dataset constructor enforces ranges") {
  CHECK(CodeOf([] { Dataset({0.5f, 1.5f}, {0}, 2, 2); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { Dataset({0.5f, 0.5f}, {2}, 2, 2); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { Dataset({0.5f}, {0}, 2, 2); }) == ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace fha
