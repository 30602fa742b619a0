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

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "error.hpp"
#include "json.hpp"
#include "model.hpp"
#include "test_util.hpp"
#include "trainers.hpp"

namespace fha {
namespace {

using testing::CodeOf;
using testing::FastSource;
using testing::FastTohan;

// One trained hypothesis and few-shot set reused by most cases.
struct Fixture {
  SyntheticTask task;
  SourceHypothesis h;
  FewShotSet fs;

  explicit Fixture(std::uint64_t seed = 0, std::size_t shots = 3)
      : task(MakeSyntheticTask(testing::SmallTask())),
        h(TrainSource(task.source, FastSource(), seed, "rot40")),
        fs(SampleFewShot(task.target, shots, seed)) {}
};

const Fixture& Shared() {
  static const Fixture f;
  return f;
}

TEST_CASE("source training is deterministic and clears the accuracy floor on separable blobs") {
  const auto task = MakeSyntheticTask(PresetTask("rot0-c2", 1));
  SourceTrainConfig cfg;
  const auto a = TrainSource(task.source, cfg, 4);
  const auto b = TrainSource(task.source, cfg, 4);
  CHECK(a.model == b.model);
  CHECK(a.test_accuracy >= 0.95);
  CHECK(Accuracy(a.model, task.target_test) >= 0.95);
  const auto c = TrainSource(task.source, cfg, 5);
  CHECK_FALSE(c.model == a.model);
}

TEST_CASE("source quality gate rejects weak hypotheses") {
  const auto task = MakeSyntheticTask(testing::SmallTask("rot0-c4"));
  SourceTrainConfig cfg;
  cfg.epochs = 1;
  cfg.min_accuracy = 0.999;
  CHECK(CodeOf([&] { TrainSource(task.source, cfg, 0); }) == ErrorCode::kQualityGate);
}

TEST_CASE("source hypothesis survives a model file round trip") {
  const auto& f = Shared();
  const auto back = FromModelFile(nn::ParseModelFile(nn::SerializeModelFile(ToModelFile(f.h))));
  CHECK(back.model == f.h.model);
  CHECK(back.task == "rot40");
  CHECK(back.test_accuracy == f.h.test_accuracy);
  nn::ModelFile broken = ToModelFile(f.h);
  broken.networks.erase("classifier");
  CHECK(CodeOf([&] { FromModelFile(broken); }) == ErrorCode::kFormat);
}

TEST_CASE("WA is the accuracy of the untouched source model") {
  const auto& f = Shared();
  CHECK(EvalWa(f.h, f.task.target_test) == Accuracy(f.h.model, f.task.target_test));
  // Identity shift: WA tracks the held-out source accuracy.
  const auto same = MakeSyntheticTask(testing::SmallTask("rot0"));
  const auto h = TrainSource(same.source, FastSource(), 1);
  CHECK(std::abs(EvalWa(h, same.target_test) - h.test_accuracy) < 0.06);
}

TEST_CASE("FT freezes the encoder and SHOT freezes the classifier") {
  const auto& f = Shared();
  const auto before = f.h.model;
  const auto ft = TrainFt(f.h, f.fs, FastTohan());
  CHECK(ft.encoder.params == before.encoder.params);
  CHECK(ft.classifier.params != before.classifier.params);
  const auto shot = TrainShot(f.h, f.fs, FastTohan());
  CHECK(shot.classifier.params == before.classifier.params);
  CHECK(shot.encoder.params != before.encoder.params);
  CHECK(f.h.model == before);
}

TEST_CASE("zero fine-tuning epochs return the source model") {
  const auto& f = Shared();
  auto cfg = FastTohan();
  cfg.finetune_epochs = 0;
  CHECK(TrainFt(f.h, f.fs, cfg) == f.h.model);
  CHECK(Accuracy(TrainShot(f.h, f.fs, cfg), f.task.target_test) == EvalWa(f.h, f.task.target_test));
}

TEST_CASE("FT cross-entropy falls on average over epochs") {
  int falling = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Fixture f(seed);
    Trace trace;
    auto cfg = FastTohan(seed);
    cfg.finetune_epochs = 50;
    TrainFt(f.h, f.fs, cfg, &trace);
    REQUIRE(trace.records.size() == 50);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      head += trace.records[i].losses.at("ce");
      tail += trace.records[40 + i].losses.at("ce");
    }
    falling += tail < head ? 1 : 0;
  }
  CHECK(falling == 5);
}

TEST_CASE("SHOT does not fall below WA on the rotated task") {
  // Pilot: SHOT >= WA in 10/10 seeds at the default schedule.
  const auto task = MakeSyntheticTask(PresetTask("rot40"));
  int wins = 0;
  TohanConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto h = TrainSource(task.source, SourceTrainConfig{}, seed);
    const auto fs = SampleFewShot(task.target, 3, seed);
    cfg.seed = seed;
    wins += Accuracy(TrainShot(h, fs, cfg), task.target_test) >= EvalWa(h, task.target_test) ? 1 : 0;
  }
  CHECK(wins >= 7);
}

TEST_CASE("source-only generators lower the source loss and stay in the unit cube") {
  const auto& f = Shared();
  auto cfg = FastTohan();
  cfg.total_epochs = 200;
  Trace trace;
  const auto bank = TrainGeneratorBank(f.h, f.fs, GeneratorMode::kSourceOnly, cfg, &trace);
  CHECK(bank.generators.size() == 3);
  double head = 0.0, tail = 0.0;
  const std::size_t n = trace.records.size();
  for (std::size_t i = 0; i < 30; ++i) {
    head += trace.records[i].losses.at("source");
    tail += trace.records[n - 30 + i].losses.at("source");
  }
  CHECK(tail < head);
  GeneratorTrainer sampler(f.h, f.fs, GeneratorMode::kSourceOnly, cfg);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto x = sampler.Sample(c, 500);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() <= 1.0);
  }
}

TEST_CASE("combined generators with lambda zero follow the source-only trajectory") {
  const auto& f = Shared();
  auto cfg = FastTohan();
  cfg.total_epochs = 20;
  cfg.lambda = 0.0;
  const auto a = TrainGeneratorBank(f.h, f.fs, GeneratorMode::kCombined, cfg);
  const auto b = TrainGeneratorBank(f.h, f.fs, GeneratorMode::kSourceOnly, cfg);
  CHECK(a.Fingerprint() == b.Fingerprint());
}

TEST_CASE("source-only and target-only generators diverge after the first update") {
  const auto& f = Shared();
  const auto cfg = FastTohan();
  GeneratorTrainer s(f.h, f.fs, GeneratorMode::kSourceOnly, cfg);
  GeneratorTrainer t(f.h, f.fs, GeneratorMode::kTargetOnly, cfg);
  CHECK(s.bank().Fingerprint() == t.bank().Fingerprint());
  const auto ss = s.Update(0);
  const auto ts = t.Update(0);
  CHECK(ss.generated == ts.generated);
  CHECK(s.bank().generators[0].params != t.bank().generators[0].params);
  CHECK(s.bank().generators[1].params == t.bank().generators[1].params);
}

TEST_CASE("adapter steps touch exactly one parameter set") {
  const auto& f = Shared();
  const auto cfg = FastTohan();
  PairwiseAdapter adapter(f.h, f.fs, cfg);
  const auto pool = MakePool(f.task.target, Domain::kIntermediate);
  for (int i = 0; i < 5; ++i) {
    const auto batch = adapter.SampleGroups(pool);
    const auto model0 = adapter.model();
    const auto disc0 = adapter.discriminator();
    adapter.TargetStep(batch, 0.5);
    CHECK(adapter.discriminator() == disc0);
    CHECK_FALSE(adapter.model() == model0);
    const auto model1 = adapter.model();
    adapter.DiscriminatorStep(batch, cfg.lr_discriminator);
    CHECK(adapter.model() == model1);
    CHECK_FALSE(adapter.discriminator() == disc0);
  }
}

TEST_CASE("a pretrained discriminator separates groups on a separable pool") {
  // Intermediate and target data occupy disjoint corners and classes are
  // well apart, so all four groups are identifiable from phi.
  const auto& f = Shared();
  auto cfg = FastTohan();
  cfg.lr_discriminator = 1e-2;
  Dataset inter(2, 3), target(2, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (std::uint32_t c = 0; c < 3; ++c) {
    for (int i = 0; i < 40; ++i) {
      const float a[2] = {static_cast<float>(0.1 + 0.15 * c + jitter(rng)), static_cast<float>(0.1 + jitter(rng))};
      inter.Append(a, c);
      const float b[2] = {static_cast<float>(0.6 + 0.15 * c + jitter(rng)), static_cast<float>(0.9 + jitter(rng))};
      target.Append(b, c);
    }
  }
  FewShotSet fs = SampleFewShot(target, 7, 0);
  PairwiseAdapter adapter(f.h, fs, cfg);
  const auto pool = MakePool(inter, Domain::kIntermediate);
  for (int step = 0; step < 1500; ++step) adapter.DiscriminatorStep(adapter.SampleGroups(pool), cfg.lr_discriminator);
  const auto held_out = BuildGroups(pool, fs, 250, 12345);
  const auto probs = adapter.discriminator()(Phi(adapter.model().encoder, held_out.data));
  const auto labels = held_out.GroupLabels();
  std::size_t right = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    right += ArgmaxLowest(probs.row(r)) + 1 == labels[static_cast<std::size_t>(r)] ? 1 : 0;
  }
  CHECK(static_cast<double>(right) / static_cast<double>(probs.rows()) >= 0.9);
}

TEST_CASE("adaptation starts with a zero confusion weight") {
  const auto& f = Shared();
  Trace trace;
  const auto pool = MakePool(f.task.target, Domain::kIntermediate);
  AdaptPairwise(pool, f.fs, f.h, FastTohan(), &trace);
  const auto first = std::find_if(trace.records.begin(), trace.records.end(),
                                  [](const TraceRecord& r) { return r.phase == Phase::kAdaptTarget; });
  REQUIRE(first != trace.records.end());
  CHECK(first->losses.at("beta") == 0.0);
  CHECK(first->losses.at("loss") == first->losses.at("classification"));
}

TEST_CASE("no adaptation epochs leave two-step and TOHAN at WA") {
  const auto& f = Shared();
  auto cfg = FastTohan();
  cfg.adapt_epochs = 0;
  const auto wa = EvalWa(f.h, f.task.target_test);
  for (auto m : {TwoStepMethod::kSourceFada, TwoStepMethod::kTargetFada, TwoStepMethod::kSourceTargetFada}) {
    const auto model = RunTwoStep(m, f.h, f.fs, cfg);
    CHECK(model == f.h.model);
    CHECK(Accuracy(model, f.task.target_test) == wa);
  }
  Trace trace;
  const auto tohan = TrainTohan(f.h, f.fs, cfg, &trace);
  CHECK(tohan.model == f.h.model);
  for (const auto& r : trace.records) CHECK(r.phase == Phase::kGenerator);
}

TEST_CASE("TOHAN follows the epoch schedule") {
  const auto& f = Shared();
  const auto cfg = FastTohan();  // T_max 40, T_d 10, T_f 8
  Trace trace;
  trace.fingerprints = true;
  TrainTohan(f.h, f.fs, cfg, &trace);
  const std::size_t start = cfg.total_epochs - cfg.adapt_epochs;
  std::size_t pretrain = 0, target_steps = 0, d_steps = 0;
  std::set<std::size_t> pretrain_epochs;
  for (const auto& r : trace.records) {
    switch (r.phase) {
      case Phase::kPretrainDiscriminator:
        ++pretrain;
        pretrain_epochs.insert(r.epoch);
        break;
      case Phase::kAdaptTarget:
        ++target_steps;
        CHECK(r.epoch >= start);
        CHECK(r.pool_size == 3 * cfg.gen_batch);
        break;
      case Phase::kAdaptDiscriminator:
        ++d_steps;
        CHECK(r.epoch >= start);
        break;
      default:
        break;
    }
  }
  CHECK(pretrain == cfg.pretrain_epochs);
  CHECK(pretrain_epochs == std::set<std::size_t>{start});
  CHECK(target_steps == cfg.adapt_epochs);
  CHECK(d_steps == cfg.adapt_epochs);
}

TEST_CASE("each TOHAN update touches one parameter set") {
  const auto& f = Shared();
  Trace trace;
  trace.fingerprints = true;
  TrainTohan(f.h, f.fs, FastTohan(), &trace);
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    const auto& a = trace.records[i - 1];
    const auto& b = trace.records[i];
    const bool gen = a.generators_fp != b.generators_fp;
    const bool tgt = a.target_fp != b.target_fp;
    const bool dis = a.discriminator_fp != b.discriminator_fp;
    CHECK(int(gen) + int(tgt) + int(dis) <= 1);
    switch (b.touched) {
      case ParamSet::kGenerators: CHECK_FALSE((tgt || dis)); break;
      case ParamSet::kTargetModel: CHECK_FALSE((gen || dis)); break;
      case ParamSet::kDiscriminator: CHECK_FALSE((gen || tgt)); break;
    }
  }
}

TEST_CASE("trainers are deterministic and never modify the source hypothesis") {
  const auto& f = Shared();
  const auto before = ToModelFile(f.h);
  const auto cfg = FastTohan(3);
  const auto a = TrainTohan(f.h, f.fs, cfg);
  const auto b = TrainTohan(f.h, f.fs, cfg);
  CHECK(a.model == b.model);
  CHECK(a.discriminator == b.discriminator);
  CHECK(a.bank.Fingerprint() == b.bank.Fingerprint());
  CHECK(RunTwoStep(TwoStepMethod::kSourceTargetFada, f.h, f.fs, cfg) ==
        RunTwoStep(TwoStepMethod::kSourceTargetFada, f.h, f.fs, cfg));
  CHECK(nn::SerializeModelFile(ToModelFile(f.h)) == nn::SerializeModelFile(before));
}

TEST_CASE("trace export has one JSON object per record") {
  const auto& f = Shared();
  Trace trace;
  TrainTohan(f.h, f.fs, FastTohan(), &trace);
  std::istringstream in(trace.ToJsonl());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("phase"));
    CHECK(j.contains("losses"));
    ++n;
  }
  CHECK(n == trace.records.size());
}

TEST_CASE("invalid TOHAN configurations are rejected") {
  const auto& f = Shared();
  auto cfg = FastTohan();
  cfg.adapt_epochs = cfg.total_epochs;
  CHECK(CodeOf([&] { TrainTohan(f.h, f.fs, cfg); }) == ErrorCode::kInvalidArgument);
  cfg = FastTohan();
  cfg.gen_batch = 0;
  CHECK(CodeOf([&] { ValidateTohanConfig(cfg); }) == ErrorCode::kInvalidArgument);
  cfg = FastTohan();
  cfg.lr_target = -1.0;
  CHECK(CodeOf([&] { ValidateTohanConfig(cfg); }) == ErrorCode::kInvalidArgument);
  TohanConfig defaults;
  CHECK(defaults.lambda == 0.2);
  CHECK(defaults.gen_batch == 32);
  CHECK(defaults.pair_batch == 64);
  CHECK(defaults.lr_generator == 1e-3);
  CHECK(defaults.total_epochs == 500);
  CHECK(defaults.pretrain_epochs == 100);
  CHECK(defaults.adapt_epochs == 50);
}

}  // namespace
}  // namespace fha
