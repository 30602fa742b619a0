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

// Source training, the benchmark ladder (WA, FT, SHOT, S+FADA, T+FADA,
// ST+FADA) and the one-step TOHAN schedule.

#ifndef FHA_CORE_TRAINERS_HPP_
#define FHA_CORE_TRAINERS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "data.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "nn.hpp"
#include "pairing.hpp"
#include "rng.hpp"

namespace fha {

struct SourceTrainConfig {
  std::size_t epochs = 60;
  std::size_t batch = 64;
  double lr = nn::kDefaultLearningRate;
  std::size_t hidden = 32;
  double holdout_fraction = 0.2;
  // Hypotheses below this held-out accuracy are rejected.
  double min_accuracy = 0.8;
};

// Frozen (g_s, h_s). Trainers take it by const reference and copy.
struct SourceHypothesis {
  EncoderClassifier model;
  std::string task;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

SourceHypothesis TrainSource(const Dataset& source, const SourceTrainConfig& cfg, std::uint64_t seed,
                             std::string task_name = "");

nn::ModelFile ToModelFile(const SourceHypothesis& h);
SourceHypothesis FromModelFile(const nn::ModelFile& file);

double EvalWa(const SourceHypothesis& h, const Dataset& target_test);

// Defaults follow the reference hyperparameters: lambda 0.2, generator
// batch 32, pair batch 64, Adam 1e-3 everywhere, 500/100/50 epochs.
struct TohanConfig {
  double lambda = losses::kDefaultLambda;
  std::size_t gen_batch = losses::kDefaultGeneratorBatch;
  std::size_t pair_batch = 64;
  double lr_generator = nn::kDefaultLearningRate;
  double lr_pretrain = nn::kDefaultLearningRate;
  double lr_target = nn::kDefaultLearningRate;
  double lr_discriminator = nn::kDefaultLearningRate;
  std::size_t total_epochs = 500;     // T_max
  std::size_t pretrain_epochs = 100;  // T_d
  std::size_t adapt_epochs = 50;      // T_f
  std::size_t per_group = 16;         // pairs per group, 4 * 16 = pair_batch
  std::size_t z_dim = 8;
  std::size_t gen_hidden = 32;
  std::size_t disc_hidden = 32;
  std::size_t finetune_epochs = 50;   // FT and SHOT
  std::uint64_t seed = 0;
};

void ValidateTohanConfig(const TohanConfig& cfg);

enum class Phase { kGenerator, kPretrainDiscriminator, kAdaptTarget, kAdaptDiscriminator, kFinetune };
enum class ParamSet { kGenerators, kTargetModel, kDiscriminator };
std::string_view ToString(Phase p);
std::string_view ToString(ParamSet p);

struct TraceRecord {
  std::size_t epoch = 0;
  Phase phase = Phase::kGenerator;
  int cls = -1;  // generator index for kGenerator
  ParamSet touched = ParamSet::kGenerators;
  std::size_t pool_size = 0;  // |D_m| when the update ran
  std::map<std::string, double> losses;
  // Parameter fingerprints after the update (zero when disabled).
  std::uint64_t generators_fp = 0;
  std::uint64_t target_fp = 0;
  std::uint64_t discriminator_fp = 0;
};

struct Trace {
  bool fingerprints = false;
  std::vector<TraceRecord> records;

  std::string ToJsonl() const;
};

EncoderClassifier TrainFt(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg,
                          Trace* trace = nullptr);
EncoderClassifier TrainShot(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg,
                            Trace* trace = nullptr);

enum class GeneratorMode { kSourceOnly, kTargetOnly, kCombined };

struct GeneratorBank {
  std::vector<nn::Mlp> generators;  // G_n for n = 0..N-1
  std::size_t z_dim = 0;

  std::uint64_t Fingerprint() const;
};

nn::ArchSpec GeneratorArch(std::size_t z_dim, std::size_t hidden, std::size_t out_dim);
nn::ArchSpec DiscriminatorArch(std::size_t embed_width, std::size_t hidden);

// L_Gn for one noise batch under the given mode, with its gradient w.r.t.
// the generator parameters. The source model is read only. targets holds
// the class-n few-shot samples and is unused in source-only mode.
struct GeneratorObjective {
  double value = 0.0;
  double source = 0.0;
  double target = 0.0;
  Eigen::MatrixXd generated;
  nn::ParamVector grad;
};

GeneratorObjective GeneratorLoss(const nn::Mlp& generator, const EncoderClassifier& source, const Eigen::MatrixXd& z,
                                 std::size_t cls, const Eigen::MatrixXd& targets, GeneratorMode mode, double lambda,
                                 double diameter);

// Per-class generators trained through the frozen source model.
class GeneratorTrainer {
 public:
  GeneratorTrainer(const SourceHypothesis& h, const FewShotSet& fs, GeneratorMode mode,
                   const TohanConfig& cfg);

  struct Step {
    Eigen::MatrixXd generated;  // G_n(z) before the update
    double loss = 0.0;
    double source = 0.0;
    double target = 0.0;
  };

  // Draws fresh noise, generates a batch and takes one Adam step on G_n.
  Step Update(std::size_t cls);
  // Samples from G_n without updating it (separate noise stream).
  Eigen::MatrixXd Sample(std::size_t cls, std::size_t count);

  const GeneratorBank& bank() const { return bank_; }
  std::size_t num_classes() const { return bank_.generators.size(); }

 private:
  Eigen::MatrixXd Noise(Rng& rng, std::size_t rows);

  const SourceHypothesis& source_;
  GeneratorMode mode_;
  TohanConfig cfg_;
  GeneratorBank bank_;
  std::vector<nn::AdamState> opt_;
  std::vector<Rng> noise_;
  Rng sample_rng_;
  std::vector<Eigen::MatrixXd> targets_;  // few-shot samples per class
  double diameter_;
};

GeneratorBank TrainGeneratorBank(const SourceHypothesis& h, const FewShotSet& fs, GeneratorMode mode,
                                 const TohanConfig& cfg, Trace* trace = nullptr);

// Target model plus group discriminator; updates alternate between them.
class PairwiseAdapter {
 public:
  PairwiseAdapter(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg);

  PairBatch SampleGroups(const LabeledPool& intermediate);
  // One Adam step on L_D; the target encoder is read, never written.
  double DiscriminatorStep(const PairBatch& batch, double lr);
  // One Adam step on L_{h o g}; the discriminator is read, never written.
  losses::AdaptationLoss TargetStep(const PairBatch& batch, double beta);

  const EncoderClassifier& model() const { return model_; }
  const nn::Mlp& discriminator() const { return discriminator_; }

 private:
  TohanConfig cfg_;
  EncoderClassifier model_;
  nn::Mlp discriminator_;
  nn::AdamState enc_opt_;
  nn::AdamState cls_opt_;
  nn::AdamState disc_opt_;
  LabeledPool target_pool_;
  Rng pair_rng_;
};

// T_d pretraining steps on D, then T_f epochs of (target step, D step).
EncoderClassifier AdaptPairwise(const LabeledPool& intermediate, const FewShotSet& fs,
                                const SourceHypothesis& h, const TohanConfig& cfg, Trace* trace = nullptr);

enum class TwoStepMethod { kSourceFada, kTargetFada, kSourceTargetFada };

EncoderClassifier RunTwoStep(TwoStepMethod method, const SourceHypothesis& h, const FewShotSet& fs,
                             const TohanConfig& cfg, Trace* trace = nullptr);

struct TohanResult {
  EncoderClassifier model;
  GeneratorBank bank;
  nn::Mlp discriminator;
};

TohanResult TrainTohan(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg,
                       Trace* trace = nullptr);

}  // namespace fha

#endif  // FHA_CORE_TRAINERS_HPP_
