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

#include "trainers.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

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

Eigen::MatrixXd Rows(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

// One shuffled minibatch pass of cross-entropy training. A null optimizer
// freezes that half of the model. Returns the mean batch loss.
double SupervisedEpoch(EncoderClassifier& m, nn::AdamState* enc_opt, nn::AdamState* cls_opt,
                       const Eigen::MatrixXd& x, const std::vector<int>& y, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Shuffle(order, rng);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
    const Eigen::MatrixXd xb = Rows(x, idx);
    std::vector<int> yb;
    yb.reserve(idx.size());
    for (auto i : idx) yb.push_back(y[i]);

    const auto enc_trace = nn::ForwardWithTrace(m.encoder.arch, m.encoder.params, xb);
    const auto cls_trace = nn::ForwardWithTrace(m.classifier.arch, m.classifier.params, enc_trace.output());
    const auto ce = losses::CrossEntropy(cls_trace.output(), yb);
    Require(std::isfinite(ce.value), ErrorCode::kNumerical, "training diverged: non-finite loss");
    const auto cls_grad = nn::Backward(m.classifier.arch, m.classifier.params, cls_trace, ce.grad);
    if (enc_opt != nullptr) {
      const auto enc_grad = nn::Backward(m.encoder.arch, m.encoder.params, enc_trace, cls_grad.input);
      nn::AdamStep(*enc_opt, m.encoder.params, enc_grad.params);
    }
    if (cls_opt != nullptr) nn::AdamStep(*cls_opt, m.classifier.params, cls_grad.params);
    total += ce.value;
    ++batches;
  }
  return batches ? total / static_cast<double>(batches) : 0.0;
}

// FT and SHOT differ only in which half is trainable.
EncoderClassifier Finetune(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg,
                           bool train_encoder, bool train_classifier, Trace* trace) {
  ValidateTohanConfig(cfg);
  Require(!fs.samples.empty(), ErrorCode::kInvalidArgument, "few-shot set is empty");
  EncoderClassifier m = h.model;
  nn::AdamState enc_opt(m.encoder.params.size(), cfg.lr_target);
  nn::AdamState cls_opt(m.classifier.params.size(), cfg.lr_target);
  const Eigen::MatrixXd x = fs.samples.FeatureMatrix();
  const std::vector<int> y = fs.samples.IntLabels();
  Rng rng(DeriveSeed(cfg.seed, "finetune"));
  for (std::size_t e = 0; e < cfg.finetune_epochs; ++e) {
    const double loss = SupervisedEpoch(m, train_encoder ? &enc_opt : nullptr,
                                        train_classifier ? &cls_opt : nullptr, x, y, cfg.pair_batch, rng);
    if (trace != nullptr) {
      TraceRecord r;
      r.epoch = e;
      r.phase = Phase::kFinetune;
      r.touched = ParamSet::kTargetModel;
      r.losses["ce"] = loss;
      if (trace->fingerprints) r.target_fp = m.encoder.Fingerprint() ^ MixSeed(m.classifier.Fingerprint());
      trace->records.push_back(std::move(r));
    }
  }
  return m;
}

std::uint64_t ModelFingerprint(const EncoderClassifier& m) {
  return m.encoder.Fingerprint() ^ MixSeed(m.classifier.Fingerprint());
}

void Record(Trace* trace, TraceRecord r, const GeneratorBank* bank, const PairwiseAdapter* adapter) {
  if (trace == nullptr) return;
  if (trace->fingerprints) {
    if (bank != nullptr) r.generators_fp = bank->Fingerprint();
    if (adapter != nullptr) {
      r.target_fp = ModelFingerprint(adapter->model());
      r.discriminator_fp = adapter->discriminator().Fingerprint();
    }
  }
  trace->records.push_back(std::move(r));
}

void AppendRows(LabeledPool& pool, const Eigen::MatrixXd& rows, int label) {
  const Eigen::Index start = pool.x.rows();
  pool.x.conservativeResize(start + rows.rows(), rows.cols());
  pool.x.bottomRows(rows.rows()) = rows;
  pool.y.insert(pool.y.end(), static_cast<std::size_t>(rows.rows()), label);
}

LabeledPool EmptyIntermediatePool(int num_classes, Eigen::Index dim) {
  LabeledPool pool;
  pool.domain = Domain::kIntermediate;
  pool.num_classes = num_classes;
  pool.x.resize(0, dim);
  return pool;
}

void RunAdaptation(PairwiseAdapter& adapter, const LabeledPool& pool, const TohanConfig& cfg,
                   std::size_t epoch, double progress, Trace* trace, const GeneratorBank* bank) {
  const PairBatch batch = adapter.SampleGroups(pool);
  const double beta = losses::BetaSchedule(progress);
  const auto target = adapter.TargetStep(batch, beta);
  TraceRecord r;
  r.epoch = epoch;
  r.phase = Phase::kAdaptTarget;
  r.touched = ParamSet::kTargetModel;
  r.pool_size = pool.size();
  r.losses = {{"loss", target.value}, {"confusion", target.confusion},
              {"classification", target.classification}, {"beta", beta}};
  Record(trace, std::move(r), bank, &adapter);

  const double d_loss = adapter.DiscriminatorStep(batch, cfg.lr_discriminator);
  TraceRecord rd;
  rd.epoch = epoch;
  rd.phase = Phase::kAdaptDiscriminator;
  rd.touched = ParamSet::kDiscriminator;
  rd.pool_size = pool.size();
  rd.losses = {{"loss", d_loss}};
  Record(trace, std::move(rd), bank, &adapter);
}

void RunPretraining(PairwiseAdapter& adapter, const LabeledPool& pool, const TohanConfig& cfg,
                    std::size_t epoch, Trace* trace, const GeneratorBank* bank) {
  for (std::size_t i = 0; i < cfg.pretrain_epochs; ++i) {
    const PairBatch batch = adapter.SampleGroups(pool);
    const double loss = adapter.DiscriminatorStep(batch, cfg.lr_pretrain);
    TraceRecord r;
    r.epoch = epoch;
    r.phase = Phase::kPretrainDiscriminator;
    r.touched = ParamSet::kDiscriminator;
    r.pool_size = pool.size();
    r.losses = {{"loss", loss}, {"step", static_cast<double>(i)}};
    Record(trace, std::move(r), bank, &adapter);
  }
}

}  // namespace

std::string_view ToString(Phase p) {
  switch (p) {
    case Phase::kGenerator: return "generator";
    case Phase::kPretrainDiscriminator: return "pretrain_d";
    case Phase::kAdaptTarget: return "adapt_target";
    case Phase::kAdaptDiscriminator: return "adapt_d";
    case Phase::kFinetune: return "finetune";
  }
  return "?";
}

std::string_view ToString(ParamSet p) {
  switch (p) {
    case ParamSet::kGenerators: return "generators";
    case ParamSet::kTargetModel: return "target_model";
    case ParamSet::kDiscriminator: return "discriminator";
  }
  return "?";
}

std::string Trace::ToJsonl() const {
  std::ostringstream os;
  for (const auto& r : records) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["phase"] = ToString(r.phase);
    if (r.cls >= 0) j["class"] = r.cls;
    j["touched"] = ToString(r.touched);
    j["pool_size"] = r.pool_size;
    j["losses"] = r.losses;
    os << j.dump() << '\n';
  }
  return os.str();
}

SourceHypothesis TrainSource(const Dataset& source, const SourceTrainConfig& cfg, std::uint64_t seed,
                             std::string task_name) {
  Require(source.size() >= 2, ErrorCode::kInvalidArgument, "source dataset needs >= 2 samples");
  Require(cfg.epochs >= 1 && cfg.batch >= 1 && cfg.hidden >= 1, ErrorCode::kInvalidArgument,
          "source training counts must be positive");
  Require(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0, ErrorCode::kInvalidArgument,
          "holdout fraction must be in [0,1)");
  for (std::size_t c : source.ClassCounts()) {
    Require(c > 0, ErrorCode::kInsufficientData, "every class needs a source sample");
  }

  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(DeriveSeed(seed, "split"));
  Shuffle(order, split_rng);
  const auto holdout = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(source.size())));
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
  const Dataset train = source.Subset(train_idx);
  const Dataset test = holdout > 0 ? source.Subset(test_idx) : train;

  SourceHypothesis h;
  h.task = std::move(task_name);
  h.seed = seed;
  const auto d = source.dim();
  h.model.encoder.arch = nn::MakeMlp({d, cfg.hidden, cfg.hidden}, nn::Activation::kTanh, nn::Activation::kTanh,
                                     nn::Head::kLinear);
  h.model.encoder.params = nn::InitParams(h.model.encoder.arch, DeriveSeed(seed, "encoder"));
  h.model.classifier.arch = nn::MakeMlp({cfg.hidden, source.num_classes()}, nn::Activation::kIdentity,
                                        nn::Activation::kIdentity, nn::Head::kSoftmax);
  h.model.classifier.params = nn::InitParams(h.model.classifier.arch, DeriveSeed(seed, "classifier"));

  nn::AdamState enc_opt(h.model.encoder.params.size(), cfg.lr);
  nn::AdamState cls_opt(h.model.classifier.params.size(), cfg.lr);
  const Eigen::MatrixXd x = train.FeatureMatrix();
  const std::vector<int> y = train.IntLabels();
  Rng rng(DeriveSeed(seed, "source-batches"));
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double loss = SupervisedEpoch(h.model, &enc_opt, &cls_opt, x, y, cfg.batch, rng);
    if (GetLogLevel() >= LogLevel::kDebug) {
      Log(LogLevel::kDebug, "source epoch " + std::to_string(e) + " ce " + FormatDouble(loss));
    }
  }
  h.train_accuracy = Accuracy(h.model, train);
  h.test_accuracy = Accuracy(h.model, test);
  Require(h.test_accuracy >= cfg.min_accuracy, ErrorCode::kQualityGate,
          "source hypothesis rejected: held-out accuracy " + FormatDouble(h.test_accuracy) + " < " +
              FormatDouble(cfg.min_accuracy));
  return h;
}

nn::ModelFile ToModelFile(const SourceHypothesis& h) {
  nn::ModelFile f;
  f.seed = h.seed;
  f.networks["encoder"] = h.model.encoder;
  f.networks["classifier"] = h.model.classifier;
  f.meta["kind"] = "source_hypothesis";
  f.meta["task"] = h.task;
  f.meta["train_accuracy"] = FormatDouble(h.train_accuracy);
  f.meta["test_accuracy"] = FormatDouble(h.test_accuracy);
  return f;
}

SourceHypothesis FromModelFile(const nn::ModelFile& f) {
  auto enc = f.networks.find("encoder");
  auto cls = f.networks.find("classifier");
  Require(enc != f.networks.end() && cls != f.networks.end(), ErrorCode::kFormat,
          "model file needs 'encoder' and 'classifier' networks");
  Require(enc->second.arch.output_width() == cls->second.arch.input_width(), ErrorCode::kFormat,
          "encoder output does not feed the classifier");
  Require(cls->second.arch.head == nn::Head::kSoftmax, ErrorCode::kFormat, "classifier needs a softmax head");
  SourceHypothesis h;
  h.model = {enc->second, cls->second};
  h.seed = f.seed;
  auto get = [&](const char* key) {
    auto it = f.meta.find(key);
    return it == f.meta.end() ? std::string() : it->second;
  };
  h.task = get("task");
  auto num = [&](const char* key) {
    const std::string s = get(key);
    return s.empty() ? 0.0 : std::stod(s);
  };
  h.train_accuracy = num("train_accuracy");
  h.test_accuracy = num("test_accuracy");
  return h;
}

double EvalWa(const SourceHypothesis& h, const Dataset& target_test) { return Accuracy(h.model, target_test); }

void ValidateTohanConfig(const TohanConfig& cfg) {
  auto bad = [](const std::string& m) { Fail(ErrorCode::kInvalidArgument, "invalid TOHAN config: " + m); };
  if (cfg.lambda < 0.0) bad("lambda must be >= 0");
  if (cfg.gen_batch == 0 || cfg.pair_batch == 0 || cfg.per_group == 0 || cfg.z_dim == 0 ||
      cfg.gen_hidden == 0 || cfg.disc_hidden == 0) {
    bad("batch sizes and widths must be positive");
  }
  for (double lr : {cfg.lr_generator, cfg.lr_pretrain, cfg.lr_target, cfg.lr_discriminator}) {
    if (!(lr > 0.0) || !std::isfinite(lr)) bad("learning rates must be positive");
  }
  if (cfg.total_epochs == 0) bad("total_epochs must be positive");
  if (cfg.adapt_epochs >= cfg.total_epochs) bad("adapt_epochs must be < total_epochs");
}

EncoderClassifier TrainFt(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg, Trace* trace) {
  return Finetune(h, fs, cfg, /*train_encoder=*/false, /*train_classifier=*/true, trace);
}

EncoderClassifier TrainShot(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg, Trace* trace) {
  return Finetune(h, fs, cfg, /*train_encoder=*/true, /*train_classifier=*/false, trace);
}

std::uint64_t GeneratorBank::Fingerprint() const {
  std::uint64_t h = 0;
  for (const auto& g : generators) h = MixSeed(h ^ g.Fingerprint());
  return h;
}

nn::ArchSpec GeneratorArch(std::size_t z_dim, std::size_t hidden, std::size_t out_dim) {
  return nn::MakeMlp({z_dim, hidden, out_dim}, nn::Activation::kTanh, nn::Activation::kLogistic, nn::Head::kLinear);
}

nn::ArchSpec DiscriminatorArch(std::size_t embed_width, std::size_t hidden) {
  return nn::MakeMlp({2 * embed_width, hidden, 4}, nn::Activation::kTanh, nn::Activation::kIdentity,
                     nn::Head::kSoftmax);
}

GeneratorTrainer::GeneratorTrainer(const SourceHypothesis& h, const FewShotSet& fs, GeneratorMode mode,
                                   const TohanConfig& cfg)
    : source_(h), mode_(mode), cfg_(cfg), sample_rng_(DeriveSeed(cfg.seed, "generator-samples")) {
  ValidateTohanConfig(cfg);
  const std::size_t n_classes = h.model.classifier.arch.output_width();
  const std::size_t dim = h.model.encoder.arch.input_width();
  diameter_ = losses::L1Diameter(dim);
  bank_.z_dim = cfg.z_dim;
  const auto arch = GeneratorArch(cfg.z_dim, cfg.gen_hidden, dim);
  for (std::size_t n = 0; n < n_classes; ++n) {
    bank_.generators.push_back({arch, nn::InitParams(arch, DeriveSeed(cfg.seed, "generator/" + std::to_string(n)))});
    opt_.emplace_back(arch.param_count(), cfg.lr_generator);
    noise_.emplace_back(DeriveSeed(cfg.seed, "noise/" + std::to_string(n)));
  }
  if (mode != GeneratorMode::kSourceOnly) {
    Require(fs.samples.dim() == dim, ErrorCode::kShapeMismatch, "few-shot samples do not match the source model");
    Require(fs.samples.num_classes() == n_classes, ErrorCode::kShapeMismatch,
            "few-shot class count does not match the source model");
    const Eigen::MatrixXd x = fs.samples.FeatureMatrix();
    targets_.resize(n_classes);
    for (std::size_t n = 0; n < n_classes; ++n) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < fs.samples.size(); ++i) {
        if (fs.samples.label(i) == n) idx.push_back(i);
      }
      Require(!idx.empty(), ErrorCode::kInsufficientData,
              "no few-shot target sample for class " + std::to_string(n));
      targets_[n] = Rows(x, idx);
    }
  }
}

Eigen::MatrixXd GeneratorTrainer::Noise(Rng& rng, std::size_t rows) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg_.z_dim));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
  }
  return z;
}

GeneratorObjective GeneratorLoss(const nn::Mlp& generator, const EncoderClassifier& source, const Eigen::MatrixXd& z,
                                 std::size_t cls, const Eigen::MatrixXd& targets, GeneratorMode mode, double lambda,
                                 double diameter) {
  const auto g_trace = nn::ForwardWithTrace(generator.arch, generator.params, z);
  const Eigen::MatrixXd& x = g_trace.output();

  const auto& enc = source.encoder;
  const auto& cls_net = source.classifier;
  const auto e_trace = nn::ForwardWithTrace(enc.arch, enc.params, x);
  const auto c_trace = nn::ForwardWithTrace(cls_net.arch, cls_net.params, e_trace.output());
  Require(cls < static_cast<std::size_t>(c_trace.output().cols()), ErrorCode::kInvalidArgument,
          "generator index out of range");
  const Eigen::VectorXd class_probs = c_trace.output().col(static_cast<Eigen::Index>(cls));

  GeneratorObjective out;
  out.generated = x;
  Eigen::MatrixXd d_x = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  const auto source_loss = losses::GenSourceLoss(class_probs);
  out.source = source_loss.value;
  if (mode != GeneratorMode::kTargetOnly) {
    Eigen::MatrixXd d_probs = Eigen::MatrixXd::Zero(c_trace.output().rows(), c_trace.output().cols());
    d_probs.col(static_cast<Eigen::Index>(cls)) = source_loss.grad;
    const auto d_embed = nn::Backward(cls_net.arch, cls_net.params, c_trace, d_probs).input;
    d_x = nn::Backward(enc.arch, enc.params, e_trace, d_embed).input;
  }
  switch (mode) {
    case GeneratorMode::kSourceOnly:
      out.value = out.source;
      break;
    case GeneratorMode::kTargetOnly: {
      const auto t = losses::GenTargetLoss(x, targets, diameter);
      out.target = t.value;
      out.value = t.value;
      d_x = t.grad;
      break;
    }
    case GeneratorMode::kCombined: {
      losses::GenLossConfig lc;
      lc.cls = cls;
      lc.batch = static_cast<std::size_t>(z.rows());
      lc.lambda = lambda;
      lc.diameter = diameter;
      const auto total = losses::GenTotal(class_probs, x, targets, lc);
      out.target = total.target;
      out.value = total.value;
      d_x += total.d_generated;
      break;
    }
  }
  out.grad = nn::Backward(generator.arch, generator.params, g_trace, d_x).params;
  return out;
}

GeneratorTrainer::Step GeneratorTrainer::Update(std::size_t cls) {
  Require(cls < num_classes(), ErrorCode::kInvalidArgument, "generator index out of range");
  nn::Mlp& gen = bank_.generators[cls];
  const Eigen::MatrixXd z = Noise(noise_[cls], cfg_.gen_batch);
  static const Eigen::MatrixXd kNoTargets;
  auto obj = GeneratorLoss(gen, source_.model, z, cls, targets_.empty() ? kNoTargets : targets_[cls], mode_,
                           cfg_.lambda, diameter_);
  Require(std::isfinite(obj.value), ErrorCode::kNumerical, "generator loss is not finite");
  nn::AdamStep(opt_[cls], gen.params, obj.grad);
  Step step;
  step.generated = std::move(obj.generated);
  step.loss = obj.value;
  step.source = obj.source;
  step.target = obj.target;
  return step;
}

Eigen::MatrixXd GeneratorTrainer::Sample(std::size_t cls, std::size_t count) {
  Require(cls < num_classes(), ErrorCode::kInvalidArgument, "generator index out of range");
  return bank_.generators[cls](Noise(sample_rng_, count));
}

GeneratorBank TrainGeneratorBank(const SourceHypothesis& h, const FewShotSet& fs, GeneratorMode mode,
                                 const TohanConfig& cfg, Trace* trace) {
  GeneratorTrainer gens(h, fs, mode, cfg);
  for (std::size_t t = 0; t < cfg.total_epochs; ++t) {
    for (std::size_t n = 0; n < gens.num_classes(); ++n) {
      const auto step = gens.Update(n);
      if (trace != nullptr) {
        TraceRecord r;
        r.epoch = t;
        r.phase = Phase::kGenerator;
        r.cls = static_cast<int>(n);
        r.touched = ParamSet::kGenerators;
        r.pool_size = (n + 1) * cfg.gen_batch;
        r.losses = {{"loss", step.loss}, {"source", step.source}, {"target", step.target}};
        Record(trace, std::move(r), &gens.bank(), nullptr);
      }
    }
  }
  return gens.bank();
}

PairwiseAdapter::PairwiseAdapter(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg)
    : cfg_(cfg),
      model_(h.model),
      discriminator_{DiscriminatorArch(h.model.encoder.arch.output_width(), cfg.disc_hidden), {}},
      enc_opt_(h.model.encoder.params.size(), cfg.lr_target),
      cls_opt_(h.model.classifier.params.size(), cfg.lr_target),
      pair_rng_(DeriveSeed(cfg.seed, "pair-stream")) {
  ValidateTohanConfig(cfg);
  Require(!fs.samples.empty(), ErrorCode::kInvalidArgument, "few-shot set is empty");
  Require(h.model.classifier.arch.output_width() >= 2, ErrorCode::kProtocol,
          "pairwise adaptation needs at least two classes");
  discriminator_.params = nn::InitParams(discriminator_.arch, DeriveSeed(cfg.seed, "discriminator"));
  disc_opt_ = nn::AdamState(discriminator_.params.size(), cfg.lr_discriminator);
  target_pool_ = MakePool(fs.samples, Domain::kTarget);
}

PairBatch PairwiseAdapter::SampleGroups(const LabeledPool& intermediate) {
  return BuildGroups(intermediate, target_pool_, cfg_.per_group, pair_rng_());
}

double PairwiseAdapter::DiscriminatorStep(const PairBatch& batch, double lr) {
  const auto loss = losses::GroupDiscriminatorLoss(batch, model_.encoder, discriminator_);
  Require(std::isfinite(loss.value), ErrorCode::kNumerical, "discriminator loss is not finite");
  disc_opt_.lr = lr;
  nn::AdamStep(disc_opt_, discriminator_.params, loss.d_discriminator);
  return loss.value;
}

losses::AdaptationLoss PairwiseAdapter::TargetStep(const PairBatch& batch, double beta) {
  auto loss = losses::ComputeAdaptationLoss(batch.Select(Group::kG2), batch.Select(Group::kG4), discriminator_,
                                            model_, target_pool_.x, target_pool_.y, beta);
  Require(std::isfinite(loss.value), ErrorCode::kNumerical, "adaptation loss is not finite");
  nn::AdamStep(enc_opt_, model_.encoder.params, loss.d_encoder);
  nn::AdamStep(cls_opt_, model_.classifier.params, loss.d_classifier);
  return loss;
}

EncoderClassifier AdaptPairwise(const LabeledPool& intermediate, const FewShotSet& fs, const SourceHypothesis& h,
                                const TohanConfig& cfg, Trace* trace) {
  PairwiseAdapter adapter(h, fs, cfg);
  if (cfg.adapt_epochs == 0) return adapter.model();
  RunPretraining(adapter, intermediate, cfg, 0, trace, nullptr);
  for (std::size_t e = 0; e < cfg.adapt_epochs; ++e) {
    RunAdaptation(adapter, intermediate, cfg, e, static_cast<double>(e) / static_cast<double>(cfg.adapt_epochs),
                  trace, nullptr);
  }
  return adapter.model();
}

EncoderClassifier RunTwoStep(TwoStepMethod method, const SourceHypothesis& h, const FewShotSet& fs,
                             const TohanConfig& cfg, Trace* trace) {
  const GeneratorMode mode = method == TwoStepMethod::kSourceFada   ? GeneratorMode::kSourceOnly
                             : method == TwoStepMethod::kTargetFada ? GeneratorMode::kTargetOnly
                                                                    : GeneratorMode::kCombined;
  GeneratorTrainer gens(h, fs, mode, cfg);
  for (std::size_t t = 0; t < cfg.total_epochs; ++t) {
    for (std::size_t n = 0; n < gens.num_classes(); ++n) {
      const auto step = gens.Update(n);
      if (trace != nullptr) {
        TraceRecord r;
        r.epoch = t;
        r.phase = Phase::kGenerator;
        r.cls = static_cast<int>(n);
        r.touched = ParamSet::kGenerators;
        r.pool_size = (n + 1) * cfg.gen_batch;
        r.losses = {{"loss", step.loss}, {"source", step.source}, {"target", step.target}};
        Record(trace, std::move(r), &gens.bank(), nullptr);
      }
    }
  }
  const auto n_classes = static_cast<int>(gens.num_classes());
  LabeledPool pool = EmptyIntermediatePool(n_classes, static_cast<Eigen::Index>(h.model.encoder.arch.input_width()));
  for (int n = 0; n < n_classes; ++n) AppendRows(pool, gens.Sample(static_cast<std::size_t>(n), cfg.gen_batch), n);
  return AdaptPairwise(pool, fs, h, cfg, trace);
}

TohanResult TrainTohan(const SourceHypothesis& h, const FewShotSet& fs, const TohanConfig& cfg, Trace* trace) {
  ValidateTohanConfig(cfg);
  GeneratorTrainer gens(h, fs, GeneratorMode::kCombined, cfg);
  PairwiseAdapter adapter(h, fs, cfg);
  const auto n_classes = static_cast<int>(gens.num_classes());
  const auto dim = static_cast<Eigen::Index>(h.model.encoder.arch.input_width());
  const std::size_t adapt_start = cfg.total_epochs - cfg.adapt_epochs;

  for (std::size_t t = 0; t < cfg.total_epochs; ++t) {
    LabeledPool pool = EmptyIntermediatePool(n_classes, dim);
    for (int n = 0; n < n_classes; ++n) {
      const auto step = gens.Update(static_cast<std::size_t>(n));
      AppendRows(pool, step.generated, n);
      TraceRecord r;
      r.epoch = t;
      r.phase = Phase::kGenerator;
      r.cls = n;
      r.touched = ParamSet::kGenerators;
      r.pool_size = pool.size();
      r.losses = {{"loss", step.loss}, {"source", step.source}, {"target", step.target}};
      Record(trace, std::move(r), &gens.bank(), &adapter);
    }
    if (t == adapt_start) RunPretraining(adapter, pool, cfg, t, trace, &gens.bank());
    if (t >= adapt_start) {
      const double progress = static_cast<double>(t - adapt_start) / static_cast<double>(cfg.adapt_epochs);
      RunAdaptation(adapter, pool, cfg, t, progress, trace, &gens.bank());
    }
  }
  return {adapter.model(), gens.bank(), adapter.discriminator()};
}

}  // namespace fha
