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

#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"
#include "log.hpp"

namespace fha::losses {

namespace {

// Shared by GroupCrossEntropy and CrossEntropy; label - offset is the column.
MatrixLoss MeanNegLog(const Eigen::MatrixXd& probs, std::span<const int> labels, int offset) {
  Require(static_cast<std::size_t>(probs.rows()) == labels.size(), ErrorCode::kShapeMismatch,
          "probability rows do not match label count");
  Require(!labels.empty(), ErrorCode::kInvalidArgument, "cross-entropy over an empty batch");
  MatrixLoss out;
  out.grad = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int col = labels[i] - offset;
    Require(col >= 0 && col < probs.cols(), ErrorCode::kInvalidArgument,
            "label " + std::to_string(labels[i]) + " out of range");
    const auto r = static_cast<Eigen::Index>(i);
    const double p = probs(r, col);
    if (p > kProbabilityClamp) {
      out.value -= std::log(p) * inv_n;
      out.grad(r, col) = -inv_n / p;
    } else {
      out.value -= std::log(kProbabilityClamp) * inv_n;
    }
  }
  return out;
}

// Gradient of mean CE(D(phi) -> group) back to the encoder parameters.
double ConfusionTerm(const PairSet& pairs, Group group, const nn::Mlp& discriminator,
                     const nn::Mlp& encoder, nn::ParamVector& d_encoder, double weight) {
  if (pairs.size() == 0) return 0.0;
  const PhiTrace phi = PhiForward(encoder, pairs);
  const auto d_trace = nn::ForwardWithTrace(discriminator.arch, discriminator.params, phi.phi);
  const std::vector<int> labels(pairs.size(), static_cast<int>(group));
  const MatrixLoss ce = GroupCrossEntropy(d_trace.output(), labels);
  if (weight != 0.0) {
    const auto d_phi = nn::Backward(discriminator.arch, discriminator.params, d_trace, ce.grad * weight).input;
    const auto g = PhiBackward(encoder, phi, d_phi);
    for (std::size_t i = 0; i < g.size(); ++i) d_encoder[i] += g[i];
  }
  return ce.value;
}

}  // namespace

void ValidateGenLossConfig(const GenLossConfig& cfg) {
  Require(cfg.lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be >= 0");
  Require(cfg.batch >= 1, ErrorCode::kInvalidArgument, "generator batch must be >= 1");
  Require(cfg.diameter > 0.0, ErrorCode::kInvalidArgument, "diameter must be > 0");
}

double BetaSchedule(double progress) {
  const double q = std::clamp(progress, 0.0, 1.0);
  return 2.0 / (1.0 + std::exp(-10.0 * q)) - 1.0;
}

VectorLoss GenSourceLoss(const Eigen::VectorXd& class_probs) {
  Require(class_probs.size() > 0, ErrorCode::kInvalidArgument, "empty generated batch");
  for (double p : class_probs) {
    Require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument, "probability outside [0,1]");
  }
  const double b = static_cast<double>(class_probs.size());
  const Eigen::VectorXd diff = class_probs.array() - 1.0;
  return {diff.squaredNorm() / b, diff * (2.0 / b)};
}

double AugmentedL1(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), ErrorCode::kShapeMismatch, "augmented L1: dimension mismatch");
  double cubes = 0.0;
  double squares = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i] - y[i]);
    cubes += a * a * a;
    squares += a * a;
  }
  return squares > 0.0 ? cubes / std::sqrt(squares) : 0.0;
}

Eigen::VectorXd AugmentedL1Grad(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), ErrorCode::kShapeMismatch, "augmented L1: dimension mismatch");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
  double cubes = 0.0;
  double squares = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i] - y[i]);
    cubes += a * a * a;
    squares += a * a;
  }
  if (squares == 0.0) return g;
  const double norm = std::sqrt(squares);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    g[static_cast<Eigen::Index>(i)] = 3.0 * std::abs(d) * d / norm - cubes * d / (norm * squares);
  }
  return g;
}

double L1Diameter(std::size_t dim) {
  Require(dim >= 1, ErrorCode::kInvalidArgument, "diameter needs dim >= 1");
  return std::sqrt(static_cast<double>(dim));
}

MatrixLoss GenTargetLoss(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& targets, double diameter) {
  Require(targets.rows() > 0, ErrorCode::kInsufficientData, "no target samples for this class");
  Require(generated.rows() > 0, ErrorCode::kInvalidArgument, "empty generated batch");
  Require(generated.cols() == targets.cols(), ErrorCode::kShapeMismatch,
          "generated and target dimensions differ");
  Require(diameter > 0.0, ErrorCode::kInvalidArgument, "diameter must be > 0");
  const double scale = 1.0 / (diameter * static_cast<double>(generated.rows() * targets.rows()));
  MatrixLoss out;
  out.grad = Eigen::MatrixXd::Zero(generated.rows(), generated.cols());
  const auto dim = static_cast<std::size_t>(generated.cols());
  Eigen::RowVectorXd xi(generated.cols());
  Eigen::RowVectorXd tk(targets.cols());
  for (Eigen::Index i = 0; i < generated.rows(); ++i) {
    xi = generated.row(i);
    for (Eigen::Index k = 0; k < targets.rows(); ++k) {
      tk = targets.row(k);
      const std::span<const double> a(xi.data(), dim);
      const std::span<const double> b(tk.data(), dim);
      out.value += AugmentedL1(a, b) * scale;
      out.grad.row(i) += AugmentedL1Grad(a, b).transpose() * scale;
    }
  }
  return out;
}

GenTotalLoss GenTotal(const Eigen::VectorXd& class_probs, const Eigen::MatrixXd& generated,
                      const Eigen::MatrixXd& targets, const GenLossConfig& cfg) {
  ValidateGenLossConfig(cfg);
  Require(class_probs.size() == generated.rows(), ErrorCode::kShapeMismatch,
          "probability count does not match generated batch");
  const VectorLoss s = GenSourceLoss(class_probs);
  const MatrixLoss t = GenTargetLoss(generated, targets, cfg.diameter);
  return {s.value + cfg.lambda * t.value, s.value, t.value, s.grad, t.grad * cfg.lambda};
}

MatrixLoss GroupCrossEntropy(const Eigen::MatrixXd& probs, std::span<const int> group_labels) {
  Require(probs.cols() == 4, ErrorCode::kShapeMismatch, "group probabilities need 4 columns");
  for (int g : group_labels) {
    Require(g >= 1 && g <= 4, ErrorCode::kInvalidArgument, "group label must be in 1..4");
  }
  return MeanNegLog(probs, group_labels, 1);
}

MatrixLoss CrossEntropy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  return MeanNegLog(probs, labels, 0);
}

DiscriminatorLoss GroupDiscriminatorLoss(const PairBatch& batch, const nn::Mlp& encoder,
                                         const nn::Mlp& discriminator) {
  const Eigen::MatrixXd phi = Phi(encoder, batch.data);
  const auto trace = nn::ForwardWithTrace(discriminator.arch, discriminator.params, phi);
  const auto labels = batch.GroupLabels();
  const MatrixLoss ce = GroupCrossEntropy(trace.output(), labels);
  return {ce.value, nn::Backward(discriminator.arch, discriminator.params, trace, ce.grad).params};
}

AdaptationLoss ComputeAdaptationLoss(const PairSet& g2_pairs, const PairSet& g4_pairs,
                                     const nn::Mlp& discriminator, const EncoderClassifier& target_model,
                                     const Eigen::MatrixXd& target_x, std::span<const int> target_y,
                                     double beta) {
  Require(beta >= 0.0, ErrorCode::kInvalidArgument, "beta must be >= 0");
  Require(target_x.rows() > 0, ErrorCode::kInvalidArgument, "labeled target set is empty");
  const auto& encoder = target_model.encoder;
  const auto& classifier = target_model.classifier;

  AdaptationLoss out;
  out.d_encoder.assign(encoder.params.size(), 0.0);
  if (g2_pairs.size() == 0 && g4_pairs.size() == 0) {
    Log(LogLevel::kInfo, "adaptation loss: no G2/G4 pairs, confusion term is zero");
  }
  out.confusion = ConfusionTerm(g2_pairs, Group::kG1, discriminator, encoder, out.d_encoder, beta) +
                  ConfusionTerm(g4_pairs, Group::kG3, discriminator, encoder, out.d_encoder, beta);

  const auto enc_trace = nn::ForwardWithTrace(encoder.arch, encoder.params, target_x);
  const auto cls_trace = nn::ForwardWithTrace(classifier.arch, classifier.params, enc_trace.output());
  const MatrixLoss ce = CrossEntropy(cls_trace.output(), target_y);
  out.classification = ce.value;
  const auto cls_grad = nn::Backward(classifier.arch, classifier.params, cls_trace, ce.grad);
  out.d_classifier = cls_grad.params;
  const auto enc_grad = nn::Backward(encoder.arch, encoder.params, enc_trace, cls_grad.input);
  for (std::size_t i = 0; i < enc_grad.params.size(); ++i) out.d_encoder[i] += enc_grad.params[i];

  out.value = beta * out.confusion + out.classification;
  return out;
}

}  // namespace fha::losses
