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

// Generator, group-discriminator and adaptation losses with their
// analytic gradients.

#ifndef FHA_CORE_LOSSES_HPP_
#define FHA_CORE_LOSSES_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "model.hpp"
#include "nn.hpp"
#include "pairing.hpp"

namespace fha::losses {

inline constexpr double kProbabilityClamp = 1e-12;
inline constexpr double kDefaultLambda = 0.2;
inline constexpr std::size_t kDefaultGeneratorBatch = 32;

struct GenLossConfig {
  std::size_t cls = 0;
  std::size_t batch = kDefaultGeneratorBatch;
  double lambda = kDefaultLambda;
  double diameter = 1.0;
};

void ValidateGenLossConfig(const GenLossConfig& cfg);

// Confusion weight 2 / (1 + exp(-10 q)) - 1 with q clamped to [0, 1].
double BetaSchedule(double progress);

struct VectorLoss {
  double value = 0.0;
  Eigen::VectorXd grad;
};

struct MatrixLoss {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

// (1/B) ||l_n - 1||^2 where l_n holds the source model's class-n
// probabilities for the B generated samples.
VectorLoss GenSourceLoss(const Eigen::VectorXd& class_probs);

// sum_i w_i |x_i - y_i| with w_i = |x_i - y_i|^2 / ||x - y||_2, which is
// sum |d_i|^3 / ||d||_2. Zero when x == y.
double AugmentedL1(std::span<const double> x, std::span<const double> y);
// Gradient with respect to x.
Eigen::VectorXd AugmentedL1Grad(std::span<const double> x, std::span<const double> y);

// Largest augmented-L1 distance inside [0,1]^d, i.e. sqrt(d).
double L1Diameter(std::size_t dim);

// (1/(M B K)) sum_i sum_k ||x_m^i - x_t^k||, gradient w.r.t. the generated batch.
MatrixLoss GenTargetLoss(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& targets, double diameter);

struct GenTotalLoss {
  double value = 0.0;
  double source = 0.0;
  double target = 0.0;
  Eigen::VectorXd d_class_probs;
  Eigen::MatrixXd d_generated;
};

GenTotalLoss GenTotal(const Eigen::VectorXd& class_probs, const Eigen::MatrixXd& generated,
                      const Eigen::MatrixXd& targets, const GenLossConfig& cfg);

// Mean of -log p(correct group); labels are 1..4.
MatrixLoss GroupCrossEntropy(const Eigen::MatrixXd& probs, std::span<const int> group_labels);

// Mean of -log p(y); labels are 0-based class indices.
MatrixLoss CrossEntropy(const Eigen::MatrixXd& probs, std::span<const int> labels);

// L_D over a pair batch with the encoder frozen; gradient w.r.t. D only.
struct DiscriminatorLoss {
  double value = 0.0;
  nn::ParamVector d_discriminator;
};

DiscriminatorLoss GroupDiscriminatorLoss(const PairBatch& batch, const nn::Mlp& encoder,
                                         const nn::Mlp& discriminator);

// beta * [CE(D(phi(G2)) -> G1) + CE(D(phi(G4)) -> G3)] + CE(f_t(X_t), y_t).
// D is an input only: the result carries no discriminator gradient.
struct AdaptationLoss {
  double value = 0.0;
  double confusion = 0.0;
  double classification = 0.0;
  nn::ParamVector d_encoder;
  nn::ParamVector d_classifier;
};

AdaptationLoss ComputeAdaptationLoss(const PairSet& g2_pairs, const PairSet& g4_pairs,
                                     const nn::Mlp& discriminator, const EncoderClassifier& target_model,
                                     const Eigen::MatrixXd& target_x, std::span<const int> target_y,
                                     double beta);

}  // namespace fha::losses

#endif  // FHA_CORE_LOSSES_HPP_
