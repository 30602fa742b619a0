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

#ifndef FHA_CORE_MODEL_HPP_
#define FHA_CORE_MODEL_HPP_

#include <vector>

#include <Eigen/Dense>

#include "data.hpp"
#include "nn.hpp"

namespace fha {

// f = classifier o encoder. Both the frozen source hypothesis (g_s, h_s) and
// the adapted target model (g_t, h_t) have this shape.
struct EncoderClassifier {
  nn::Mlp encoder;
  nn::Mlp classifier;

  friend bool operator==(const EncoderClassifier&, const EncoderClassifier&) = default;
};

Eigen::MatrixXd PredictProba(const EncoderClassifier& model, const Eigen::MatrixXd& x);

// Argmax with ties going to the lowest class index.
int ArgmaxLowest(const Eigen::Ref<const Eigen::RowVectorXd>& row);
std::vector<int> PredictLabels(const EncoderClassifier& model, const Eigen::MatrixXd& x);

// Fraction of argmax-correct predictions; kInvalidArgument on an empty set.
double Accuracy(const EncoderClassifier& model, const Dataset& test);

}  // namespace fha

#endif  // FHA_CORE_MODEL_HPP_
