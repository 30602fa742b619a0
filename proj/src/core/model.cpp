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

#include "model.hpp"

#include "error.hpp"

namespace fha {

Eigen::MatrixXd PredictProba(const EncoderClassifier& model, const Eigen::MatrixXd& x) {
  return model.classifier(model.encoder(x));
}

int ArgmaxLowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = static_cast<int>(j);
  }
  return best;
}

std::vector<int> PredictLabels(const EncoderClassifier& model, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd p = PredictProba(model, x);
  std::vector<int> labels(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) labels[static_cast<std::size_t>(r)] = ArgmaxLowest(p.row(r));
  return labels;
}

double Accuracy(const EncoderClassifier& model, const Dataset& test) {
  Require(!test.empty(), ErrorCode::kInvalidArgument, "accuracy on an empty test set");
  const auto predicted = PredictLabels(model, test.FeatureMatrix());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (predicted[i] == static_cast<int>(test.label(i))) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fha
