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

#include "pairing.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "error.hpp"
#include "rng.hpp"

namespace fha {

namespace {

// Rejection sampling draws uniformly from the valid combinations; the
// existence checks in BuildGroups guarantee termination.
PairRecord DrawPair(Group group, const LabeledPool& inter, const LabeledPool& target, Rng& rng) {
  const bool cross = group == Group::kG2 || group == Group::kG4;
  const bool same_label = group == Group::kG1 || group == Group::kG2;
  const LabeledPool& second = cross ? target : inter;
  for (;;) {
    const std::size_t i = UniformIndex(rng, inter.size());
    const std::size_t j = UniformIndex(rng, second.size());
    if (!cross && i == j) continue;
    if ((inter.y[i] == second.y[j]) != same_label) continue;
    return {group, Domain::kIntermediate, i, inter.y[i], second.domain, j, second.y[j]};
  }
}

void ValidatePool(const LabeledPool& pool, const char* what) {
  Require(pool.size() > 0, ErrorCode::kInvalidArgument, std::string(what) + " pool is empty");
  Require(static_cast<std::size_t>(pool.x.rows()) == pool.size(), ErrorCode::kShapeMismatch,
          std::string(what) + " pool rows do not match labels");
  for (int y : pool.y) {
    Require(y >= 0 && y < pool.num_classes, ErrorCode::kInvalidArgument,
            std::string(what) + " pool label out of range");
  }
}

}  // namespace

std::string_view ToString(Domain d) { return d == Domain::kIntermediate ? "intermediate" : "target"; }

LabeledPool MakePool(const Dataset& ds, Domain domain) {
  return {domain, ds.FeatureMatrix(), ds.IntLabels(), static_cast<int>(ds.num_classes())};
}

bool SatisfiesGroup(const PairRecord& p) {
  const bool first_inter = p.first_domain == Domain::kIntermediate;
  const bool second_inter = p.second_domain == Domain::kIntermediate;
  const bool same = p.first_label == p.second_label;
  switch (p.group) {
    case Group::kG1: return first_inter && second_inter && same;
    case Group::kG2: return first_inter && !second_inter && same;
    case Group::kG3: return first_inter && second_inter && !same;
    case Group::kG4: return first_inter && !second_inter && !same;
  }
  return false;
}

std::vector<int> PairBatch::GroupLabels() const {
  std::vector<int> labels;
  labels.reserve(pairs.size());
  for (const auto& p : pairs) labels.push_back(static_cast<int>(p.group));
  return labels;
}

PairSet PairBatch::Select(Group g) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].group == g) rows.push_back(static_cast<Eigen::Index>(i));
  }
  PairSet out;
  out.first.resize(static_cast<Eigen::Index>(rows.size()), data.first.cols());
  out.second.resize(static_cast<Eigen::Index>(rows.size()), data.second.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.first.row(static_cast<Eigen::Index>(k)) = data.first.row(rows[k]);
    out.second.row(static_cast<Eigen::Index>(k)) = data.second.row(rows[k]);
  }
  return out;
}

PairBatch BuildGroups(const LabeledPool& inter, const LabeledPool& target, std::size_t per_group,
                      std::uint64_t seed) {
  Require(per_group >= 1, ErrorCode::kInvalidArgument, "per_group must be >= 1");
  Require(inter.num_classes >= 2, ErrorCode::kProtocol,
          "pair groups G3/G4 need at least two classes");
  ValidatePool(inter, "intermediate");
  ValidatePool(target, "target");
  Require(inter.x.cols() == target.x.cols(), ErrorCode::kShapeMismatch,
          "intermediate and target feature dimensions differ");

  std::vector<std::size_t> inter_counts(static_cast<std::size_t>(inter.num_classes), 0);
  for (int y : inter.y) ++inter_counts[static_cast<std::size_t>(y)];
  const std::set<int> target_classes(target.y.begin(), target.y.end());
  const auto present = std::count_if(inter_counts.begin(), inter_counts.end(), [](auto c) { return c > 0; });
  Require(present >= 2, ErrorCode::kProtocol, "intermediate pool must cover at least two classes");
  Require(std::any_of(inter_counts.begin(), inter_counts.end(), [](auto c) { return c >= 2; }),
          ErrorCode::kProtocol, "G1 needs a class with two intermediate samples");
  Require(std::any_of(target_classes.begin(), target_classes.end(),
                      [&](int c) { return c < inter.num_classes && inter_counts[static_cast<std::size_t>(c)] > 0; }),
          ErrorCode::kProtocol, "G2 needs a class shared by intermediate and target pools");

  Rng rng(DeriveSeed(seed, "pairs"));
  PairBatch batch;
  const auto total = static_cast<Eigen::Index>(4 * per_group);
  batch.data.first.resize(total, inter.x.cols());
  batch.data.second.resize(total, inter.x.cols());
  for (Group g : kAllGroups) {
    for (std::size_t k = 0; k < per_group; ++k) {
      const PairRecord p = DrawPair(g, inter, target, rng);
      const auto row = static_cast<Eigen::Index>(batch.pairs.size());
      batch.data.first.row(row) = inter.x.row(static_cast<Eigen::Index>(p.first_index));
      const LabeledPool& src = p.second_domain == Domain::kIntermediate ? inter : target;
      batch.data.second.row(row) = src.x.row(static_cast<Eigen::Index>(p.second_index));
      batch.pairs.push_back(p);
    }
    batch.counts[static_cast<std::size_t>(GroupIndex(g))] = per_group;
  }
  return batch;
}

PairBatch BuildGroups(const LabeledPool& inter, const FewShotSet& target, std::size_t per_group,
                      std::uint64_t seed) {
  return BuildGroups(inter, MakePool(target.samples, Domain::kTarget), per_group, seed);
}

PhiTrace PhiForward(const nn::Mlp& encoder, const PairSet& pairs) {
  PhiTrace t;
  t.first = nn::ForwardWithTrace(encoder.arch, encoder.params, pairs.first);
  t.second = nn::ForwardWithTrace(encoder.arch, encoder.params, pairs.second);
  const auto& a = t.first.output();
  const auto& b = t.second.output();
  t.phi.resize(a.rows(), a.cols() + b.cols());
  t.phi << a, b;
  return t;
}

Eigen::MatrixXd Phi(const nn::Mlp& encoder, const PairSet& pairs) { return PhiForward(encoder, pairs).phi; }

nn::ParamVector PhiBackward(const nn::Mlp& encoder, const PhiTrace& trace, const Eigen::MatrixXd& upstream) {
  const Eigen::Index w = trace.first.output().cols();
  Require(upstream.rows() == trace.phi.rows() && upstream.cols() == 2 * w, ErrorCode::kShapeMismatch,
          "phi upstream gradient has the wrong shape");
  auto g1 = nn::Backward(encoder.arch, encoder.params, trace.first, upstream.leftCols(w));
  const auto g2 = nn::Backward(encoder.arch, encoder.params, trace.second, upstream.rightCols(w));
  for (std::size_t i = 0; i < g1.params.size(); ++i) g1.params[i] += g2.params[i];
  return std::move(g1.params);
}

}  // namespace fha
