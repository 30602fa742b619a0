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

// Pair groups for the four-way group discriminator.
//
//   G1: intermediate x intermediate, same label
//   G2: intermediate x target,       same label
//   G3: intermediate x intermediate, different labels
//   G4: intermediate x target,       different labels
//
// In G2 and G4 the first element is always the intermediate sample.

#ifndef FHA_CORE_PAIRING_HPP_
#define FHA_CORE_PAIRING_HPP_

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "data.hpp"
#include "nn.hpp"

namespace fha {

enum class Domain : std::uint8_t { kIntermediate, kTarget };
std::string_view ToString(Domain d);

enum class Group : int { kG1 = 1, kG2 = 2, kG3 = 3, kG4 = 4 };
inline constexpr std::array<Group, 4> kAllGroups = {Group::kG1, Group::kG2, Group::kG3, Group::kG4};
inline int GroupIndex(Group g) { return static_cast<int>(g) - 1; }

struct LabeledPool {
  Domain domain = Domain::kIntermediate;
  Eigen::MatrixXd x;   // one sample per row
  std::vector<int> y;  // labels in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return y.size(); }
};

LabeledPool MakePool(const Dataset& ds, Domain domain);

struct PairRecord {
  Group group;
  Domain first_domain;
  std::size_t first_index;
  int first_label;
  Domain second_domain;
  std::size_t second_index;
  int second_label;
};

bool SatisfiesGroup(const PairRecord& pair);

struct PairSet {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second;

  std::size_t size() const { return static_cast<std::size_t>(first.rows()); }
};

struct PairBatch {
  std::vector<PairRecord> pairs;  // G1 block, then G2, G3, G4
  PairSet data;                   // rows aligned with pairs
  std::array<std::size_t, 4> counts{};

  std::vector<int> GroupLabels() const;  // values in 1..4
  PairSet Select(Group g) const;
};

// Uniform sampling with replacement over each group's valid combinations.
// Throws kProtocol when fewer than two classes exist or a group has no
// valid pair, kInvalidArgument on empty pools or per_group == 0.
PairBatch BuildGroups(const LabeledPool& intermediate, const LabeledPool& target,
                      std::size_t per_group, std::uint64_t seed);
PairBatch BuildGroups(const LabeledPool& intermediate, const FewShotSet& target,
                      std::size_t per_group, std::uint64_t seed);

// phi(x1, x2) = [g(x1), g(x2)], one pair per row.
struct PhiTrace {
  nn::ForwardTrace first;
  nn::ForwardTrace second;
  Eigen::MatrixXd phi;
};

PhiTrace PhiForward(const nn::Mlp& encoder, const PairSet& pairs);
Eigen::MatrixXd Phi(const nn::Mlp& encoder, const PairSet& pairs);
// Encoder parameter gradient given dLoss/dphi.
nn::ParamVector PhiBackward(const nn::Mlp& encoder, const PhiTrace& trace,
                            const Eigen::MatrixXd& upstream);

}  // namespace fha

#endif  // FHA_CORE_PAIRING_HPP_
