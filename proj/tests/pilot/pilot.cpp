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

// Runs the ordering experiment once and prints the reference file that the
// acceptance gate compares against:
//
//   fha_pilot > tests/pilot/margins.json

#include <chrono>
#include <cstdio>

#include "json.hpp"
#include "ordering.hpp"

int main() {
  using namespace fha;
  using testing::OrderingOutcome;
  const auto start = std::chrono::steady_clock::now();
  const OrderingOutcome o = testing::RunOrdering();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json j;
  j["task"] = "rot40";
  j["n_t"] = testing::kOrderingShots;
  j["seeds"] = testing::kOrderingSeeds;
  j["failed"] = o.failed;
  for (Method m : testing::kOrderingMethods) {
    j["mean"][std::string(ToString(m))] = o.Mean(m);
    j["per_seed"][std::string(ToString(m))] = o.accuracy.count(m) ? o.accuracy.at(m) : std::vector<double>{};
  }
  j["wins"]["tohan_over_wa"] = o.Wins(Method::kTohan, Method::kWa, true);
  j["wins"]["tohan_atleast_stfada"] = o.Wins(Method::kTohan, Method::kStFada, false);
  j["wins"]["tohan_over_stfada_strict"] = o.Wins(Method::kTohan, Method::kStFada, true);
  // Regression band for each mean, in accuracy units.
  j["tolerance"] = 0.005;
  j["seconds"] = seconds;
  std::printf("%s\n", j.dump(2).c_str());
  return o.failed == 0 ? 0 : 1;
}
