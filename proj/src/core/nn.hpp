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

// Feedforward MLPs over flat 64-bit parameter vectors, with exact
// reverse-mode gradients, Adam, and a central-difference gradient oracle.
//
// Layout: for each layer, the weight matrix (out x in, row-major) followed
// by the bias (out). Batches carry one sample per row.

#ifndef FHA_CORE_NN_HPP_
#define FHA_CORE_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fha::nn {

enum class Activation { kIdentity, kTanh, kRelu, kLogistic };
enum class Head { kLinear, kSoftmax };

std::string_view ToString(Activation a);
std::string_view ToString(Head h);
Activation ParseActivation(std::string_view s);
Head ParseHead(std::string_view s);

struct ArchSpec {
  std::vector<std::size_t> widths;      // input, hidden..., output
  std::vector<Activation> activations;  // one per layer
  Head head = Head::kLinear;

  std::size_t num_layers() const { return activations.size(); }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t param_count() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

void ValidateArch(const ArchSpec& arch);

// Every layer but the last uses `hidden`; the last uses `last`.
ArchSpec MakeMlp(std::vector<std::size_t> widths, Activation hidden, Activation last,
                 Head head);

using ParamVector = std::vector<double>;

struct LayerSlice {
  std::size_t weight_offset;
  std::size_t bias_offset;
  std::size_t in;
  std::size_t out;
};

std::vector<LayerSlice> ParamLayout(const ArchSpec& arch);

// Glorot-uniform weights, zero biases.
ParamVector InitParams(const ArchSpec& arch, std::uint64_t seed);

Eigen::MatrixXd Forward(const ArchSpec& arch, std::span<const double> params,
                        const Eigen::MatrixXd& batch);

// Post-activation values per layer; values[0] is the input batch and
// values.back() is the network output (after the softmax head, if any).
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> values;
  const Eigen::MatrixXd& output() const { return values.back(); }
};

ForwardTrace ForwardWithTrace(const ArchSpec& arch, std::span<const double> params,
                              const Eigen::MatrixXd& batch);

struct Gradients {
  ParamVector params;
  Eigen::MatrixXd input;
};

// `upstream` is dLoss/dOutput, same shape as the forward output.
Gradients Backward(const ArchSpec& arch, std::span<const double> params,
                   const ForwardTrace& trace, const Eigen::MatrixXd& upstream);
Gradients Backward(const ArchSpec& arch, std::span<const double> params,
                   const Eigen::MatrixXd& batch, const Eigen::MatrixXd& upstream);

// A network together with its parameters.
struct Mlp {
  ArchSpec arch;
  ParamVector params;

  Eigen::MatrixXd operator()(const Eigen::MatrixXd& batch) const {
    return Forward(arch, params, batch);
  }
  std::uint64_t Fingerprint() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

inline constexpr double kDefaultLearningRate = 1e-3;

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double lr = kDefaultLearningRate;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n, double learning_rate = kDefaultLearningRate)
      : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

// Bias-corrected Adam update in place. Throws kNumerical on a non-finite
// gradient, leaving params and state untouched.
void AdamStep(AdamState& state, std::span<double> params, std::span<const double> grad);

struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

using LossFunction = std::function<LossAndGrad(std::span<const double>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

inline constexpr double kFdStep = 1e-5;

// Central differences against the analytic gradient returned by `loss`.
// Relative error per entry is |a - n| / max(|a|, |n|, floor).
GradCheckReport GradCheckFd(const LossFunction& loss, std::span<const double> params,
                            double tolerance, double step = kFdStep, double floor = 1e-8);

// Text model file: named networks plus a seed and string metadata.
struct ModelFile {
  std::uint64_t seed = 0;
  std::map<std::string, Mlp> networks;
  std::map<std::string, std::string> meta;
};

std::string SerializeModelFile(const ModelFile& model);
ModelFile ParseModelFile(std::string_view text);
void SaveModelFile(const ModelFile& model, const std::filesystem::path& path);
ModelFile LoadModelFile(const std::filesystem::path& path);

}  // namespace fha::nn

#endif  // FHA_CORE_NN_HPP_
