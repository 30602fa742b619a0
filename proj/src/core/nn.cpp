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

#include "nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "error.hpp"
#include "rng.hpp"

namespace fha::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> WeightMap(std::span<const double> params, const LayerSlice& s) {
  return {params.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
          static_cast<Eigen::Index>(s.in)};
}

Eigen::Map<const Eigen::RowVectorXd> BiasMap(std::span<const double> params, const LayerSlice& s) {
  return {params.data() + s.bias_offset, static_cast<Eigen::Index>(s.out)};
}

void Activate(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      z = z.array().tanh();
      break;
    case Activation::kRelu:
      z = z.array().max(0.0);
      break;
    case Activation::kLogistic:
      z = (1.0 + (-z.array()).exp()).inverse();
      break;
  }
}

// Derivative expressed through the post-activation value y.
void ScaleByActivationGrad(Activation a, const Eigen::MatrixXd& y, Eigen::MatrixXd& g) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      g.array() *= 1.0 - y.array().square();
      break;
    case Activation::kRelu:
      g.array() *= (y.array() > 0.0).cast<double>();
      break;
    case Activation::kLogistic:
      g.array() *= y.array() * (1.0 - y.array());
      break;
  }
}

void SoftmaxRows(Eigen::MatrixXd& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp();
    z.row(r) /= z.row(r).sum();
  }
}

void CheckParams(const ArchSpec& arch, std::span<const double> params) {
  Require(params.size() == arch.param_count(), ErrorCode::kShapeMismatch,
          "parameter vector length " + std::to_string(params.size()) + " != " +
              std::to_string(arch.param_count()));
}

void CheckBatch(const ArchSpec& arch, const Eigen::MatrixXd& batch) {
  Require(static_cast<std::size_t>(batch.cols()) == arch.input_width(), ErrorCode::kShapeMismatch,
          "batch has " + std::to_string(batch.cols()) + " columns, network expects " +
              std::to_string(arch.input_width()));
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string_view ToString(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kLogistic: return "logistic";
  }
  return "?";
}

std::string_view ToString(Head h) { return h == Head::kSoftmax ? "softmax" : "linear"; }

Activation ParseActivation(std::string_view s) {
  for (auto a : {Activation::kIdentity, Activation::kTanh, Activation::kRelu, Activation::kLogistic}) {
    if (ToString(a) == s) return a;
  }
  Fail(ErrorCode::kFormat, "unknown activation: " + std::string(s));
}

Head ParseHead(std::string_view s) {
  if (s == "softmax") return Head::kSoftmax;
  if (s == "linear") return Head::kLinear;
  Fail(ErrorCode::kFormat, "unknown head: " + std::string(s));
}

std::size_t ArchSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += (widths[l] + 1) * widths[l + 1];
  return n;
}

void ValidateArch(const ArchSpec& arch) {
  Require(!arch.activations.empty(), ErrorCode::kInvalidArgument, "architecture needs >= 1 layer");
  Require(arch.widths.size() == arch.activations.size() + 1, ErrorCode::kInvalidArgument,
          "need one activation per layer");
  for (auto w : arch.widths) Require(w > 0, ErrorCode::kInvalidArgument, "layer widths must be positive");
  if (arch.head == Head::kSoftmax) {
    Require(arch.output_width() >= 2, ErrorCode::kInvalidArgument, "softmax head needs >= 2 outputs");
  }
}

ArchSpec MakeMlp(std::vector<std::size_t> widths, Activation hidden, Activation last, Head head) {
  ArchSpec arch;
  arch.widths = std::move(widths);
  const std::size_t layers = arch.widths.empty() ? 0 : arch.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) arch.activations.push_back(l + 1 == layers ? last : hidden);
  arch.head = head;
  ValidateArch(arch);
  return arch;
}

std::vector<LayerSlice> ParamLayout(const ArchSpec& arch) {
  std::vector<LayerSlice> layout;
  std::size_t off = 0;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const std::size_t in = arch.widths[l];
    const std::size_t out = arch.widths[l + 1];
    layout.push_back({off, off + in * out, in, out});
    off += (in + 1) * out;
  }
  return layout;
}

ParamVector InitParams(const ArchSpec& arch, std::uint64_t seed) {
  ValidateArch(arch);
  ParamVector params(arch.param_count(), 0.0);
  Rng rng(DeriveSeed(seed, "init"));
  for (const auto& s : ParamLayout(arch)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < s.in * s.out; ++i) params[s.weight_offset + i] = u(rng);
  }
  return params;
}

ForwardTrace ForwardWithTrace(const ArchSpec& arch, std::span<const double> params,
                              const Eigen::MatrixXd& batch) {
  CheckParams(arch, params);
  CheckBatch(arch, batch);
  ForwardTrace trace;
  trace.values.reserve(arch.num_layers() + 2);
  trace.values.push_back(batch);
  const auto layout = ParamLayout(arch);
  for (std::size_t l = 0; l < layout.size(); ++l) {
    Eigen::MatrixXd z = trace.values.back() * WeightMap(params, layout[l]).transpose();
    z.rowwise() += BiasMap(params, layout[l]);
    Activate(arch.activations[l], z);
    trace.values.push_back(std::move(z));
  }
  if (arch.head == Head::kSoftmax) {
    Eigen::MatrixXd p = trace.values.back();
    SoftmaxRows(p);
    trace.values.push_back(std::move(p));
  }
  return trace;
}

Eigen::MatrixXd Forward(const ArchSpec& arch, std::span<const double> params,
                        const Eigen::MatrixXd& batch) {
  return ForwardWithTrace(arch, params, batch).output();
}

Gradients Backward(const ArchSpec& arch, std::span<const double> params, const ForwardTrace& trace,
                   const Eigen::MatrixXd& upstream) {
  CheckParams(arch, params);
  const auto& out = trace.output();
  Require(upstream.rows() == out.rows() && upstream.cols() == out.cols(), ErrorCode::kShapeMismatch,
          "upstream gradient shape does not match network output");

  Eigen::MatrixXd g = upstream;
  if (arch.head == Head::kSoftmax) {
    // dL/dz = p * (dL/dp - <dL/dp, p>) row by row.
    const Eigen::VectorXd inner = (g.array() * out.array()).rowwise().sum();
    g = out.array() * (g.colwise() - inner).array();
  }

  Gradients grads;
  grads.params.assign(arch.param_count(), 0.0);
  const auto layout = ParamLayout(arch);
  for (std::size_t l = layout.size(); l-- > 0;) {
    const auto& s = layout[l];
    ScaleByActivationGrad(arch.activations[l], trace.values[l + 1], g);
    const Eigen::MatrixXd& x = trace.values[l];
    Eigen::Map<RowMajor> dw(grads.params.data() + s.weight_offset, static_cast<Eigen::Index>(s.out),
                            static_cast<Eigen::Index>(s.in));
    Eigen::Map<Eigen::RowVectorXd> db(grads.params.data() + s.bias_offset, static_cast<Eigen::Index>(s.out));
    dw.noalias() = g.transpose() * x;
    db = g.colwise().sum();
    g = g * WeightMap(params, s);
  }
  grads.input = std::move(g);
  return grads;
}

Gradients Backward(const ArchSpec& arch, std::span<const double> params, const Eigen::MatrixXd& batch,
                   const Eigen::MatrixXd& upstream) {
  return Backward(arch, params, ForwardWithTrace(arch, params, batch), upstream);
}

std::uint64_t Mlp::Fingerprint() const {
  return Fnv1a(params.data(), params.size() * sizeof(double));
}

void AdamStep(AdamState& state, std::span<double> params, std::span<const double> grad) {
  Require(params.size() == grad.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          ErrorCode::kShapeMismatch, "Adam: parameter, gradient and state lengths differ");
  for (double g : grad) {
    Require(std::isfinite(g), ErrorCode::kNumerical, "Adam: non-finite gradient");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

GradCheckReport GradCheckFd(const LossFunction& loss, std::span<const double> params, double tolerance,
                            double step, double floor) {
  GradCheckReport report;
  const auto analytic = loss(params).grad;
  Require(analytic.size() == params.size(), ErrorCode::kShapeMismatch,
          "analytic gradient length differs from parameter length");
  std::vector<double> probe(params.begin(), params.end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = loss(probe).value;
    probe[i] = saved - step;
    const double down = loss(probe).value;
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(analytic[i] - numeric);
    const double rel_err = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
      report.max_rel_error = rel_err;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < tolerance;
  return report;
}

std::string SerializeModelFile(const ModelFile& model) {
  auto quote = [](const std::string& s) { return nlohmann::json(s).dump(); };
  std::ostringstream os;
  os << "{\n  \"format\": \"fha-model/1\",\n  \"seed\": " << model.seed << ",\n  \"meta\": {";
  bool first = true;
  for (const auto& [k, v] : model.meta) {
    os << (first ? "" : ",") << "\n    " << quote(k) << ": " << quote(v);
    first = false;
  }
  os << (model.meta.empty() ? "" : "\n  ") << "},\n  \"networks\": {";
  first = true;
  for (const auto& [name, net] : model.networks) {
    os << (first ? "" : ",") << "\n    " << quote(name) << ": {\n      \"widths\": [";
    for (std::size_t i = 0; i < net.arch.widths.size(); ++i) os << (i ? ", " : "") << net.arch.widths[i];
    os << "],\n      \"activations\": [";
    for (std::size_t i = 0; i < net.arch.activations.size(); ++i) {
      os << (i ? ", " : "") << '"' << ToString(net.arch.activations[i]) << '"';
    }
    os << "],\n      \"head\": \"" << ToString(net.arch.head) << "\",\n      \"params\": [";
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      os << (i ? ", " : "") << FormatDouble(net.params[i]);
    }
    os << "]\n    }";
    first = false;
  }
  os << "\n  }\n}\n";
  return os.str();
}

ModelFile ParseModelFile(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    Require(doc.value("format", "") == "fha-model/1", ErrorCode::kFormat, "unsupported model format");
    ModelFile model;
    model.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : doc.at("meta").items()) model.meta[k] = v.get<std::string>();
    for (const auto& [name, j] : doc.at("networks").items()) {
      Mlp net;
      net.arch.widths = j.at("widths").get<std::vector<std::size_t>>();
      for (const auto& a : j.at("activations")) net.arch.activations.push_back(ParseActivation(a.get<std::string>()));
      net.arch.head = ParseHead(j.at("head").get<std::string>());
      ValidateArch(net.arch);
      net.params = j.at("params").get<std::vector<double>>();
      Require(net.params.size() == net.arch.param_count(), ErrorCode::kFormat,
              "network '" + name + "' has the wrong number of parameters");
      for (double p : net.params) Require(std::isfinite(p), ErrorCode::kFormat, "non-finite parameter");
      model.networks.emplace(name, std::move(net));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    Fail(ErrorCode::kFormat, e.what());
  }
}

void SaveModelFile(const ModelFile& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << SerializeModelFile(model);
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

ModelFile LoadModelFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseModelFile(ss.str());
}

}  // namespace fha::nn
