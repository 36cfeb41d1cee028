/*
 * Copyright 2026 The BRCA-Sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Small differentiable models over flat parameter vectors: multinomial
// logistic regression, a tanh MLP classifier and a tanh MLP autoencoder.
// All gradients are analytic; SGD is the only optimizer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "brca/error.hpp"
#include "brca/param_vector.hpp"
#include "brca/rng.hpp"

namespace brca::nn {

enum class ModelKind { kLogisticRegression, kMlpClassifier, kMlpAutoencoder };

// Hidden-layer nonlinearity. Classifiers use ReLU; the autoencoder uses tanh.
enum class Activation { kRelu, kTanh };

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

// Inputs plus integer labels. Autoencoders ignore labels (targets = inputs).
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return inputs.rows; }
  std::size_t dim() const noexcept { return inputs.cols; }
  bool empty() const noexcept { return inputs.rows == 0; }

  void push_back(std::span<const double> x, int label) {
    if (inputs.rows == 0 && inputs.cols == 0) inputs.cols = x.size();
    if (x.size() != inputs.cols) throw DimensionMismatch("sample width differs from batch width");
    inputs.data.insert(inputs.data.end(), x.begin(), x.end());
    ++inputs.rows;
    labels.push_back(label);
  }

  /// Copies the given rows into a new batch.
  Batch subset(std::span<const std::size_t> rows) const {
    Batch out;
    out.inputs = Matrix(0, inputs.cols);
    out.inputs.data.reserve(rows.size() * inputs.cols);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(inputs.row(r), labels[r]);
    return out;
  }
};

/// Builds a batch whose rows are the given vectors (labels all zero).
inline Batch batch_from_vectors(std::span<const std::vector<double>> rows) {
  Batch b;
  for (const auto& r : rows) b.push_back(r, 0);
  return b;
}

struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  std::string probe_block;
  Activation activation = Activation::kRelu;

  static ModelSpec logistic(std::size_t in, std::size_t classes) {
    ModelSpec s{ModelKind::kLogisticRegression, in, {}, classes, "w", Activation::kRelu};
    s.validate();
    return s;
  }

  static ModelSpec mlp(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes) {
    ModelSpec s{ModelKind::kMlpClassifier, in, std::move(hidden), classes, "", Activation::kRelu};
    if (s.hidden_dims.empty()) throw InvalidArgument("mlp-classifier needs at least one hidden layer");
    // Probe is the weight block feeding the last hidden layer.
    s.probe_block = weight_name(s.kind, s.hidden_dims.size() - 1);
    s.validate();
    return s;
  }

  static ModelSpec autoencoder(std::size_t dim, std::size_t hidden) {
    ModelSpec s{ModelKind::kMlpAutoencoder, dim, {hidden}, dim, "w0", Activation::kTanh};
    s.validate();
    return s;
  }

  bool is_classifier() const noexcept { return kind != ModelKind::kMlpAutoencoder; }
  std::size_t num_layers() const noexcept { return hidden_dims.size() + 1; }

  std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }
  std::size_t layer_out(std::size_t l) const {
    return l + 1 == num_layers() ? output_dim : hidden_dims[l];
  }

  static std::string weight_name(ModelKind kind, std::size_t l) {
    return kind == ModelKind::kLogisticRegression ? "w" : "w" + std::to_string(l);
  }
  static std::string bias_name(ModelKind kind, std::size_t l) {
    return kind == ModelKind::kLogisticRegression ? "b" : "b" + std::to_string(l);
  }
  std::string weight_name(std::size_t l) const { return weight_name(kind, l); }
  std::string bias_name(std::size_t l) const { return bias_name(kind, l); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += layer_out(l) * (layer_in(l) + 1);
    return n;
  }

  Layout make_layout() const {
    std::vector<std::pair<std::string, std::size_t>> blocks;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      blocks.emplace_back(weight_name(l), layer_in(l) * layer_out(l));
      blocks.emplace_back(bias_name(l), layer_out(l));
    }
    return Layout(blocks);
  }

  std::shared_ptr<const Layout> shared_layout() const {
    return std::make_shared<const Layout>(make_layout());
  }

  std::size_t probe_size() const { return make_layout().at(probe_block).length; }

  void validate() const {
    if (input_dim == 0 || output_dim == 0) throw InvalidArgument("model dimensions must be positive");
    for (std::size_t h : hidden_dims)
      if (h == 0) throw InvalidArgument("hidden dimensions must be positive");
    if (kind == ModelKind::kLogisticRegression && !hidden_dims.empty())
      throw InvalidArgument("logistic regression has no hidden layers");
    if (kind != ModelKind::kLogisticRegression && hidden_dims.empty())
      throw InvalidArgument("mlp models need at least one hidden layer");
    if (kind == ModelKind::kMlpAutoencoder && output_dim != input_dim)
      throw InvalidArgument("autoencoder output-dim must equal input-dim");
    if (make_layout().find(probe_block) == nullptr)
      throw InvalidArgument("probe block '" + probe_block + "' is not part of the layout");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline void check_params(const ModelSpec& spec, const ParamVector& params) {
  if (params.size() != spec.param_count() || !(params.layout() == spec.make_layout()))
    throw DimensionMismatch("parameters do not match the model layout");
}

inline void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.dim() != spec.input_dim)
    throw DimensionMismatch("batch width " + std::to_string(batch.dim()) +
                            " != model input-dim " + std::to_string(spec.input_dim));
  if (batch.labels.size() != batch.size()) throw DimensionMismatch("label count != sample count");
  if (spec.is_classifier()) {
    for (int y : batch.labels)
      if (y < 0 || static_cast<std::size_t>(y) >= spec.output_dim)
        throw InvalidArgument("label " + std::to_string(y) + " outside [0, output-dim)");
  }
}

/// Glorot-uniform weights, zero biases.
inline ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p(spec.shared_layout());
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const double fan = static_cast<double>(spec.layer_in(l) + spec.layer_out(l));
    const double s = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& w : p.block(spec.weight_name(l))) w = dist(rng);
  }
  return p;
}

namespace detail {

// Per-call scratch space for one forward/backward pass.
struct Workspace {
  std::vector<std::vector<double>> act;    // act[l] = input to layer l
  std::vector<std::vector<double>> delta;  // delta[l] = dLoss/dz of layer l

  explicit Workspace(const ModelSpec& spec) {
    act.resize(spec.num_layers() + 1);
    delta.resize(spec.num_layers());
    act[0].resize(spec.input_dim);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
      act[l + 1].resize(spec.layer_out(l));
      delta[l].resize(spec.layer_out(l));
    }
  }
};

struct LayerView {
  std::size_t w_off, b_off, in, out;
};

inline std::vector<LayerView> layer_views(const ModelSpec& spec) {
  std::vector<LayerView> v;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_in(l), out = spec.layer_out(l);
    v.push_back({off, off + in * out, in, out});
    off += in * out + out;
  }
  return v;
}

// Runs the forward pass; act.back() holds logits (classifier) or the
// reconstruction (autoencoder).
inline void forward(const ModelSpec& spec, const std::vector<LayerView>& layers,
                    std::span<const double> p, std::span<const double> x, Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  const std::size_t last = layers.size() - 1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerView& L = layers[l];
    const double* w = p.data() + L.w_off;
    const double* b = p.data() + L.b_off;
    const std::vector<double>& a = ws.act[l];
    std::vector<double>& z = ws.act[l + 1];
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = b[o];
      const double* wr = w + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) s += wr[i] * a[i];
      if (l == last)
        z[o] = s;
      else
        z[o] = spec.activation == Activation::kTanh ? std::tanh(s) : (s > 0.0 ? s : 0.0);
    }
  }
}

// Loss of one sample after forward(); fills delta.back() with dLoss/dOutput.
inline double output_loss(const ModelSpec& spec, std::span<const double> x, int label,
                          Workspace& ws) {
  const std::vector<double>& out = ws.act.back();
  std::vector<double>& d = ws.delta.back();
  if (spec.is_classifier()) {
    const double mx = *std::max_element(out.begin(), out.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < out.size(); ++c) {
      d[c] = std::exp(out[c] - mx);
      denom += d[c];
    }
    for (double& v : d) v /= denom;
    const double loss = -(out[static_cast<std::size_t>(label)] - mx - std::log(denom));
    d[static_cast<std::size_t>(label)] -= 1.0;
    return loss;
  }
  const double inv = 1.0 / static_cast<double>(out.size());
  double loss = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double r = out[j] - x[j];
    loss += r * r;
    d[j] = 2.0 * r * inv;
  }
  return loss * inv;
}

inline void backward(const ModelSpec& spec, const std::vector<LayerView>& layers,
                     std::span<const double> p, std::span<double> grad, Workspace& ws) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerView& L = layers[l];
    const std::vector<double>& a = ws.act[l];
    const std::vector<double>& d = ws.delta[l];
    double* gw = grad.data() + L.w_off;
    double* gb = grad.data() + L.b_off;
    for (std::size_t o = 0; o < L.out; ++o) {
      const double dv = d[o];
      gb[o] += dv;
      if (dv == 0.0) continue;
      double* gr = gw + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) gr[i] += dv * a[i];
    }
    if (l == 0) break;
    const double* w = p.data() + L.w_off;
    std::vector<double>& prev = ws.delta[l - 1];
    std::fill(prev.begin(), prev.end(), 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double dv = d[o];
      const double* wr = w + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) prev[i] += wr[i] * dv;
    }
    if (spec.activation == Activation::kTanh) {
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= 1.0 - a[i] * a[i];
    } else {
      for (std::size_t i = 0; i < prev.size(); ++i)
        if (a[i] <= 0.0) prev[i] = 0.0;
    }
  }
}

// Mean loss (and optionally mean gradient) over the selected rows.
inline double loss_grad_rows(const ModelSpec& spec, std::span<const double> p, const Batch& batch,
                             std::span<const std::size_t> rows, std::span<double> grad) {
  const auto layers = layer_views(spec);
  Workspace ws(spec);
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  for (std::size_t r : rows) {
    const auto x = batch.inputs.row(r);
    forward(spec, layers, p, x, ws);
    total += output_loss(spec, x, batch.labels[r], ws);
    if (want_grad) backward(spec, layers, p, grad, ws);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  if (want_grad)
    for (double& g : grad) g *= inv;
  return total * inv;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace detail

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean loss over the batch and its analytic gradient (same layout as params).
inline LossAndGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                                 const Batch& batch) {
  check_params(spec, params);
  check_batch(spec, batch);
  if (batch.empty()) throw InvalidArgument("empty batch");
  LossAndGrad out{0.0, params.zeros_like()};
  const auto rows = detail::all_rows(batch.size());
  out.loss = detail::loss_grad_rows(spec, params.values(), batch, rows, out.grad.values());
  return out;
}

/// Mean loss without the gradient.
inline double loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_params(spec, params);
  check_batch(spec, batch);
  if (batch.empty()) throw InvalidArgument("empty batch");
  const auto rows = detail::all_rows(batch.size());
  return detail::loss_grad_rows(spec, params.values(), batch, rows, {});
}

/// Raw network output for one input (logits or reconstruction).
inline std::vector<double> forward(const ModelSpec& spec, const ParamVector& params,
                                   std::span<const double> x) {
  check_params(spec, params);
  if (x.size() != spec.input_dim) throw DimensionMismatch("input width != model input-dim");
  detail::Workspace ws(spec);
  detail::forward(spec, detail::layer_views(spec), params.values(), x, ws);
  return ws.act.back();
}

/// One pass over `data` in seeded-shuffled mini-batches. A batch size at least
/// as large as the data gives one full-gradient step.
inline ParamVector sgd_epoch(const ModelSpec& spec, ParamVector params, const Batch& data,
                             double lr, std::size_t batch_size, std::uint64_t seed) {
  check_params(spec, params);
  check_batch(spec, data);
  if (!(lr >= 0.0)) throw InvalidArgument("learning rate must be non-negative");
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  if (data.empty()) throw InvalidArgument("empty training data");
  if (lr == 0.0) return params;

  std::vector<std::size_t> order = detail::all_rows(data.size());
  if (batch_size < data.size()) {
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<double> grad(params.size());
  auto p = params.values();
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    std::span<const std::size_t> rows(order.data() + start, len);
    detail::loss_grad_rows(spec, p, data, rows, grad);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
  }
  return params;
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Accuracy (argmax, ties to the lowest class id) and mean cross-entropy.
inline Evaluation evaluate(const ModelSpec& spec, const ParamVector& params, const Batch& data) {
  if (!spec.is_classifier()) throw InvalidArgument("evaluate() needs a classifier model");
  check_params(spec, params);
  check_batch(spec, data);
  if (data.empty()) throw InvalidArgument("empty evaluation data");
  const auto layers = detail::layer_views(spec);
  detail::Workspace ws(spec);
  std::size_t correct = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto x = data.inputs.row(r);
    detail::forward(spec, layers, params.values(), x, ws);
    const auto& out = ws.act.back();
    const auto best = static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
    if (best == data.labels[r]) ++correct;
    total += detail::output_loss(spec, x, data.labels[r], ws);
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, total / n};
}

}  // namespace brca::nn
