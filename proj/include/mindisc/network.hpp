#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mindisc/error.hpp"
#include "mindisc/matrix.hpp"
#include "mindisc/rng.hpp"

namespace mindisc {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1 };

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::Identity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Builds specs for an MLP from a width list such as {2, 64, 64, 2}:
/// ReLU on every hidden layer, identity on the logits.
inline std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) {
    throw Error(ErrorKind::InvalidSpec, "an MLP needs at least input and output widths");
  }
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    specs.push_back({widths[i], widths[i + 1], last ? Activation::Identity : Activation::Relu});
  }
  return specs;
}

inline void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw Error(ErrorKind::InvalidSpec, "no layers");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].in_dim == 0 || specs[i].out_dim == 0) {
      throw Error(ErrorKind::InvalidSpec, "layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && specs[i - 1].out_dim != specs[i].in_dim) {
      throw Error(ErrorKind::InvalidSpec, "layer " + std::to_string(i - 1) + " out_dim " +
                                              std::to_string(specs[i - 1].out_dim) +
                                              " does not feed layer " + std::to_string(i) +
                                              " in_dim " + std::to_string(specs[i].in_dim));
    }
  }
  if (specs.back().activation != Activation::Identity) {
    throw Error(ErrorKind::InvalidSpec, "the final layer must be linear (it produces logits)");
  }
}

/// Per-layer parameters, one entry per layer: weights are in_dim x out_dim
/// (so a layer computes X W + b), biases are 1 x out_dim.
struct LayerParams {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

using ParamGrads = LayerParams;

/// Fully connected classifier shared by the source and target streams.
///
/// The representation tap is the output of the penultimate layer (input to
/// the logits layer); for a single-layer network it is the input itself.
struct Network {
  std::vector<LayerSpec> specs;
  LayerParams params;

  std::size_t num_layers() const noexcept { return specs.size(); }
  std::size_t input_dim() const noexcept { return specs.front().in_dim; }
  std::size_t num_classes() const noexcept { return specs.back().out_dim; }
  std::size_t rep_dim() const noexcept { return specs.back().in_dim; }

  ParamGrads zero_grads() const {
    ParamGrads g;
    for (const auto& s : specs) {
      g.weights.emplace_back(s.in_dim, s.out_dim);
      g.biases.emplace_back(1, s.out_dim);
    }
    return g;
  }

  friend bool operator==(const Network&, const Network&) = default;
};

/// Glorot-uniform weights, zero biases.
inline Network init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  Rng rng(seed);
  Network net;
  net.specs = specs;
  for (const auto& s : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    Matrix w(s.in_dim, s.out_dim);
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    net.params.weights.push_back(std::move(w));
    net.params.biases.emplace_back(1, s.out_dim);
  }
  return net;
}

/// Everything backward needs from one forward pass. `inputs[l]` feeds layer
/// l; `pre[l]` and `post[l]` are its affine output and activation.
struct ForwardTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& rep() const { return inputs.back(); }
  const Matrix& logits() const { return post.back(); }
};

inline ForwardTrace forward(const Network& net, const Matrix& batch) {
  if (batch.cols() != net.input_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "batch has " + std::to_string(batch.cols()) +
                                              " features, network expects " +
                                              std::to_string(net.input_dim()));
  }
  ForwardTrace trace;
  Matrix x = batch;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = matmul(x, net.params.weights[l]);
    const auto& b = net.params.biases[l];
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < z.cols(); ++j) r[j] += b(0, j);
    }
    Matrix a = z;
    if (net.specs[l].activation == Activation::Relu) {
      for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
    }
    trace.inputs.push_back(std::move(x));
    trace.pre.push_back(std::move(z));
    x = a;
    trace.post.push_back(std::move(a));
  }
  return trace;
}

/// Upstream gradients injected at the two taps of one trace. Either may be
/// absent.
struct TapGradients {
  const ForwardTrace* trace = nullptr;
  std::optional<Matrix> rep;
  std::optional<Matrix> logits;
};

/// Backpropagates every supplied stream and sums the parameter gradients.
inline ParamGrads backward(const Network& net, const std::vector<TapGradients>& streams) {
  ParamGrads grads = net.zero_grads();
  const std::size_t last = net.num_layers() - 1;
  for (const auto& stream : streams) {
    if (stream.trace == nullptr || stream.trace->post.size() != net.num_layers()) {
      throw Error(ErrorKind::ShapeMismatch, "trace does not belong to this network");
    }
    const ForwardTrace& trace = *stream.trace;
    const std::size_t n = trace.inputs.front().rows();
    auto check = [&](const std::optional<Matrix>& g, std::size_t cols, const char* tap) {
      if (g && (g->rows() != n || g->cols() != cols)) {
        throw Error(ErrorKind::ShapeMismatch, std::string("upstream gradient at ") + tap +
                                                  " tap is " + shape_string(*g) + ", expected " +
                                                  std::to_string(n) + "x" + std::to_string(cols));
      }
    };
    check(stream.logits, net.num_classes(), "logit");
    check(stream.rep, net.rep_dim(), "rep");

    // Gradient w.r.t. the current layer's output (post-activation).
    Matrix upstream = stream.logits ? *stream.logits : Matrix(n, net.num_classes());
    for (std::size_t l = last + 1; l-- > 0;) {
      Matrix dz = upstream;
      if (net.specs[l].activation == Activation::Relu) {
        const auto& z = trace.pre[l];
        for (std::size_t k = 0; k < dz.size(); ++k) {
          if (!(z.data()[k] > 0.0)) dz.data()[k] = 0.0;
        }
      }
      grads.weights[l] += matmul_tn(trace.inputs[l], dz);
      auto& gb = grads.biases[l];
      for (std::size_t i = 0; i < dz.rows(); ++i) {
        auto r = dz.row(i);
        for (std::size_t j = 0; j < dz.cols(); ++j) gb(0, j) += r[j];
      }
      if (l == 0) break;
      upstream = matmul_nt(dz, net.params.weights[l]);
      if (l == last && stream.rep) upstream += *stream.rep;
    }
    // Single-layer nets: the rep tap is the raw input and carries no parameters.
  }
  return grads;
}

/// Momentum velocities, one per parameter tensor.
struct OptimizerState {
  LayerParams velocity;

  static OptimizerState zeros_like(const Network& net) { return {net.zero_grads()}; }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct SgdParams {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// v <- momentum v - lr (g + weight_decay w); w <- w + v.
/// Weight decay applies to weights only, never to biases.
inline void sgd_step(Network& net, const ParamGrads& grads, const SgdParams& sgd,
                     OptimizerState& state) {
  if (state.velocity.weights.empty()) state = OptimizerState::zeros_like(net);
  if (grads.weights.size() != net.num_layers() || grads.biases.size() != net.num_layers()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient layer count does not match network");
  }
  auto update = [&](Matrix& param, const Matrix& grad, Matrix& velocity, double decay) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols() ||
        velocity.rows() != param.rows() || velocity.cols() != param.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "gradient " + shape_string(grad) +
                                                " does not match parameter " +
                                                shape_string(param));
    }
    auto& p = param.data();
    const auto& g = grad.data();
    auto& v = velocity.data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = sgd.momentum * v[k] - sgd.lr * (g[k] + decay * p[k]);
      p[k] += v[k];
    }
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    update(net.params.weights[l], grads.weights[l], state.velocity.weights[l], sgd.weight_decay);
    update(net.params.biases[l], grads.biases[l], state.velocity.biases[l], 0.0);
  }
}

}  // namespace mindisc
