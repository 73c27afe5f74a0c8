#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "desal/tensor.hpp"

namespace desal {

enum class LayerKind { dense, conv1d, relu, tanh, sigmoid };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// Shape description of one layer.
///
/// conv1d treats its input as `in_channels` channel-major sequences of
/// length in_dim / in_channels (feature index = channel * length + position)
/// and applies a valid, stride-1 convolution producing `channels` output
/// channels in the same layout.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t window = 0;
  std::size_t channels = 0;
  std::size_t in_channels = 1;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::size_t length, std::size_t in_channels, std::size_t channels,
                          std::size_t window);
  static LayerSpec activation(LayerKind kind, std::size_t dim);

  bool has_params() const noexcept { return kind == LayerKind::dense || kind == LayerKind::conv1d; }
  std::size_t length() const noexcept { return in_channels ? in_dim / in_channels : 0; }
  std::size_t out_length() const noexcept { return length() + 1 - window; }
  std::size_t fan_in() const noexcept;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Throws SpecError unless every layer is internally consistent and
/// consecutive layers agree on dimensions.
void validate_spec(std::span<const LayerSpec> spec);

/// Parameters of one layer. Dense: weights in_dim x out_dim, bias 1 x out_dim.
/// Conv1d: weights channels x (in_channels * window), bias 1 x channels.
/// Activations carry empty matrices.
struct Layer {
  LayerSpec spec;
  Matrix weights;
  Matrix bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct Network {
  std::vector<Layer> layers;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t param_count() const;
  std::vector<LayerSpec> spec() const;
  bool all_finite() const;

  friend bool operator==(const Network&, const Network&) = default;
};

struct ParamGrad {
  Matrix weights;
  Matrix bias;
};

/// One entry per layer, mirroring Network::layers.
struct Gradients {
  std::vector<ParamGrad> layers;

  bool all_finite() const;
};

/// Layer inputs and outputs from one forward pass: values[0] is the network
/// input, values[k + 1] the output of layer k.
struct ForwardTrace {
  std::vector<Matrix> values;

  const Matrix& output() const { return values.back(); }
};

struct Backprop {
  Gradients grads;
  Matrix input_grad;
};

/// Weights ~ N(0, 1/fan_in), biases zero.
Network init_network(std::span<const LayerSpec> spec, Rng& rng);

Matrix forward(const Network& net, const Matrix& x);
ForwardTrace forward_trace(const Network& net, const Matrix& x);

/// Parameter gradients and, unless need_input_grad is false (input_grad left
/// empty), the gradient with respect to the network input.
Backprop backward(const Network& net, const Matrix& x, const Matrix& upstream);
Backprop backward(const Network& net, const ForwardTrace& trace, const Matrix& upstream,
                  bool need_input_grad = true);

Gradients zero_gradients(const Network& net);

/// Plain gradient descent: param -= lr * grad.
///
/// Throws DivergenceError (epoch 0) when a gradient or an updated parameter
/// is non-finite; the caller rethrows with its own epoch index.
void optimizer_step(Network& net, const Gradients& grads, double lr);

}  // namespace desal
