#include "desal/nn.hpp"

#include <cmath>

#include "desal/error.hpp"

namespace desal {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::sigmoid: return "sigmoid";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (LayerKind k : {LayerKind::dense, LayerKind::conv1d, LayerKind::relu, LayerKind::tanh,
                      LayerKind::sigmoid}) {
    if (to_string(k) == name) return k;
  }
  throw SpecError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  return LayerSpec{LayerKind::dense, in, out, 0, 0, 1};
}

LayerSpec LayerSpec::conv1d(std::size_t length, std::size_t in_channels, std::size_t channels,
                            std::size_t window) {
  LayerSpec s{LayerKind::conv1d, length * in_channels, 0, window, channels, in_channels};
  s.out_dim = window <= length ? channels * (length + 1 - window) : 0;
  return s;
}

LayerSpec LayerSpec::activation(LayerKind kind, std::size_t dim) {
  return LayerSpec{kind, dim, dim, 0, 0, 1};
}

std::size_t LayerSpec::fan_in() const noexcept {
  return kind == LayerKind::conv1d ? in_channels * window : in_dim;
}

namespace {

std::string describe(std::size_t k, const LayerSpec& s) {
  return "layer " + std::to_string(k) + " (" + std::string(to_string(s.kind)) + ")";
}

void check_layer(std::size_t k, const LayerSpec& s) {
  if (s.in_dim == 0 || s.out_dim == 0) throw SpecError(describe(k, s) + ": zero dimension");
  switch (s.kind) {
    case LayerKind::dense:
      break;
    case LayerKind::conv1d:
      if (s.in_channels == 0 || s.channels == 0 || s.window == 0)
        throw SpecError(describe(k, s) + ": window and channel counts must be >= 1");
      if (s.in_dim % s.in_channels != 0)
        throw SpecError(describe(k, s) + ": in_dim not divisible by in_channels");
      if (s.window > s.length()) throw SpecError(describe(k, s) + ": window longer than input");
      if (s.out_dim != s.channels * s.out_length())
        throw SpecError(describe(k, s) + ": out_dim must equal channels * (length - window + 1)");
      break;
    case LayerKind::relu:
    case LayerKind::tanh:
    case LayerKind::sigmoid:
      if (s.in_dim != s.out_dim) throw SpecError(describe(k, s) + ": activation must keep its width");
      break;
  }
}

double activate(LayerKind kind, double z) {
  switch (kind) {
    case LayerKind::relu: return z > 0.0 ? z : 0.0;
    case LayerKind::tanh: return std::tanh(z);
    case LayerKind::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    default: return z;
  }
}

// Derivative expressed through the layer input z and output a.
double activate_grad(LayerKind kind, double z, double a) {
  switch (kind) {
    case LayerKind::relu: return z > 0.0 ? 1.0 : 0.0;
    case LayerKind::tanh: return 1.0 - a * a;
    case LayerKind::sigmoid: return a * (1.0 - a);
    default: return 1.0;
  }
}

Matrix dense_forward(const Layer& l, const Matrix& x) {
  Matrix y = matmul(x, l.weights);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += l.bias(0, c);
  }
  return y;
}

Matrix conv_forward(const Layer& l, const Matrix& x) {
  const LayerSpec& s = l.spec;
  const std::size_t len = s.length();
  const std::size_t out_len = s.out_length();
  Matrix y(x.rows(), s.out_dim);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    for (std::size_t o = 0; o < s.channels; ++o) {
      auto w = l.weights.row(o);
      for (std::size_t t = 0; t < out_len; ++t) {
        double acc = l.bias(0, o);
        for (std::size_t ci = 0; ci < s.in_channels; ++ci)
          for (std::size_t k = 0; k < s.window; ++k)
            acc += w[ci * s.window + k] * in[ci * len + t + k];
        out[o * out_len + t] = acc;
      }
    }
  }
  return y;
}

Matrix layer_forward(const Layer& l, const Matrix& x) {
  switch (l.spec.kind) {
    case LayerKind::dense: return dense_forward(l, x);
    case LayerKind::conv1d: return conv_forward(l, x);
    default: {
      Matrix y(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = activate(l.spec.kind, x.data()[i]);
      return y;
    }
  }
}

// Writes parameter gradients into g and returns the gradient w.r.t. the layer input.
Matrix layer_backward(const Layer& l, const Matrix& x, const Matrix& y, const Matrix& up,
                      ParamGrad& g, bool need_input_grad) {
  const LayerSpec& s = l.spec;
  switch (s.kind) {
    case LayerKind::dense: {
      g.weights = matmul_tn(x, up);
      g.bias = column_sums(up);
      return need_input_grad ? matmul_nt(up, l.weights) : Matrix();
    }
    case LayerKind::conv1d: {
      const std::size_t len = s.length();
      const std::size_t out_len = s.out_length();
      g.weights = Matrix(l.weights.rows(), l.weights.cols());
      g.bias = Matrix(1, s.channels);
      Matrix dx = need_input_grad ? Matrix(x.rows(), x.cols()) : Matrix();
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto d_out = up.row(r);
        auto d_in = need_input_grad ? dx.row(r) : std::span<double>();
        for (std::size_t o = 0; o < s.channels; ++o) {
          auto w = l.weights.row(o);
          auto gw = g.weights.row(o);
          for (std::size_t t = 0; t < out_len; ++t) {
            const double d = d_out[o * out_len + t];
            if (d == 0.0) continue;
            g.bias(0, o) += d;
            for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
              for (std::size_t k = 0; k < s.window; ++k) gw[ci * s.window + k] += d * in[ci * len + t + k];
              if (!need_input_grad) continue;
              for (std::size_t k = 0; k < s.window; ++k) d_in[ci * len + t + k] += d * w[ci * s.window + k];
            }
          }
        }
      }
      return dx;
    }
    default: {
      Matrix dx(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.size(); ++i)
        dx.data()[i] = up.data()[i] * activate_grad(s.kind, x.data()[i], y.data()[i]);
      return dx;
    }
  }
}

}  // namespace

void validate_spec(std::span<const LayerSpec> spec) {
  if (spec.empty()) throw SpecError("network needs at least one layer");
  for (std::size_t k = 0; k < spec.size(); ++k) {
    check_layer(k, spec[k]);
    if (k > 0 && spec[k - 1].out_dim != spec[k].in_dim) {
      throw SpecError(describe(k, spec[k]) + ": in_dim " + std::to_string(spec[k].in_dim) +
                      " does not match previous out_dim " + std::to_string(spec[k - 1].out_dim));
    }
  }
}

std::size_t Network::in_dim() const { return layers.empty() ? 0 : layers.front().spec.in_dim; }
std::size_t Network::out_dim() const { return layers.empty() ? 0 : layers.back().spec.out_dim; }

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<LayerSpec> Network::spec() const {
  std::vector<LayerSpec> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

bool Network::all_finite() const {
  for (const auto& l : layers)
    if (!l.weights.all_finite() || !l.bias.all_finite()) return false;
  return true;
}

bool Gradients::all_finite() const {
  for (const auto& g : layers)
    if (!g.weights.all_finite() || !g.bias.all_finite()) return false;
  return true;
}

Network init_network(std::span<const LayerSpec> spec, Rng& rng) {
  validate_spec(spec);
  Network net;
  for (const LayerSpec& s : spec) {
    Layer l{s, {}, {}};
    if (s.kind == LayerKind::dense) {
      l.weights = randn(rng, s.in_dim, s.out_dim, 1.0 / std::sqrt(static_cast<double>(s.fan_in())));
      l.bias = Matrix(1, s.out_dim);
    } else if (s.kind == LayerKind::conv1d) {
      l.weights = randn(rng, s.channels, s.in_channels * s.window,
                        1.0 / std::sqrt(static_cast<double>(s.fan_in())));
      l.bias = Matrix(1, s.channels);
    }
    net.layers.push_back(std::move(l));
  }
  return net;
}

ForwardTrace forward_trace(const Network& net, const Matrix& x) {
  if (net.layers.empty()) throw SpecError("forward on an empty network");
  if (x.cols() != net.in_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(net.in_dim()));
  }
  ForwardTrace trace;
  trace.values.reserve(net.layers.size() + 1);
  trace.values.push_back(x);
  for (const auto& l : net.layers) trace.values.push_back(layer_forward(l, trace.values.back()));
  return trace;
}

Matrix forward(const Network& net, const Matrix& x) {
  if (net.layers.empty()) throw SpecError("forward on an empty network");
  if (x.cols() != net.in_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(net.in_dim()));
  }
  Matrix cur = x;
  for (const auto& l : net.layers) cur = layer_forward(l, cur);
  return cur;
}

Backprop backward(const Network& net, const ForwardTrace& trace, const Matrix& upstream,
                  bool need_input_grad) {
  if (trace.values.size() != net.layers.size() + 1) throw ShapeError("backward: trace does not match network");
  const Matrix& out = trace.output();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ShapeError("backward: upstream " + upstream.shape_string() + " does not match output " +
                     out.shape_string());
  }
  Backprop bp;
  bp.grads.layers.resize(net.layers.size());
  Matrix d = upstream;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    d = layer_backward(net.layers[k], trace.values[k], trace.values[k + 1], d, bp.grads.layers[k],
                       need_input_grad || k > 0);
  }
  bp.input_grad = std::move(d);
  return bp;
}

Backprop backward(const Network& net, const Matrix& x, const Matrix& upstream) {
  return backward(net, forward_trace(net, x), upstream);
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  for (const auto& l : net.layers)
    g.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()), Matrix(l.bias.rows(), l.bias.cols())});
  return g;
}

void optimizer_step(Network& net, const Gradients& grads, double lr) {
  if (!std::isfinite(lr)) throw ParamError("optimizer_step: learning rate must be finite");
  if (grads.layers.size() != net.layers.size()) throw ShapeError("optimizer_step: gradient/network layer count mismatch");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    const auto& g = grads.layers[k];
    if (g.weights.rows() != l.weights.rows() || g.weights.cols() != l.weights.cols() ||
        g.bias.rows() != l.bias.rows() || g.bias.cols() != l.bias.cols()) {
      throw ShapeError("optimizer_step: gradient shape mismatch at layer " + std::to_string(k));
    }
  }
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient", 0);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    const auto& g = grads.layers[k];
    for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights.data()[i] -= lr * g.weights.data()[i];
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias.data()[i] -= lr * g.bias.data()[i];
  }
  if (!net.all_finite()) throw DivergenceError("non-finite parameter after update", 0);
}

}  // namespace desal
