#include "desal/sal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "desal/error.hpp"

namespace desal {

std::string_view to_string(NoiseResample r) {
  return r == NoiseResample::per_epoch ? "per_epoch" : "per_step";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::base_trained: return "base_trained";
    case Phase::selected: return "selected";
    case Phase::added: return "added";
  }
  return "unknown";
}

NoiseResample noise_resample_from_string(std::string_view s) {
  if (s == "per_epoch") return NoiseResample::per_epoch;
  if (s == "per_step") return NoiseResample::per_step;
  throw ConfigError("noise_resample must be per_epoch or per_step, got '" + std::string(s) + "'");
}

Phase phase_from_string(std::string_view s) {
  for (Phase p : {Phase::base_trained, Phase::selected, Phase::added})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown phase '" + std::string(s) + "'");
}

ArchTemplate default_arch_g() {
  LayerSpec conv{LayerKind::conv1d, 0, 0, 1, 4, 1};
  return {conv, LayerSpec::activation(LayerKind::tanh, 0)};
}

ArchTemplate default_arch_f() {
  return {LayerSpec::dense(0, 1), LayerSpec::activation(LayerKind::sigmoid, 0)};
}

ArchTemplate default_arch_h() { return {LayerSpec::dense(0, 0)}; }

std::vector<LayerSpec> resolve_arch(const ArchTemplate& tmpl, std::size_t in_dim,
                                    std::optional<std::size_t> out_dim) {
  if (tmpl.empty()) throw SpecError("architecture template is empty");
  std::size_t last_param = tmpl.size();
  for (std::size_t k = 0; k < tmpl.size(); ++k)
    if (tmpl[k].has_params()) last_param = k;

  std::vector<LayerSpec> out;
  std::size_t prev = in_dim;
  for (std::size_t k = 0; k < tmpl.size(); ++k) {
    LayerSpec s = tmpl[k];
    s.in_dim = prev;
    switch (s.kind) {
      case LayerKind::dense:
        if (k == last_param && out_dim) s.out_dim = *out_dim;
        break;
      case LayerKind::conv1d:
        if (s.in_channels == 0 || prev % s.in_channels != 0)
          throw SpecError("conv1d layer " + std::to_string(k) + ": width " + std::to_string(prev) +
                          " is not divisible by in_channels");
        if (s.window == 0 || s.window > s.length())
          throw SpecError("conv1d layer " + std::to_string(k) + ": window does not fit the input length");
        s.out_dim = s.channels * s.out_length();
        break;
      default:
        s.out_dim = prev;
        break;
    }
    out.push_back(s);
    prev = s.out_dim;
  }
  if (out_dim && prev != *out_dim)
    throw SpecError("architecture produces width " + std::to_string(prev) + ", expected " +
                    std::to_string(*out_dim));
  validate_spec(out);
  return out;
}

void SalConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(lr_base) || !positive(lr_select) || !positive(lr_add))
    throw ConfigError("learning rates must be finite and > 0");
  if (epochs_base < 1 || epochs_select < 1 || epochs_add < 1) throw ConfigError("epoch counts must be >= 1");
  if (!(lambda_sparsity >= 0.0) || !std::isfinite(lambda_sparsity)) throw ConfigError("lambda must be >= 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("sigma must be >= 0");
  if (arch_g.empty() || arch_f.empty() || arch_h.empty()) throw ConfigError("architectures must be non-empty");
}

namespace {

// Independent streams derived from the config seed.
enum class Stream : int { init = 0, base_batches = 1, add_batches = 2, reinit = 3 };

Rng stream_rng(std::uint64_t seed, Stream s) {
  Rng root(seed);
  Rng out = root.split();
  for (int i = 0; i < static_cast<int>(s); ++i) out = root.split();
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (batch_size == 0 || batch_size >= n) return {order};
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

double half_mse(const Matrix& pred, const Matrix& y) {
  if (pred.rows() != y.rows() || pred.cols() != y.cols())
    throw ShapeError("loss: prediction " + pred.shape_string() + " vs target " + y.shape_string());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - y.data()[i];
    s += d * d;
  }
  return 0.5 * s / static_cast<double>(pred.rows());
}

// d/dpred of half_mse.
Matrix half_mse_grad(const Matrix& pred, const Matrix& y) {
  Matrix g = sub(pred, y);
  const double inv = 1.0 / static_cast<double>(pred.rows());
  for (double& v : g.data()) v *= inv;
  return g;
}

double l1_norm(const Network& net) {
  double s = 0.0;
  for (const auto& l : net.layers) {
    for (double v : l.weights.data()) s += std::abs(v);
    for (double v : l.bias.data()) s += std::abs(v);
  }
  return s;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void soft_threshold(Matrix& m, double t) {
  for (double& v : m.data()) v = std::abs(v) <= t ? 0.0 : v - t * sign(v);
}

void step_or_throw(Network& net, const Gradients& g, double lr, std::size_t epoch) {
  try {
    optimizer_step(net, g, lr);
  } catch (const DivergenceError& e) {
    throw DivergenceError(e.what(), epoch);
  }
}

void check_finite_loss(double loss, const char* phase, std::size_t epoch) {
  if (!std::isfinite(loss)) throw DivergenceError(std::string(phase) + " loss is not finite", epoch);
}

void require_rows(const LabeledDataset& data) {
  if (data.rows() == 0) throw DegenerateError("training data has no rows");
  data.validate();
}

void require_identities(const SalModel& model, const LabeledDataset& data) {
  if (data.identity_count != model.identity_count)
    throw ShapeError("data has " + std::to_string(data.identity_count) + " identities, model expects " +
                     std::to_string(model.identity_count));
}

// Shared by addition_phase and retrain_classifier: trains f on rep (+ mask o eps).
void train_head(SalModel& model, const Matrix& rep, const Matrix& y, const SalConfig& cfg,
                const Matrix* mask, Rng* noise) {
  if (cfg.reinit_classifier) {
    Rng r = stream_rng(cfg.seed, Stream::reinit);
    const auto spec = model.f.spec();
    model.f = init_network(spec, r);
  }
  Rng batches_rng = stream_rng(cfg.seed, Stream::add_batches);
  model.trace.add.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs_add; ++epoch) {
    Matrix epoch_noise;
    if (mask && cfg.noise_resample == NoiseResample::per_epoch)
      epoch_noise = gaussian_sample(*mask, cfg.noise_sigma, *noise);
    double loss_sum = 0.0;
    const auto batches = make_batches(rep.rows(), cfg.batch_size, batches_rng);
    for (const auto& idx : batches) {
      const bool whole = batches.size() == 1;
      Matrix input = whole ? rep : gather_rows(rep, idx);
      if (mask) {
        const Matrix shift = cfg.noise_resample == NoiseResample::per_epoch
                                 ? (whole ? std::move(epoch_noise) : gather_rows(epoch_noise, idx))
                                 : gaussian_sample(whole ? *mask : gather_rows(*mask, idx), cfg.noise_sigma, *noise);
        for (std::size_t i = 0; i < input.size(); ++i) input.data()[i] += shift.data()[i];
      }
      const Matrix target = whole ? y : gather_rows(y, idx);
      ForwardTrace tr = forward_trace(model.f, input);
      const double loss = half_mse(tr.output(), target);
      check_finite_loss(loss, "addition", epoch);
      loss_sum += loss;
      Backprop bp = backward(model.f, tr, half_mse_grad(tr.output(), target), false);
      step_or_throw(model.f, bp.grads, cfg.lr_add, epoch);
    }
    model.trace.add.push_back(loss_sum / static_cast<double>(batches.size()));
  }
}

}  // namespace

double base_loss(const Network& g, const Network& f, const Matrix& x, const Matrix& y) {
  return half_mse(forward(f, forward(g, x)), y);
}

double selection_objective(const Network& h, const Matrix& z, const Matrix& target, double lambda) {
  return half_mse(forward(h, z), target) + lambda * l1_norm(h);
}

Gradients selection_gradient(const Network& h, const Matrix& z, const Matrix& target, double lambda) {
  ForwardTrace tr = forward_trace(h, z);
  Gradients g = backward(h, tr, half_mse_grad(tr.output(), target)).grads;
  for (std::size_t k = 0; k < h.layers.size(); ++k) {
    const auto& l = h.layers[k];
    auto& gl = g.layers[k];
    for (std::size_t i = 0; i < l.weights.size(); ++i) gl.weights.data()[i] += lambda * sign(l.weights.data()[i]);
    for (std::size_t i = 0; i < l.bias.size(); ++i) gl.bias.data()[i] += lambda * sign(l.bias.data()[i]);
  }
  return g;
}

double addition_objective(const Network& f, const Matrix& rep, const Matrix& mask, const Matrix& eps,
                          const Matrix& y) {
  return half_mse(forward(f, add(rep, mul(mask, eps))), y);
}

Gradients addition_gradient(const Network& f, const Matrix& rep, const Matrix& mask, const Matrix& eps,
                            const Matrix& y) {
  ForwardTrace tr = forward_trace(f, add(rep, mul(mask, eps)));
  return backward(f, tr, half_mse_grad(tr.output(), y)).grads;
}

SalModel pretrain_base(const LabeledDataset& data, const SalConfig& cfg) {
  cfg.validate();
  require_rows(data);

  const auto g_spec = resolve_arch(cfg.arch_g, data.dims());
  const std::size_t rep_dim = g_spec.back().out_dim;
  const auto f_spec = resolve_arch(cfg.arch_f, rep_dim, std::size_t{1});
  const auto h_spec = resolve_arch(cfg.arch_h, data.identity_count, rep_dim);

  Rng init = stream_rng(cfg.seed, Stream::init);
  SalModel model;
  model.g = init_network(g_spec, init);
  model.f = init_network(f_spec, init);
  model.h = init_network(h_spec, init);
  model.identity_count = data.identity_count;

  Rng batches_rng = stream_rng(cfg.seed, Stream::base_batches);
  for (std::size_t epoch = 0; epoch < cfg.epochs_base; ++epoch) {
    const auto batches = make_batches(data.rows(), cfg.batch_size, batches_rng);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
      const Matrix x = gather_rows(data.features, idx);
      const Matrix y = gather_rows(data.labels, idx);
      ForwardTrace tg = forward_trace(model.g, x);
      ForwardTrace tf = forward_trace(model.f, tg.output());
      const double loss = half_mse(tf.output(), y);
      check_finite_loss(loss, "base", epoch);
      loss_sum += loss;
      Backprop bf = backward(model.f, tf, half_mse_grad(tf.output(), y));
      Backprop bg = backward(model.g, tg, bf.input_grad, false);
      step_or_throw(model.f, bf.grads, cfg.lr_base, epoch);
      step_or_throw(model.g, bg.grads, cfg.lr_base, epoch);
    }
    model.trace.base.push_back(loss_sum / static_cast<double>(batches.size()));
  }
  model.phase = Phase::base_trained;
  return model;
}

SalModel selection_phase(SalModel model, const LabeledDataset& data, const SalConfig& cfg) {
  cfg.validate();
  if (model.phase != Phase::base_trained)
    throw StateError("selection phase requires a base-trained model, model is " + std::string(to_string(model.phase)));
  require_rows(data);
  require_identities(model, data);

  const Matrix target = forward(model.g, data.features);
  const Matrix z = one_hot(data.identities, data.identity_count);
  const double lr = cfg.lr_select;
  const double threshold = lr * cfg.lambda_sparsity;

  model.trace.select.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs_select; ++epoch) {
    ForwardTrace tr = forward_trace(model.h, z);
    const double objective = half_mse(tr.output(), target) + cfg.lambda_sparsity * l1_norm(model.h);
    check_finite_loss(objective, "selection", epoch);
    model.trace.select.push_back(objective);
    Backprop bp = backward(model.h, tr, half_mse_grad(tr.output(), target), false);
    step_or_throw(model.h, bp.grads, lr, epoch);
    for (auto& l : model.h.layers) {
      soft_threshold(l.weights, threshold);
      soft_threshold(l.bias, threshold);
    }
  }
  model.phase = Phase::selected;
  return model;
}

SalModel addition_phase(SalModel model, const LabeledDataset& data, const SalConfig& cfg, Rng& rng) {
  cfg.validate();
  if (model.phase != Phase::selected)
    throw StateError("addition phase requires a selected model, model is " + std::string(to_string(model.phase)));
  require_rows(data);
  require_identities(model, data);

  const Matrix rep = forward(model.g, data.features);
  const Matrix mask = forward(model.h, one_hot(data.identities, data.identity_count));
  train_head(model, rep, data.labels, cfg, &mask, &rng);
  model.phase = Phase::added;
  return model;
}

SalModel retrain_classifier(SalModel model, const LabeledDataset& data, const SalConfig& cfg) {
  cfg.validate();
  require_rows(data);
  const Matrix rep = forward(model.g, data.features);
  train_head(model, rep, data.labels, cfg, nullptr, nullptr);
  return model;
}

Matrix gaussian_sample(const Matrix& mask, double sigma, Rng& rng) {
  return mul(mask, randn(rng, mask.rows(), mask.cols(), sigma));
}

Matrix representation(const SalModel& model, const Matrix& x) { return forward(model.g, x); }

Matrix selection_mask(const SalModel& model, const LabeledDataset& data) {
  require_identities(model, data);
  return forward(model.h, one_hot(data.identities, data.identity_count));
}

Matrix predict_proba(const SalModel& model, const Matrix& x) { return forward(model.f, forward(model.g, x)); }

Matrix predict(const SalModel& model, const Matrix& x) {
  Matrix p = predict_proba(model, x);
  for (double& v : p.data()) v = v >= 0.5 ? 1.0 : 0.0;
  return p;
}

std::vector<int> predict_labels(const SalModel& model, const Matrix& x) {
  Matrix p = predict(model, x);
  std::vector<int> out(p.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p(i, 0) == 1.0 ? 1 : 0;
  return out;
}

}  // namespace desal
