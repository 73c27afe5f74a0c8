#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "desal/nn.hpp"
#include "desal/sal.hpp"
#include "desal/synthdata.hpp"
#include "desal/tensor.hpp"

namespace fixtures {

using desal::Gradients;
using desal::LabeledDataset;
using desal::Matrix;
using desal::Network;
using desal::Rng;

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double sigma = 1.0) {
  return desal::randn(rng, r, c, sigma);
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor), where floor keeps tiny gradients from
// turning roundoff into a large ratio.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of loss() with respect to every parameter of net,
/// compared against `analytic`. Parameters failing `keep` are skipped.
inline GradCheck check_params(Network& net, const Gradients& analytic, const std::function<double()>& loss,
                              double step = 1e-5,
                              const std::function<bool(double)>& keep = [](double) { return true; }) {
  GradCheck out;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& layer = net.layers[k];
    auto visit = [&](Matrix& p, const Matrix& g) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        double& v = p.data()[i];
        if (!keep(v)) continue;
        const double saved = v;
        v = saved + step;
        const double up = loss();
        v = saved - step;
        const double down = loss();
        v = saved;
        const double numeric = (up - down) / (2.0 * step);
        out.max_rel_error = std::max(out.max_rel_error, rel_error(g.data()[i], numeric));
        ++out.checked;
      }
    };
    visit(layer.weights, analytic.layers[k].weights);
    visit(layer.bias, analytic.layers[k].bias);
  }
  return out;
}

/// Same for the entries of an input matrix.
inline GradCheck check_input(Matrix& x, const Matrix& analytic, const std::function<double()>& loss,
                             double step = 1e-5) {
  GradCheck out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double& v = x.data()[i];
    const double saved = v;
    v = saved + step;
    const double up = loss();
    v = saved - step;
    const double down = loss();
    v = saved;
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic.data()[i], (up - down) / (2.0 * step)));
    ++out.checked;
  }
  return out;
}

/// sum(c o y) so that the upstream gradient is exactly c.
inline double weighted_sum(const Matrix& y, const Matrix& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * c.data()[i];
  return s;
}

/// A stack exercising every layer kind: conv1d(window 3, 2 -> 3 channels),
/// relu, dense, tanh, dense, sigmoid.
inline std::vector<desal::LayerSpec> every_kind_spec() {
  using desal::LayerKind;
  using desal::LayerSpec;
  const LayerSpec conv = LayerSpec::conv1d(6, 2, 3, 3);  // 12 -> 3 * 4
  return {conv,
          LayerSpec::activation(LayerKind::relu, conv.out_dim),
          LayerSpec::dense(conv.out_dim, 5),
          LayerSpec::activation(LayerKind::tanh, 5),
          LayerSpec::dense(5, 2),
          LayerSpec::activation(LayerKind::sigmoid, 2)};
}

/// Two Gaussian blobs in 2-D separated by a wide margin, with one identity
/// per 20 points.
inline LabeledDataset separable_toy(std::uint64_t seed, std::size_t n = 200) {
  Rng rng(seed);
  LabeledDataset d;
  d.features = Matrix(n, 2);
  d.labels = Matrix(n, 1);
  d.identities.resize(n);
  d.identity_count = (n + 19) / 20;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = i % 2 == 0 ? 1.0 : 0.0;
    const double centre = y == 1.0 ? 2.0 : -2.0;
    d.features(i, 0) = centre + 0.5 * rng.normal();
    d.features(i, 1) = centre + 0.5 * rng.normal();
    d.labels(i, 0) = y;
    d.identities[i] = i / 20;
  }
  d.channels = {{"xy", 0, 2}};
  return d;
}

/// Small confounded dataset used by the sparsity sweep: 8 identities of 10
/// utterances each over the default channel layout.
inline LabeledDataset sparsity_fixture() {
  desal::GenSpec g;
  g.n_train_ids = 8;
  g.n_test_ids = 2;
  g.utt_per_id = 10;
  g.seed = 7;
  return desal::generate(g).train;
}

/// A short-budget config that still trains the defaults' architecture.
inline desal::SalConfig quick_config(std::uint64_t seed = 0) {
  desal::SalConfig c;
  c.epochs_base = 30;
  c.epochs_select = 30;
  c.epochs_add = 30;
  c.seed = seed;
  return c;
}

}  // namespace fixtures
