#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "desal/nn.hpp"
#include "desal/synthdata.hpp"
#include "desal/tensor.hpp"

namespace desal {

enum class NoiseResample { per_epoch, per_step };
enum class Phase { base_trained, selected, added };

std::string_view to_string(NoiseResample r);
std::string_view to_string(Phase p);
NoiseResample noise_resample_from_string(std::string_view s);
Phase phase_from_string(std::string_view s);

/// Architecture template: the first layer's in_dim and, where noted, the last
/// dense layer's out_dim are filled in from the data by resolve_arch.
using ArchTemplate = std::vector<LayerSpec>;

/// conv1d(window 1, 4 channels) -> tanh over the raw feature sequence.
ArchTemplate default_arch_g();
/// dense(-> 1) -> sigmoid.
ArchTemplate default_arch_f();
/// A single dense layer (a perceptron over the one-hot identity).
ArchTemplate default_arch_h();

/// Propagates dimensions through a template starting from in_dim. Dense
/// layers keep their out_dim unless they are the last parameterised layer and
/// out_dim is given. Conv1d layers keep window and channel count; length
/// follows from the incoming width. Throws SpecError when nothing fits.
std::vector<LayerSpec> resolve_arch(const ArchTemplate& tmpl, std::size_t in_dim,
                                    std::optional<std::size_t> out_dim = std::nullopt);

struct SalConfig {
  double lambda_sparsity = 0.001;
  double noise_sigma = 4.0;
  double lr_base = 0.05;
  double lr_select = 0.5;
  double lr_add = 0.05;
  std::size_t epochs_base = 300;
  std::size_t epochs_select = 300;
  std::size_t epochs_add = 300;
  /// Rows per gradient step for the base and addition phases; 0 means full batch.
  /// The selection phase always uses the full batch.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  ArchTemplate arch_g = default_arch_g();
  ArchTemplate arch_f = default_arch_f();
  ArchTemplate arch_h = default_arch_h();
  NoiseResample noise_resample = NoiseResample::per_epoch;
  /// Re-draw the classifier parameters before the addition phase instead of
  /// continuing from the pretrained ones.
  bool reinit_classifier = false;

  /// Throws ConfigError for non-positive rates, zero epochs, negative lambda or sigma.
  void validate() const;

  friend bool operator==(const SalConfig&, const SalConfig&) = default;
};

/// Per-epoch losses. Base and addition entries are the mean mini-batch loss of
/// the epoch; selection entries are the full objective before each step.
struct PhaseTrace {
  std::vector<double> base;
  std::vector<double> select;
  std::vector<double> add;

  friend bool operator==(const PhaseTrace&, const PhaseTrace&) = default;
};

/// Representation learner g, classifier f and selector h.
struct SalModel {
  Network g;
  Network f;
  Network h;
  Phase phase = Phase::base_trained;
  std::size_t identity_count = 0;
  PhaseTrace trace;

  friend bool operator==(const SalModel&, const SalModel&) = default;
};

/// Mean over rows of 1/2 (y - f(g(x)))^2.
double base_loss(const Network& g, const Network& f, const Matrix& x, const Matrix& y);

/// Mean over rows of 1/2 ||target - h(z)||^2 plus lambda times the L1 norm of
/// every parameter of h.
double selection_objective(const Network& h, const Matrix& z, const Matrix& target, double lambda);
/// Gradient of the smooth part plus lambda * sign(param), with sign(0) = 0.
Gradients selection_gradient(const Network& h, const Matrix& z, const Matrix& target, double lambda);

/// Mean over rows of 1/2 (y - f(rep + mask o eps))^2 for a fixed noise draw.
double addition_objective(const Network& f, const Matrix& rep, const Matrix& mask, const Matrix& eps,
                          const Matrix& y);
Gradients addition_gradient(const Network& f, const Matrix& rep, const Matrix& mask, const Matrix& eps,
                            const Matrix& y);

/// Draws g, f and h from cfg.seed and trains g and f jointly on the squared loss.
SalModel pretrain_base(const LabeledDataset& data, const SalConfig& cfg);

/// Fits h(Z) to the frozen representation g(X) under L1 sparsity. Steps are
/// proximal: a gradient step on the smooth part followed by soft-thresholding
/// at lr * lambda, so parameters reach exact zeros.
SalModel selection_phase(SalModel model, const LabeledDataset& data, const SalConfig& cfg);

/// Retrains f on g(X) + h(Z) o eps, eps ~ N(0, sigma^2 I), with g and h frozen.
/// `rng` feeds only the noise; mini-batch order is derived from cfg.seed.
SalModel addition_phase(SalModel model, const LabeledDataset& data, const SalConfig& cfg, Rng& rng);

/// Noise-free counterpart of addition_phase: same schedule, batch order and
/// learning rate, input g(X). Leaves the phase tag untouched; records into trace.add.
SalModel retrain_classifier(SalModel model, const LabeledDataset& data, const SalConfig& cfg);

/// mask o eps with eps ~ N(0, sigma^2) drawn fresh for every entry.
Matrix gaussian_sample(const Matrix& mask, double sigma, Rng& rng);

Matrix representation(const SalModel& model, const Matrix& x);
/// h(Z) for the rows of data.
Matrix selection_mask(const SalModel& model, const LabeledDataset& data);
Matrix predict_proba(const SalModel& model, const Matrix& x);
/// f(g(x)) thresholded into {0,1}; an output of exactly 0.5 maps to 1.
Matrix predict(const SalModel& model, const Matrix& x);
std::vector<int> predict_labels(const SalModel& model, const Matrix& x);

}  // namespace desal
