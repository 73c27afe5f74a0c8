#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "desal/sal.hpp"
#include "desal/serialize.hpp"
#include "desal/synthdata.hpp"
#include "desal/tensor.hpp"

namespace desal {

/// A modality set is a list of channel names; the single name "all" stands
/// for every declared channel in declaration order.
using ModalitySet = std::vector<std::string>;

struct ExperimentConfig {
  GenSpec gen;
  SalConfig sal;
  std::vector<std::uint64_t> seeds = default_seeds();
  std::vector<ModalitySet> modality_sets = default_modality_sets();
  std::filesystem::path output_dir = "desal_out";
  /// Share of the training population held out as validation utterances.
  double val_frac = 0.2;
  /// Monte-Carlo draws for the pooled permutation test (exhaustive when n <= 20).
  std::size_t n_permutations = 10000;

  static std::vector<std::uint64_t> default_seeds();
  static std::vector<ModalitySet> default_modality_sets();

  /// Throws ConfigError on empty seeds or modality sets, unknown channel
  /// names, or any invalid nested config.
  void validate() const;
  /// Channel names of one modality set with "all" expanded.
  std::vector<std::string> resolve(const ModalitySet& set) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// "verbal+visual"; "all" stays "all".
std::string modality_set_name(const ModalitySet& set);

struct SplitAccuracy {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;

  friend bool operator==(const SplitAccuracy&, const SplitAccuracy&) = default;
};

/// Inter/intra cluster ratios of the test rows' classifier input, weighted by
/// the magnitude of f's first-layer weights, for the baseline and SAL models.
struct ClusterRatios {
  double label_baseline = 0.0;
  double label_sal = 0.0;
  double identity_baseline = 0.0;
  double identity_sal = 0.0;

  double label_gain() const { return label_sal / label_baseline - 1.0; }
  double identity_gain() const { return identity_sal / identity_baseline - 1.0; }

  friend bool operator==(const ClusterRatios&, const ClusterRatios&) = default;
};

/// One (seed, modality set) cell.
struct CellResult {
  std::uint64_t seed = 0;
  std::string modality_set;
  bool ok = false;
  std::string error;
  SplitAccuracy baseline;
  SplitAccuracy sal;
  /// Noise-free retraining of f for the same schedule (control for the extra epochs).
  SplitAccuracy retrained;
  PhaseTrace trace;
  ClusterRatios ratios;
  /// Dimensions whose mean |h(Z)| over the training rows exceeds 1e-3.
  std::size_t selected_dims = 0;

  friend bool operator==(const CellResult&, const CellResult&) = default;
};

/// Medians over the successful cells of one modality set.
struct ModalitySummary {
  std::string modality_set;
  std::size_t cells_ok = 0;
  SplitAccuracy baseline_median;
  SplitAccuracy sal_median;
  SplitAccuracy retrained_median;
  double label_gain_median = 0.0;
  double identity_gain_median = 0.0;
  /// One-sided paired test of SAL over baseline on the pooled test rows.
  double permutation_statistic = 0.0;
  double permutation_p = 1.0;
  std::size_t permutation_n = 0;

  friend bool operator==(const ModalitySummary&, const ModalitySummary&) = default;
};

/// h(Z) on the first training rows of the first successful cell.
struct SelectionMatrix {
  std::string modality_set;
  std::uint64_t seed = 0;
  Matrix values;

  friend bool operator==(const SelectionMatrix&, const SelectionMatrix&) = default;
};

struct ExperimentReport {
  /// Config echo. output_dir is cleared so the same experiment written to two
  /// places gives identical bytes.
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::vector<ModalitySummary> summaries;
  std::optional<SelectionMatrix> selection;

  const ModalitySummary* summary(const std::string& modality_set) const;

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

inline constexpr std::size_t kSelectionRows = 50;
inline constexpr std::size_t kSelectionCols = 100;

/// Runs every (seed, modality set) cell. Cells run on up to DESAL_THREADS
/// threads (default: hardware concurrency); results are ordered by modality
/// set then seed regardless. A cell that throws is recorded with ok=false.
ExperimentReport run_experiment(const ExperimentConfig& config);

void to_json(Json& j, const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);
void to_json(Json& j, const ExperimentReport& r);
void from_json(const Json& j, ExperimentReport& r);

/// Writes report.json, accuracy_table.csv and selection_matrix.csv into dir,
/// creating it when needed. Throws IoError.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace desal
