#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "desal/tensor.hpp"

namespace desal {

/// A named block of feature columns [start, end) belonging to one modality.
struct Channel {
  std::string name;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t width() const noexcept { return end - start; }
  friend bool operator==(const Channel&, const Channel&) = default;
};

/// Features X (n x p), binary labels y (n x 1) and the speaker identity of
/// every row. identity_count is m, the width of the one-hot identity matrix.
struct LabeledDataset {
  Matrix features;
  Matrix labels;
  std::vector<std::size_t> identities;
  std::size_t identity_count = 0;
  std::vector<Channel> channels;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t dims() const noexcept { return features.cols(); }
  std::vector<int> label_vector() const;
  /// Sorted distinct identity ids present in the rows.
  std::vector<std::size_t> distinct_identities() const;
  /// Throws on any broken invariant (label outside {0,1}, id >= m, channels
  /// not partitioning the columns, length mismatches).
  void validate() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Layout of one synthetic modality: signal, then confound, then noise columns.
struct ChannelSpec {
  std::string name;
  std::size_t signal_dims = 0;
  std::size_t confound_dims = 0;
  std::size_t noise_dims = 0;

  std::size_t width() const noexcept { return signal_dims + confound_dims + noise_dims; }
  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

/// Parameters of the identity-confounded generator.
///
/// Every identity has a dominant label (half the identities of each
/// population are positive) and each of its utterances carries that label
/// with probability label_purity. Each identity also has a persistent
/// attribute c in {-1, +1}, written into every confound column with
/// confound_noise_std jitter. Among training identities c agrees with the
/// dominant label with probability confound_align; among test identities
/// the agreement probability is 0.5.
struct GenSpec {
  std::size_t n_train_ids = 40;
  std::size_t n_test_ids = 20;
  std::size_t utt_per_id = 30;
  std::vector<ChannelSpec> channels = default_channels();
  double signal_noise_std = 2.0;
  double confound_align = 1.0;
  double label_purity = 0.9;
  double confound_noise_std = 0.1;
  std::uint64_t seed = 0;

  static std::vector<ChannelSpec> default_channels();
  std::size_t dims() const;
  void validate() const;

  friend bool operator==(const GenSpec&, const GenSpec&) = default;
};

/// Ground truth of one generated identity.
struct IdentityTruth {
  std::size_t id = 0;
  int confound = 0;  // -1 or +1
  int dominant_label = 0;
};

struct SyntheticData {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<IdentityTruth> train_truth;
  std::vector<IdentityTruth> test_truth;
};

/// Train identities get ids [0, n_train), test identities [n_train, n_train + n_test).
/// The train set has identity_count n_train, the test set n_train + n_test.
SyntheticData generate(const GenSpec& spec);

/// 2 x 2 identity-level counts: rows are confound -1/+1, columns dominant label 0/1.
Matrix confound_label_counts(std::span<const IdentityTruth> truth);

/// n x m matrix with a single 1 per row; throws RangeError for an id >= m.
Matrix one_hot(std::span<const std::size_t> identities, std::size_t m);

LabeledDataset subset_rows(const LabeledDataset& data, std::span<const std::size_t> rows);

/// Keeps only the named channels, in the order given, concatenating their columns.
LabeledDataset select_channels(const LabeledDataset& data, std::span<const std::string> names);

/// Shuffles the rows and moves floor(val_frac * n) of them into the second set.
std::pair<LabeledDataset, LabeledDataset> utterance_split(const LabeledDataset& data, double val_frac,
                                                          Rng& rng);

struct PersonSplit {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Identities are shuffled and floor(train_frac_ids * m_present) of them kept
/// for train+val; the rest become the test identities. The train+val rows are
/// then split by utterance_split, so validation shares speakers with training
/// while test speakers are unseen.
PersonSplit person_independent_split(const LabeledDataset& data, double train_frac_ids,
                                     double val_frac_utts, Rng& rng);

/// CSV with header `id,label,f0,...,f{p-1}`. Channels live in a JSON sidecar
/// (see channel_manifest_path). On load, identity_count = max id + 1.
LabeledDataset load_csv(const std::filesystem::path& path);
void save_csv(const LabeledDataset& data, const std::filesystem::path& path);
/// data.csv -> data.channels.json
std::filesystem::path channel_manifest_path(const std::filesystem::path& csv_path);

}  // namespace desal
