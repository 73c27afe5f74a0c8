#include "desal/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "desal/error.hpp"
#include "json.hpp"
#include "text_io.hpp"

namespace desal {

std::vector<int> LabeledDataset::label_vector() const {
  std::vector<int> out(labels.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels(i, 0) >= 0.5 ? 1 : 0;
  return out;
}

std::vector<std::size_t> LabeledDataset::distinct_identities() const {
  std::set<std::size_t> s(identities.begin(), identities.end());
  return {s.begin(), s.end()};
}

void LabeledDataset::validate() const {
  const std::size_t n = features.rows();
  if (labels.rows() != n || labels.cols() != 1)
    throw ShapeError("labels must be " + std::to_string(n) + "x1, got " + labels.shape_string());
  if (identities.size() != n)
    throw ShapeError("identity count " + std::to_string(identities.size()) + " does not match " +
                     std::to_string(n) + " rows");
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels(i, 0);
    if (y != 0.0 && y != 1.0) throw ValueError("label must be 0 or 1", 0);
    if (identities[i] >= identity_count)
      throw RangeError("identity " + std::to_string(identities[i]) + " >= identity count " +
                       std::to_string(identity_count));
  }
  if (!channels.empty()) {
    std::size_t next = 0;
    for (const auto& c : channels) {
      if (c.start != next || c.end <= c.start)
        throw ShapeError("channel '" + c.name + "' does not continue a partition of the columns");
      next = c.end;
    }
    if (next != features.cols()) throw ShapeError("channels do not cover all feature columns");
  }
}

std::vector<ChannelSpec> GenSpec::default_channels() {
  return {{"verbal", 4, 0, 16}, {"acoustic", 4, 0, 6}, {"visual", 4, 4, 2}};
}

std::size_t GenSpec::dims() const {
  std::size_t p = 0;
  for (const auto& c : channels) p += c.width();
  return p;
}

void GenSpec::validate() const {
  if (n_train_ids < 1 || n_test_ids < 1 || utt_per_id < 1)
    throw ConfigError("identity and utterance counts must be >= 1");
  if (channels.empty()) throw ConfigError("at least one channel is required");
  std::set<std::string> names;
  for (const auto& c : channels) {
    if (c.width() == 0) throw ConfigError("channel '" + c.name + "' has no columns");
    if (!names.insert(c.name).second) throw ConfigError("duplicate channel name '" + c.name + "'");
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(confound_align)) throw ConfigError("confound_align must lie in [0, 1]");
  if (!in_unit(label_purity)) throw ConfigError("label_purity must lie in [0, 1]");
  if (!(signal_noise_std >= 0.0) || !(confound_noise_std >= 0.0))
    throw ConfigError("noise standard deviations must be >= 0");
}

namespace {

void populate(const GenSpec& spec, std::size_t first_id, std::size_t n_ids, double align, Rng& rng,
              LabeledDataset& out, std::vector<IdentityTruth>& truth) {
  const std::size_t p = spec.dims();
  const std::size_t n = n_ids * spec.utt_per_id;
  out.features = Matrix(n, p);
  out.labels = Matrix(n, 1);
  out.identities.assign(n, 0);

  std::vector<int> dominant(n_ids, 0);
  std::fill_n(dominant.begin(), n_ids / 2, 1);
  rng.shuffle(dominant);

  std::size_t row = 0;
  for (std::size_t i = 0; i < n_ids; ++i) {
    const int d = dominant[i];
    const int aligned = 2 * d - 1;
    const int c = rng.uniform() < align ? aligned : -aligned;
    truth.push_back({first_id + i, c, d});
    for (std::size_t u = 0; u < spec.utt_per_id; ++u, ++row) {
      const int y = rng.uniform() < spec.label_purity ? d : 1 - d;
      out.labels(row, 0) = y;
      out.identities[row] = first_id + i;
      auto x = out.features.row(row);
      std::size_t col = 0;
      for (const auto& ch : spec.channels) {
        for (std::size_t k = 0; k < ch.signal_dims; ++k)
          x[col++] = (2.0 * y - 1.0) + spec.signal_noise_std * rng.normal();
        for (std::size_t k = 0; k < ch.confound_dims; ++k)
          x[col++] = c + spec.confound_noise_std * rng.normal();
        for (std::size_t k = 0; k < ch.noise_dims; ++k) x[col++] = rng.normal();
      }
    }
  }

  std::size_t start = 0;
  for (const auto& ch : spec.channels) {
    out.channels.push_back({ch.name, start, start + ch.width()});
    start += ch.width();
  }
}

}  // namespace

SyntheticData generate(const GenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData out;
  populate(spec, 0, spec.n_train_ids, spec.confound_align, rng, out.train, out.train_truth);
  out.train.identity_count = spec.n_train_ids;
  populate(spec, spec.n_train_ids, spec.n_test_ids, 0.5, rng, out.test, out.test_truth);
  out.test.identity_count = spec.n_train_ids + spec.n_test_ids;
  return out;
}

Matrix confound_label_counts(std::span<const IdentityTruth> truth) {
  Matrix t(2, 2);
  for (const auto& id : truth) t(id.confound > 0 ? 1 : 0, id.dominant_label ? 1 : 0) += 1.0;
  return t;
}

Matrix one_hot(std::span<const std::size_t> identities, std::size_t m) {
  Matrix z(identities.size(), m);
  for (std::size_t i = 0; i < identities.size(); ++i) {
    if (identities[i] >= m)
      throw RangeError("identity " + std::to_string(identities[i]) + " out of range for m=" + std::to_string(m));
    z(i, identities[i]) = 1.0;
  }
  return z;
}

LabeledDataset subset_rows(const LabeledDataset& data, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.features = gather_rows(data.features, rows);
  out.labels = gather_rows(data.labels, rows);
  out.identities.reserve(rows.size());
  for (std::size_t r : rows) out.identities.push_back(data.identities[r]);
  out.identity_count = data.identity_count;
  out.channels = data.channels;
  return out;
}

LabeledDataset select_channels(const LabeledDataset& data, std::span<const std::string> names) {
  if (names.empty()) throw ConfigError("channel selection is empty");
  LabeledDataset out;
  out.labels = data.labels;
  out.identities = data.identities;
  out.identity_count = data.identity_count;
  out.features = Matrix(data.rows(), 0);
  for (const auto& name : names) {
    auto it = std::find_if(data.channels.begin(), data.channels.end(),
                           [&](const Channel& c) { return c.name == name; });
    if (it == data.channels.end()) throw ConfigError("unknown channel '" + name + "'");
    const std::size_t start = out.features.cols();
    out.features = hconcat(out.features, slice_cols(data.features, it->start, it->end));
    out.channels.push_back({name, start, out.features.cols()});
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> utterance_split(const LabeledDataset& data, double val_frac,
                                                          Rng& rng) {
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw ParamError("val_frac must lie in [0, 1)");
  std::vector<std::size_t> order(data.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(order.size())));
  if (order.size() - n_val == 0) throw DegenerateError("utterance split leaves no training rows");
  if (val_frac > 0.0 && n_val == 0) throw DegenerateError("utterance split leaves no validation rows");
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {subset_rows(data, train), subset_rows(data, val)};
}

PersonSplit person_independent_split(const LabeledDataset& data, double train_frac_ids,
                                     double val_frac_utts, Rng& rng) {
  if (!(train_frac_ids > 0.0 && train_frac_ids < 1.0)) throw ParamError("train_frac_ids must lie in (0, 1)");
  if (!(val_frac_utts >= 0.0 && val_frac_utts < 1.0)) throw ParamError("val_frac_utts must lie in [0, 1)");
  std::vector<std::size_t> ids = data.distinct_identities();
  rng.shuffle(ids);
  const auto n_keep = static_cast<std::size_t>(std::floor(train_frac_ids * static_cast<double>(ids.size())));
  if (n_keep == 0) throw DegenerateError("identity split leaves no training identities");
  if (n_keep == ids.size()) throw DegenerateError("identity split leaves no test identities");
  const std::set<std::size_t> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_keep));

  std::vector<std::size_t> kept_rows, test_rows;
  for (std::size_t r = 0; r < data.rows(); ++r)
    (keep.count(data.identities[r]) ? kept_rows : test_rows).push_back(r);

  PersonSplit out;
  out.test = subset_rows(data, test_rows);
  auto [train, val] = utterance_split(subset_rows(data, kept_rows), val_frac_utts, rng);
  out.train = std::move(train);
  out.val = std::move(val);
  return out;
}

std::filesystem::path channel_manifest_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".channels.json");
  return p;
}

void save_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  data.validate();
  std::string out = "id,label";
  for (std::size_t j = 0; j < data.dims(); ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    out += std::to_string(data.identities[i]);
    out += data.labels(i, 0) == 1.0 ? ",1" : ",0";
    for (double v : data.features.row(i)) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  detail::write_file(path, out);

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& c : data.channels) manifest.push_back({{"name", c.name}, {"start", c.start}, {"end", c.end}});
  detail::write_file(channel_manifest_path(path), manifest.dump() + "\n");
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest = text;
    while (!rest.empty()) {
      auto pos = rest.find('\n');
      std::string_view line = rest.substr(0, pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
    }
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty file " + path.string(), 1);

  const auto header = detail::split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label")
    throw ParseError("header must start with id,label", 1);
  const std::size_t p = header.size() - 2;
  for (std::size_t j = 0; j < p; ++j)
    if (header[j + 2] != "f" + std::to_string(j)) throw ParseError("expected column f" + std::to_string(j), 1);

  const std::size_t n = lines.size() - 1;
  LabeledDataset data;
  data.features = Matrix(n, p);
  data.labels = Matrix(n, 1);
  data.identities.resize(n);
  std::size_t max_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line_no = i + 2;
    const auto fields = detail::split_fields(lines[i + 1]);
    if (fields.size() != p + 2)
      throw ParseError("expected " + std::to_string(p + 2) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    std::size_t id = 0;
    auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size() || fields[0].empty())
      throw ParseError("identity '" + std::string(fields[0]) + "' is not a non-negative integer", line_no);
    auto label = detail::parse_double(fields[1]);
    if (!label) throw ParseError("label '" + std::string(fields[1]) + "' is not numeric", line_no);
    if (*label != 0.0 && *label != 1.0)
      throw ValueError("label " + std::string(fields[1]) + " is not binary", line_no);
    data.identities[i] = id;
    max_id = std::max(max_id, id);
    data.labels(i, 0) = *label;
    for (std::size_t j = 0; j < p; ++j) {
      auto v = detail::parse_double(fields[j + 2]);
      if (!v) throw ParseError("feature f" + std::to_string(j) + " is not numeric", line_no);
      data.features(i, j) = *v;
    }
  }
  data.identity_count = n ? max_id + 1 : 0;

  const auto manifest_path = channel_manifest_path(path);
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(detail::read_file(manifest_path));
      for (const auto& c : manifest)
        data.channels.push_back({c.at("name").get<std::string>(), c.at("start").get<std::size_t>(),
                                 c.at("end").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(manifest_path.string() + ": " + e.what(), 0);
    }
  }
  data.validate();
  return data;
}

}  // namespace desal
