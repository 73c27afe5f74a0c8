#include "desal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string_view>
#include <thread>

#include "desal/error.hpp"
#include "desal/stats.hpp"
#include "text_io.hpp"

namespace desal {

std::vector<std::uint64_t> ExperimentConfig::default_seeds() {
  std::vector<std::uint64_t> s(20);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
  return s;
}

std::vector<ModalitySet> ExperimentConfig::default_modality_sets() {
  return {{"verbal"}, {"acoustic"}, {"visual"}, {"verbal", "acoustic"},
          {"verbal", "visual"}, {"acoustic", "visual"}, {"all"}};
}

std::vector<std::string> ExperimentConfig::resolve(const ModalitySet& set) const {
  if (set.size() == 1 && set.front() == "all") {
    std::vector<std::string> out;
    for (const auto& c : gen.channels) out.push_back(c.name);
    return out;
  }
  return set;
}

void ExperimentConfig::validate() const {
  gen.validate();
  sal.validate();
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (modality_sets.empty()) throw ConfigError("modality_sets must be non-empty");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw ConfigError("val_frac must be in [0, 1)");
  for (const auto& set : modality_sets) {
    if (set.empty()) throw ConfigError("a modality set is empty");
    for (const auto& name : resolve(set)) {
      const bool known = std::any_of(gen.channels.begin(), gen.channels.end(),
                                     [&](const ChannelSpec& c) { return c.name == name; });
      if (!known) throw ConfigError("modality set references unknown channel '" + name + "'");
    }
  }
}

std::string modality_set_name(const ModalitySet& set) {
  std::string out;
  for (const auto& name : set) {
    if (!out.empty()) out += '+';
    out += name;
  }
  return out;
}

const ModalitySummary* ExperimentReport::summary(const std::string& modality_set) const {
  for (const auto& s : summaries)
    if (s.modality_set == modality_set) return &s;
  return nullptr;
}

namespace {

struct CellOutput {
  CellResult result;
  std::vector<int> baseline_correct;
  std::vector<int> sal_correct;
  Matrix selection;
};

std::vector<int> correctness(const SalModel& model, const LabeledDataset& data) {
  const auto pred = predict_labels(model, data.features);
  const auto truth = data.label_vector();
  std::vector<int> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] == truth[i] ? 1 : 0;
  return out;
}

double split_accuracy(const SalModel& model, const LabeledDataset& data) {
  if (data.rows() == 0) return 0.0;
  return accuracy(predict_labels(model, data.features), data.label_vector());
}

SplitAccuracy accuracies(const SalModel& model, const LabeledDataset& train, const LabeledDataset& val,
                         const LabeledDataset& test) {
  return {split_accuracy(model, train), split_accuracy(model, val), split_accuracy(model, test)};
}

// Activations entering f's last parameterised layer, each column scaled by
// the norm of the weights that read it.
Matrix classifier_view(const SalModel& model, const Matrix& x) {
  const ForwardTrace tr = forward_trace(model.f, forward(model.g, x));
  std::size_t last = 0;
  for (std::size_t k = 0; k < model.f.layers.size(); ++k)
    if (model.f.layers[k].spec.has_params()) last = k;
  const Layer& layer = model.f.layers[last];
  Matrix view = tr.values[last];
  if (layer.spec.kind != LayerKind::dense) return view;
  std::vector<double> w(view.cols());
  for (std::size_t j = 0; j < view.cols(); ++j) {
    double s = 0.0;
    for (double v : layer.weights.row(j)) s += v * v;
    w[j] = std::sqrt(s);
  }
  for (std::size_t r = 0; r < view.rows(); ++r) {
    auto row = view.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= w[j];
  }
  return view;
}

CellOutput run_cell(const ExperimentConfig& cfg, std::size_t set_index, std::uint64_t seed) {
  CellOutput out;
  const ModalitySet& set = cfg.modality_sets[set_index];
  out.result.seed = seed;
  out.result.modality_set = modality_set_name(set);

  Rng root(seed);
  GenSpec gen = cfg.gen;
  gen.seed = root.next_u64();
  SalConfig sal = cfg.sal;
  sal.seed = root.next_u64();
  Rng split_rng = root.split();
  Rng noise_rng = root.split();

  const auto channels = cfg.resolve(set);
  const SyntheticData data = generate(gen);
  const LabeledDataset population = select_channels(data.train, channels);
  const LabeledDataset test = select_channels(data.test, channels);
  const auto [train, val] = utterance_split(population, cfg.val_frac, split_rng);

  const SalModel base = pretrain_base(train, sal);
  out.result.baseline = accuracies(base, train, val, test);
  out.baseline_correct = correctness(base, test);

  const SalModel selected = selection_phase(base, train, sal);
  const SalModel added = addition_phase(selected, train, sal, noise_rng);
  out.result.sal = accuracies(added, train, val, test);
  out.result.trace = added.trace;
  out.sal_correct = correctness(added, test);

  const SalModel retrained = retrain_classifier(base, train, sal);
  out.result.retrained = accuracies(retrained, train, val, test);

  const Matrix mask = selection_mask(selected, train);
  for (std::size_t j = 0; j < mask.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < mask.rows(); ++i) s += std::abs(mask(i, j));
    if (s / static_cast<double>(mask.rows()) > 1e-3) ++out.result.selected_dims;
  }
  const std::size_t rows = std::min(kSelectionRows, mask.rows());
  const std::size_t cols = std::min(kSelectionCols, mask.cols());
  out.selection = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.selection(i, j) = mask(i, j);

  std::vector<std::size_t> labels(test.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = test.labels(i, 0) == 1.0 ? 1 : 0;
  const Matrix before = classifier_view(base, test.features);
  const Matrix after = classifier_view(added, test.features);
  ClusterRatios& cr = out.result.ratios;
  cr.label_baseline = cluster_ratio(before, labels);
  cr.label_sal = cluster_ratio(after, labels);
  cr.identity_baseline = cluster_ratio(before, test.identities);
  cr.identity_sal = cluster_ratio(after, test.identities);

  out.result.ok = true;
  return out;
}

CellOutput run_cell_isolated(const ExperimentConfig& cfg, std::size_t set_index, std::uint64_t seed) {
  try {
    return run_cell(cfg, set_index, seed);
  } catch (const std::exception& e) {
    CellOutput failed;
    failed.result.seed = seed;
    failed.result.modality_set = modality_set_name(cfg.modality_sets[set_index]);
    failed.result.error = e.what();
    return failed;
  }
}

// FNV-1a, so the permutation stream of a modality set does not depend on
// where the set sits in the config.
std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t thread_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DESAL_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = v;
  }
  return std::min(n, jobs);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

SplitAccuracy median_accuracy(const std::vector<const CellResult*>& cells, SplitAccuracy CellResult::*field) {
  std::vector<double> tr, va, te;
  for (const auto* c : cells) {
    tr.push_back((c->*field).train);
    va.push_back((c->*field).val);
    te.push_back((c->*field).test);
  }
  return {median(tr), median(va), median(te)};
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t jobs = config.modality_sets.size() * n_seeds;
  std::vector<CellOutput> outputs(jobs);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs; k = next++)
      outputs[k] = run_cell_isolated(config, k / n_seeds, config.seeds[k % n_seeds]);
  };
  const std::size_t threads = thread_count(jobs);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ExperimentReport report;
  report.config = config;
  report.config.output_dir.clear();
  for (const auto& o : outputs) report.cells.push_back(o.result);

  for (std::size_t s = 0; s < config.modality_sets.size(); ++s) {
    ModalitySummary sum;
    sum.modality_set = modality_set_name(config.modality_sets[s]);
    std::vector<const CellResult*> ok;
    std::vector<int> pooled_base, pooled_sal;
    std::vector<double> label_gain, identity_gain;
    for (std::size_t i = 0; i < n_seeds; ++i) {
      const CellOutput& o = outputs[s * n_seeds + i];
      if (!o.result.ok) continue;
      ok.push_back(&o.result);
      pooled_base.insert(pooled_base.end(), o.baseline_correct.begin(), o.baseline_correct.end());
      pooled_sal.insert(pooled_sal.end(), o.sal_correct.begin(), o.sal_correct.end());
      label_gain.push_back(o.result.ratios.label_gain());
      identity_gain.push_back(o.result.ratios.identity_gain());
      if (!report.selection)
        report.selection = SelectionMatrix{sum.modality_set, o.result.seed, o.selection};
    }
    sum.cells_ok = ok.size();
    if (!ok.empty()) {
      sum.baseline_median = median_accuracy(ok, &CellResult::baseline);
      sum.sal_median = median_accuracy(ok, &CellResult::sal);
      sum.retrained_median = median_accuracy(ok, &CellResult::retrained);
      sum.label_gain_median = median(label_gain);
      sum.identity_gain_median = median(identity_gain);
      Rng perm_rng(name_hash(sum.modality_set));
      const TestResult t = permutation_test(pooled_base, pooled_sal, config.n_permutations, perm_rng);
      sum.permutation_statistic = t.statistic;
      sum.permutation_p = t.p_value;
      sum.permutation_n = t.n_permutations;
    }
    report.summaries.push_back(sum);
  }
  return report;
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown key '" + key + "' in " + what);
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

Json split_json(const SplitAccuracy& a) { return Json{{"train", a.train}, {"val", a.val}, {"test", a.test}}; }

SplitAccuracy split_from(const Json& j) {
  return {j.at("train").get<double>(), j.at("val").get<double>(), j.at("test").get<double>()};
}

Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_rows(const Json& j, std::size_t cols) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ConfigError("selection matrix rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

}  // namespace

void to_json(Json& j, const ExperimentConfig& c) {
  j = Json{{"gen", c.gen},
           {"sal", c.sal},
           {"seeds", c.seeds},
           {"modality_sets", c.modality_sets},
           {"val_frac", c.val_frac},
           {"n_permutations", c.n_permutations}};
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir.string();
}

void from_json(const Json& j, ExperimentConfig& c) {
  reject_unknown(j, {"gen", "sal", "seeds", "modality_sets", "output_dir", "val_frac", "n_permutations"},
                 "experiment config");
  read_opt(j, "gen", c.gen);
  read_opt(j, "sal", c.sal);
  read_opt(j, "seeds", c.seeds);
  read_opt(j, "modality_sets", c.modality_sets);
  if (auto it = j.find("output_dir"); it != j.end()) c.output_dir = it->get<std::string>();
  read_opt(j, "val_frac", c.val_frac);
  read_opt(j, "n_permutations", c.n_permutations);
}

void to_json(Json& j, const ExperimentReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json cell{{"seed", c.seed}, {"modality_set", c.modality_set}, {"ok", c.ok}};
    if (c.ok) {
      cell["baseline"] = split_json(c.baseline);
      cell["sal"] = split_json(c.sal);
      cell["retrained"] = split_json(c.retrained);
      cell["trace"] = c.trace;
      cell["cluster_ratios"] = Json{{"label_baseline", c.ratios.label_baseline},
                                    {"label_sal", c.ratios.label_sal},
                                    {"identity_baseline", c.ratios.identity_baseline},
                                    {"identity_sal", c.ratios.identity_sal}};
      cell["selected_dims"] = c.selected_dims;
    } else {
      cell["error"] = c.error;
    }
    cells.push_back(std::move(cell));
  }
  Json summaries = Json::array();
  for (const auto& s : r.summaries) {
    summaries.push_back(Json{{"modality_set", s.modality_set},
                             {"cells_ok", s.cells_ok},
                             {"baseline_median", split_json(s.baseline_median)},
                             {"sal_median", split_json(s.sal_median)},
                             {"retrained_median", split_json(s.retrained_median)},
                             {"label_ratio_gain_median", s.label_gain_median},
                             {"identity_ratio_gain_median", s.identity_gain_median},
                             {"permutation", Json{{"statistic", s.permutation_statistic},
                                                  {"p_value", s.permutation_p},
                                                  {"n_permutations", s.permutation_n}}}});
  }
  j = Json{{"config", r.config}, {"cells", cells}, {"summaries", summaries}, {"selection_matrix", nullptr}};
  if (r.selection) {
    j["selection_matrix"] = Json{{"modality_set", r.selection->modality_set},
                                 {"seed", r.selection->seed},
                                 {"cols", r.selection->values.cols()},
                                 {"rows", matrix_rows(r.selection->values)}};
  }
}

void from_json(const Json& j, ExperimentReport& r) {
  reject_unknown(j, {"config", "cells", "summaries", "selection_matrix"}, "report");
  r = ExperimentReport{};
  r.config = j.at("config").get<ExperimentConfig>();
  if (!j.at("config").contains("output_dir")) r.config.output_dir.clear();
  for (const auto& cj : j.at("cells")) {
    CellResult c;
    c.seed = cj.at("seed").get<std::uint64_t>();
    c.modality_set = cj.at("modality_set").get<std::string>();
    c.ok = cj.at("ok").get<bool>();
    if (c.ok) {
      c.baseline = split_from(cj.at("baseline"));
      c.sal = split_from(cj.at("sal"));
      c.retrained = split_from(cj.at("retrained"));
      c.trace = cj.at("trace").get<PhaseTrace>();
      const Json& cr = cj.at("cluster_ratios");
      c.ratios = {cr.at("label_baseline").get<double>(), cr.at("label_sal").get<double>(),
                  cr.at("identity_baseline").get<double>(), cr.at("identity_sal").get<double>()};
      c.selected_dims = cj.at("selected_dims").get<std::size_t>();
    } else {
      c.error = cj.at("error").get<std::string>();
    }
    r.cells.push_back(std::move(c));
  }
  for (const auto& sj : j.at("summaries")) {
    ModalitySummary s;
    s.modality_set = sj.at("modality_set").get<std::string>();
    s.cells_ok = sj.at("cells_ok").get<std::size_t>();
    s.baseline_median = split_from(sj.at("baseline_median"));
    s.sal_median = split_from(sj.at("sal_median"));
    s.retrained_median = split_from(sj.at("retrained_median"));
    s.label_gain_median = sj.at("label_ratio_gain_median").get<double>();
    s.identity_gain_median = sj.at("identity_ratio_gain_median").get<double>();
    const Json& p = sj.at("permutation");
    s.permutation_statistic = p.at("statistic").get<double>();
    s.permutation_p = p.at("p_value").get<double>();
    s.permutation_n = p.at("n_permutations").get<std::size_t>();
    r.summaries.push_back(std::move(s));
  }
  const Json& sel = j.at("selection_matrix");
  if (!sel.is_null()) {
    r.selection = SelectionMatrix{sel.at("modality_set").get<std::string>(), sel.at("seed").get<std::uint64_t>(),
                                  matrix_from_rows(sel.at("rows"), sel.at("cols").get<std::size_t>())};
  }
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  write_json(Json(report), dir / "report.json");

  std::string table = "modality_set,baseline,sal\n";
  for (const auto& s : report.summaries) {
    table += s.modality_set + "," + detail::format_double(s.baseline_median.test) + "," +
             detail::format_double(s.sal_median.test) + "\n";
  }
  detail::write_file(dir / "accuracy_table.csv", table);

  std::string sel;
  if (report.selection) {
    const Matrix& m = report.selection->values;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (c) sel += ',';
        sel += detail::format_double(m(r, c));
      }
      sel += '\n';
    }
  }
  detail::write_file(dir / "selection_matrix.csv", sel);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const Json j = read_json(path);
  try {
    ExperimentConfig c = j.get<ExperimentConfig>();
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace desal
