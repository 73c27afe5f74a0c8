#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "desal/error.hpp"
#include "desal/experiment.hpp"
#include "desal/serialize.hpp"
#include "desal/stats.hpp"

namespace fs = std::filesystem;
using namespace desal;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    try {
      cfg = load_experiment_config(path);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    } catch (const SpecError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  if (seed) {
    cfg.seeds = {*seed};
    cfg.gen.seed = *seed;
    cfg.sal.seed = *seed;
  }
  cfg.validate();
  return cfg;
}

Json chi_square_json(const std::vector<IdentityTruth>& truth) {
  ContingencyTable t{confound_label_counts(truth)};
  try {
    const TestResult r = chi_square_independence(t);
    return Json{{"statistic", r.statistic}, {"p_value", r.p_value}, {"dof", r.dof},
                {"low_expected_counts", r.low_expected_counts}};
  } catch (const DegenerateError& e) {
    return Json{{"error", e.what()}};
  }
}

void cmd_generate(const std::string& config, std::optional<std::uint64_t> seed, const fs::path& out) {
  const ExperimentConfig cfg = load_config(config, seed);
  const SyntheticData data = generate(cfg.gen);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create directory " + out.string() + ": " + ec.message());
  save_csv(data.train, out / "train.csv");
  save_csv(data.test, out / "test.csv");
  const Json summary{{"gen", cfg.gen},
                     {"train_rows", data.train.rows()},
                     {"test_rows", data.test.rows()},
                     {"confound_label_chi_square",
                      Json{{"train", chi_square_json(data.train_truth)}, {"test", chi_square_json(data.test_truth)}}}};
  write_json(summary, out / "generate_summary.json");
  std::cout << "wrote " << data.train.rows() << " training and " << data.test.rows() << " test rows to "
            << out.string() << "\n";
}

void cmd_train(const std::string& config, std::optional<std::uint64_t> seed, const fs::path& data_path,
               const fs::path& out) {
  const ExperimentConfig cfg = load_config(config, seed);
  const LabeledDataset data = load_csv(data_path);
  const SalModel base = pretrain_base(data, cfg.sal);
  const SalModel selected = selection_phase(base, data, cfg.sal);
  Rng noise(cfg.sal.seed ^ 0x6e6f697365ULL);
  const SalModel added = addition_phase(selected, data, cfg.sal, noise);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create directory " + out.string() + ": " + ec.message());
  write_json(model_document(base, cfg.sal), out / "baseline_model.json");
  write_json(model_document(added, cfg.sal), out / "sal_model.json");
  const auto truth = data.label_vector();
  std::cout << "train accuracy: baseline " << accuracy(predict_labels(base, data.features), truth) << ", sal "
            << accuracy(predict_labels(added, data.features), truth) << "\n";
}

void cmd_eval(const fs::path& model_path, const fs::path& data_path, const std::string& out) {
  SalModel model;
  try {
    model = model_from_document(read_json(model_path));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  const LabeledDataset data = load_csv(data_path);
  if (data.dims() != model.g.in_dim())
    throw ShapeError("data has " + std::to_string(data.dims()) + " features, model expects " +
                     std::to_string(model.g.in_dim()));
  const auto pred = predict_labels(model, data.features);
  const Json result{{"model", model_path.string()},
                    {"phase", std::string(to_string(model.phase))},
                    {"rows", data.rows()},
                    {"accuracy", accuracy(pred, data.label_vector())}};
  if (out.empty())
    std::cout << result.dump(2) << "\n";
  else
    write_json(result, out);
}

void print_table(const ExperimentReport& report) {
  std::printf("%-24s %9s %9s %9s %9s\n", "modality_set", "baseline", "sal", "retrain", "p");
  for (const auto& s : report.summaries) {
    std::printf("%-24s %9.4f %9.4f %9.4f %9.2g\n", s.modality_set.c_str(), s.baseline_median.test,
                s.sal_median.test, s.retrained_median.test, s.permutation_p);
  }
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += c.ok ? 0 : 1;
  if (failed) std::printf("%zu cell(s) failed; see report.json\n", failed);
}

void cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
  const ExperimentConfig cfg = load_config(config, seed);
  const fs::path dir = out.empty() ? cfg.output_dir : fs::path(out);
  const ExperimentReport report = run_experiment(cfg);
  emit_report(report, dir);
  print_table(report);
  std::cout << "report written to " << dir.string() << "\n";
}

void cmd_report(const fs::path& report_path, const std::string& out) {
  ExperimentReport report;
  try {
    report = read_json(report_path).get<ExperimentReport>();
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(report_path.string() + ": " + e.what());
  }
  if (!out.empty()) emit_report(report, out);
  print_table(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Select-Additive Learning: confound removal experiments on synthetic data"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string model;
  std::string report;

  auto* gen = app.add_subcommand("generate", "Write a synthetic train/test pair as CSV");
  gen->add_option("--config", config, "Experiment config JSON")->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train baseline and SAL models on a CSV dataset");
  train->add_option("--config", config, "Experiment config JSON (its sal section is used)")
      ->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Training seed");
  train->add_option("--data", data, "Training CSV")->required();
  train->add_option("--out", out, "Output directory for the model documents")->required();

  auto* eval = app.add_subcommand("eval", "Accuracy of a saved model on a CSV dataset");
  eval->add_option("--model", model, "Model JSON")->required();
  eval->add_option("--data", data, "Evaluation CSV")->required();
  eval->add_option("--out", out, "Write the result JSON here instead of stdout");

  auto* run = app.add_subcommand("run", "Full experiment over seeds and modality sets");
  run->add_option("--config", config, "Experiment config JSON")->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run a single seed instead of the configured list");
  run->add_option("--out", out, "Output directory (defaults to the config's output_dir)");

  auto* rep = app.add_subcommand("report", "Print a saved report and optionally re-emit its files");
  rep->add_option("--report", report, "report.json from a previous run")->required();
  rep->add_option("--out", out, "Directory to re-emit report files into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) cmd_generate(config, seed, out);
    if (*train) cmd_train(config, seed, data, out);
    if (*eval) cmd_eval(model, data, out);
    if (*run) cmd_run(config, seed, out);
    if (*rep) cmd_report(report, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
