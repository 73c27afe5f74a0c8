#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"

#include "desal/error.hpp"
#include "desal/sal.hpp"
#include "desal/serialize.hpp"
#include "desal/stats.hpp"

using namespace desal;

namespace {

void zero_params(Network& net) {
  for (auto& l : net.layers) {
    std::fill(l.weights.data().begin(), l.weights.data().end(), 0.0);
    std::fill(l.bias.data().begin(), l.bias.data().end(), 0.0);
  }
}

std::size_t active_dims(const SalModel& m, const LabeledDataset& d) {
  const Matrix mask = selection_mask(m, d);
  std::size_t n = 0;
  for (std::size_t j = 0; j < mask.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < mask.rows(); ++i) s += std::abs(mask(i, j));
    n += s / static_cast<double>(mask.rows()) > 1e-3;
  }
  return n;
}

double max_abs_param(const Network& net) {
  double m = 0.0;
  for (const auto& l : net.layers) {
    for (double v : l.weights.data()) m = std::max(m, std::abs(v));
    for (double v : l.bias.data()) m = std::max(m, std::abs(v));
  }
  return m;
}

}  // namespace

TEST_CASE("separable toy set is learned to at least 0.99 training accuracy") {
  const LabeledDataset d = fixtures::separable_toy(1);
  SalConfig cfg;
  const SalModel m = pretrain_base(d, cfg);
  CHECK(m.phase == Phase::base_trained);
  const double acc = accuracy(predict_labels(m, d.features), d.label_vector());
  CHECK(acc >= 0.99);
  // Replaying the thresholded probabilities gives the same accuracy.
  const Matrix p = predict_proba(m, d.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) hits += (p(i, 0) >= 0.5) == (d.labels(i, 0) == 1.0);
  CHECK(static_cast<double>(hits) / static_cast<double>(d.rows()) == acc);
  CHECK(m.trace.base.size() == cfg.epochs_base);
  CHECK(m.trace.base.back() < m.trace.base.front());
}

TEST_CASE("constant labels are predicted everywhere") {
  LabeledDataset d = fixtures::separable_toy(2);
  d.labels = Matrix(d.rows(), 1, 1.0);
  const SalModel m = pretrain_base(d, SalConfig{});
  const auto pred = predict_labels(m, d.features);
  CHECK(std::all_of(pred.begin(), pred.end(), [](int v) { return v == 1; }));
}

TEST_CASE("equal seeds give bit-identical models") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  SalConfig cfg = fixtures::quick_config(3);
  cfg.batch_size = 16;
  CHECK(pretrain_base(d, cfg) == pretrain_base(d, cfg));
  SalConfig other = cfg;
  other.seed = 4;
  CHECK_FALSE(pretrain_base(d, cfg) == pretrain_base(d, other));
}

TEST_CASE("divergence reports the epoch") {
  const LabeledDataset d = fixtures::separable_toy(1);
  SalConfig cfg;
  cfg.arch_g = {LayerSpec::dense(0, 8)};
  cfg.arch_f = {LayerSpec::dense(0, 1)};
  cfg.lr_base = 10.0;
  try {
    pretrain_base(d, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() > 0);
    CHECK(e.epoch() < cfg.epochs_base);
  }
}

TEST_CASE("pretrain_base rejects empty data and bad configs") {
  LabeledDataset empty;
  CHECK_THROWS_AS(pretrain_base(empty, SalConfig{}), DegenerateError);
  SalConfig cfg;
  cfg.lr_select = 0.0;
  CHECK_THROWS_AS(pretrain_base(fixtures::separable_toy(1), cfg), ConfigError);
  cfg = SalConfig{};
  cfg.epochs_add = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SalConfig{};
  cfg.noise_sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SalConfig{};
  cfg.lambda_sparsity = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("resolve_arch fills dimensions from the data") {
  const auto g = resolve_arch(default_arch_g(), 40);
  CHECK(g.back().out_dim == 160);
  const auto f = resolve_arch(default_arch_f(), 160, std::size_t{1});
  CHECK(f.front().in_dim == 160);
  CHECK(f.back().out_dim == 1);
  const auto h = resolve_arch(default_arch_h(), 7, std::size_t{160});
  CHECK(h.front().in_dim == 7);
  CHECK(h.front().out_dim == 160);
  ArchTemplate wide{LayerSpec{LayerKind::conv1d, 0, 0, 50, 2, 1}};
  CHECK_THROWS_AS(resolve_arch(wide, 40), SpecError);
  CHECK_THROWS_AS(resolve_arch(ArchTemplate{}, 40), SpecError);
}

TEST_CASE("selection with lambda 0 recovers a constant representation") {
  LabeledDataset d;
  d.features = Matrix(30, 3, 0.7);
  d.labels = Matrix(30, 1);
  for (std::size_t i = 0; i < 30; i += 2) d.labels(i, 0) = 1.0;
  d.identities.assign(30, 0);
  d.identity_count = 1;
  SalConfig cfg = fixtures::quick_config();
  cfg.lambda_sparsity = 0.0;
  cfg.epochs_select = 300;
  const SalModel base = pretrain_base(d, cfg);
  const SalModel sel = selection_phase(base, d, cfg);
  const Matrix z = one_hot(d.identities, 1);
  const Matrix target = representation(sel, d.features);
  CHECK(selection_objective(sel.h, z, target, 0.0) < 1e-4);
  CHECK(max_abs_diff(selection_mask(sel, d), target) < 1e-2);
}

TEST_CASE("a large enough lambda drives every selector parameter to zero") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  SalConfig cfg = fixtures::quick_config();
  const SalModel base = pretrain_base(d, cfg);
  SalModel zero = base;
  zero_params(zero.h);
  const Matrix z = one_hot(d.identities, d.identity_count);
  const Gradients g0 = selection_gradient(zero.h, z, representation(base, d.features), 0.0);
  double sup = 0.0;
  for (const auto& l : g0.layers) {
    for (double v : l.weights.data()) sup = std::max(sup, std::abs(v));
    for (double v : l.bias.data()) sup = std::max(sup, std::abs(v));
  }
  cfg.lambda_sparsity = sup * 1.01;
  cfg.epochs_select = 300;
  const SalModel sel = selection_phase(base, d, cfg);
  CHECK(max_abs_param(sel.h) == 0.0);
  CHECK(active_dims(sel, d) == 0);
}

TEST_CASE("selection gradient matches finite differences at lambda 0.01") {
  Rng rng(5);
  Network h = init_network(std::vector<LayerSpec>{LayerSpec::dense(4, 3)}, rng);
  for (double& b : h.layers[0].bias.data()) b = 0.5 * rng.normal();
  std::vector<std::size_t> ids{0, 1, 2, 3, 1, 2};
  const Matrix z = one_hot(ids, 4);
  const Matrix target = fixtures::random_matrix(rng, 6, 3);
  const Gradients g = selection_gradient(h, z, target, 0.01);
  const auto res = fixtures::check_params(
      h, g, [&] { return selection_objective(h, z, target, 0.01); }, 1e-5,
      [](double v) { return std::abs(v) > 1e-3; });
  CHECK(res.checked > 0);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("addition gradient matches finite differences for a fixed noise draw") {
  Rng rng(6);
  Network f = init_network(resolve_arch(default_arch_f(), 5, std::size_t{1}), rng);
  const Matrix rep = fixtures::random_matrix(rng, 7, 5);
  const Matrix mask = fixtures::random_matrix(rng, 7, 5);
  const Matrix eps = fixtures::random_matrix(rng, 7, 5, 2.0);
  Matrix y(7, 1);
  for (std::size_t i = 0; i < 7; i += 2) y(i, 0) = 1.0;
  const Gradients g = addition_gradient(f, rep, mask, eps, y);
  const auto res = fixtures::check_params(f, g, [&] { return addition_objective(f, rep, mask, eps, y); });
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("selection objective never increases on the fixture") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  SalConfig cfg = fixtures::quick_config();
  cfg.epochs_select = 200;
  const SalModel sel = selection_phase(pretrain_base(d, cfg), d, cfg);
  REQUIRE(sel.trace.select.size() == 200);
  for (std::size_t i = 1; i < sel.trace.select.size(); ++i)
    CHECK(sel.trace.select[i] <= sel.trace.select[i - 1] + 1e-12);
}

TEST_CASE("phases enforce their order") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  const SalConfig cfg = fixtures::quick_config();
  const SalModel base = pretrain_base(d, cfg);
  Rng rng(0);
  CHECK_THROWS_AS(addition_phase(base, d, cfg, rng), StateError);
  const SalModel sel = selection_phase(base, d, cfg);
  CHECK(sel.phase == Phase::selected);
  CHECK_THROWS_AS(selection_phase(sel, d, cfg), StateError);
  const SalModel added = addition_phase(sel, d, cfg, rng);
  CHECK(added.phase == Phase::added);
  CHECK_THROWS_AS(addition_phase(added, d, cfg, rng), StateError);
  CHECK_THROWS_AS(selection_phase(added, d, cfg), StateError);

  LabeledDataset other = d;
  other.identity_count += 1;
  CHECK_THROWS_AS(selection_phase(base, other, cfg), ShapeError);
}

TEST_CASE("selection freezes g and f; addition freezes g and h") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  const SalConfig cfg = fixtures::quick_config();
  const SalModel base = pretrain_base(d, cfg);
  const SalModel sel = selection_phase(base, d, cfg);
  CHECK(sel.g == base.g);
  CHECK(sel.f == base.f);
  CHECK_FALSE(sel.h == base.h);
  Rng rng(2);
  const SalModel added = addition_phase(sel, d, cfg, rng);
  CHECK(added.g == sel.g);
  CHECK(added.h == sel.h);
  CHECK_FALSE(added.f == sel.f);
}

TEST_CASE("a zero selector makes addition identical to noise-free retraining") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  for (auto resample : {NoiseResample::per_epoch, NoiseResample::per_step}) {
    SalConfig cfg = fixtures::quick_config();
    cfg.noise_resample = resample;
    cfg.batch_size = 20;
    const SalModel base = pretrain_base(d, cfg);
    SalModel sel = selection_phase(base, d, cfg);
    zero_params(sel.h);
    Rng rng(9);
    const SalModel added = addition_phase(sel, d, cfg, rng);
    const SalModel retrained = retrain_classifier(base, d, cfg);
    CHECK(added.f == retrained.f);
    CHECK(added.trace.add == retrained.trace.add);
    CHECK(predict(added, d.features) == predict(retrained, d.features));
  }
}

TEST_CASE("sigma 0 makes addition identical to noise-free retraining") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  SalConfig cfg = fixtures::quick_config();
  cfg.noise_sigma = 0.0;
  const SalModel base = pretrain_base(d, cfg);
  const SalModel sel = selection_phase(base, d, cfg);
  REQUIRE(max_abs_param(sel.h) > 0.0);
  Rng rng(9);
  const SalModel added = addition_phase(sel, d, cfg, rng);
  const SalModel retrained = retrain_classifier(base, d, cfg);
  REQUIRE(added.trace.add.size() == retrained.trace.add.size());
  for (std::size_t i = 0; i < added.trace.add.size(); ++i)
    CHECK(std::abs(added.trace.add[i] - retrained.trace.add[i]) <= 1e-12);
  CHECK(added.f == retrained.f);
}

TEST_CASE("noise cadence and re-initialisation change the outcome") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  SalConfig cfg = fixtures::quick_config();
  cfg.batch_size = 20;
  const SalModel sel = selection_phase(pretrain_base(d, cfg), d, cfg);
  Rng a(1), b(1), c(1);
  const SalModel per_epoch = addition_phase(sel, d, cfg, a);
  SalConfig step_cfg = cfg;
  step_cfg.noise_resample = NoiseResample::per_step;
  const SalModel per_step = addition_phase(sel, d, step_cfg, b);
  CHECK_FALSE(per_epoch.f == per_step.f);
  SalConfig reinit_cfg = cfg;
  reinit_cfg.reinit_classifier = true;
  const SalModel reinit = addition_phase(sel, d, reinit_cfg, c);
  CHECK_FALSE(per_epoch.f == reinit.f);
}

TEST_CASE("sparsity sweep is non-increasing and reaches zero") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  SalConfig cfg = fixtures::quick_config();
  const SalModel base = pretrain_base(d, cfg);
  std::vector<std::size_t> active;
  for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
    cfg.lambda_sparsity = lambda;
    active.push_back(active_dims(selection_phase(base, d, cfg), d));
  }
  for (std::size_t i = 1; i < active.size(); ++i) CHECK(active[i] <= active[i - 1]);
  CHECK(active.front() > 0);
  CHECK(active.back() == 0);
}

TEST_CASE("gaussian_sample") {
  Rng rng(0);
  CHECK(gaussian_sample(Matrix(3, 2), 2.0, rng) == Matrix(3, 2));
  CHECK(gaussian_sample(Matrix(3, 2, 1.0), 0.0, rng) == Matrix(3, 2));
  CHECK_THROWS_AS(gaussian_sample(Matrix(1, 1, 1.0), -1.0, rng), ParamError);

  const std::size_t n = 100000;
  const Matrix row{{0.5, -2.0, 1.0}};
  Matrix mask(n, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 3; ++j) mask(i, j) = row(0, j);
  const double sigma = 1.5;
  const Matrix s = gaussian_sample(mask, sigma, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m += s(i, j);
      m2 += s(i, j) * s(i, j);
    }
    m /= n;
    const double sd = std::sqrt(m2 / n - m * m);
    CHECK(sd == doctest::Approx(std::abs(row(0, j)) * sigma).epsilon(0.03));
  }
}

TEST_CASE("predict breaks a 0.5 tie upward and is deterministic") {
  const LabeledDataset d = fixtures::separable_toy(1);
  SalModel m = pretrain_base(d, fixtures::quick_config());
  const Matrix once = predict(m, d.features);
  CHECK(predict(m, d.features) == once);
  zero_params(m.f);
  const Matrix p = predict_proba(m, d.features);
  CHECK(p(0, 0) == 0.5);
  CHECK(predict(m, d.features) == Matrix(d.rows(), 1, 1.0));
  CHECK_THROWS_AS(predict(m, Matrix(2, 5)), ShapeError);
}

TEST_CASE("model documents round-trip") {
  const LabeledDataset d = fixtures::sparsity_fixture();
  const SalConfig cfg = fixtures::quick_config();
  Rng rng(1);
  const SalModel m = addition_phase(selection_phase(pretrain_base(d, cfg), d, cfg), d, cfg, rng);
  const Json doc = model_document(m, cfg);
  CHECK(model_from_document(Json::parse(doc.dump())) == m);
  CHECK(doc.at("config").get<SalConfig>() == cfg);

  Json bad = doc;
  bad["extra"] = 1;
  CHECK_THROWS_AS(model_from_document(bad), ConfigError);
  Json wrong = doc;
  wrong["identity_count"] = 3;
  CHECK_THROWS_AS(model_from_document(wrong), ShapeError);
  Json truncated = doc;
  truncated["f"]["layers"][0]["w"] = Json::array({1.0});
  CHECK_THROWS_AS(model_from_document(truncated), ConfigError);
  Json phase = doc;
  phase["phase"] = "done";
  CHECK_THROWS_AS(model_from_document(phase), ConfigError);
}

TEST_CASE("config JSON keeps defaults for absent keys and rejects unknown ones") {
  const SalConfig c = Json::parse(R"({"noise_sigma": 2.5, "noise_resample": "per_step"})").get<SalConfig>();
  CHECK(c.noise_sigma == 2.5);
  CHECK(c.noise_resample == NoiseResample::per_step);
  CHECK(c.lr_base == SalConfig{}.lr_base);
  CHECK_THROWS_AS(Json::parse(R"({"sigma": 1})").get<SalConfig>(), ConfigError);
  CHECK_THROWS_AS(Json::parse(R"({"noise_resample": "sometimes"})").get<SalConfig>(), ConfigError);
  const Json round = SalConfig{};
  CHECK(round.get<SalConfig>() == SalConfig{});
}
