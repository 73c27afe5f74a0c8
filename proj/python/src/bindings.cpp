#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "desal/error.hpp"
#include "desal/experiment.hpp"
#include "desal/sal.hpp"
#include "desal/serialize.hpp"
#include "desal/stats.hpp"
#include "desal/synthdata.hpp"

namespace py = pybind11;
using namespace desal;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Matrix from_array(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::dict dataset_dict(const LabeledDataset& d) {
  py::dict out;
  out["features"] = to_array(d.features);
  out["labels"] = d.label_vector();
  out["identities"] = d.identities;
  py::list channels;
  for (const auto& c : d.channels) channels.append(py::make_tuple(c.name, c.start, c.end));
  out["channels"] = channels;
  return out;
}

LabeledDataset dataset_from(const Array& features, const std::vector<int>& labels,
                            const std::vector<std::size_t>& identities) {
  LabeledDataset d;
  d.features = from_array(features);
  d.labels = Matrix(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) d.labels(i, 0) = labels[i];
  d.identities = identities;
  for (auto id : identities) d.identity_count = std::max(d.identity_count, id + 1);
  d.channels = {Channel{"features", 0, d.dims()}};
  d.validate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Select-additive learning core";

  py::register_exception<Error>(m, "DesalError", PyExc_RuntimeError);

  m.def("default_config", [] { return Json(ExperimentConfig{}).dump(); });

  m.def("generate", [](const std::string& gen_json) {
    const GenSpec spec = Json::parse(gen_json).get<GenSpec>();
    const SyntheticData d = generate(spec);
    py::dict out;
    out["train"] = dataset_dict(d.train);
    out["test"] = dataset_dict(d.test);
    return out;
  }, py::arg("gen_json") = "{}");

  m.def("run_experiment", [](const std::string& config_json) {
    const ExperimentConfig cfg = Json::parse(config_json).get<ExperimentConfig>();
    ExperimentReport r;
    {
      py::gil_scoped_release release;
      r = run_experiment(cfg);
    }
    return Json(r).dump();
  });

  m.def("train", [](const Array& features, const std::vector<int>& labels,
                    const std::vector<std::size_t>& identities, const std::string& sal_json) {
    const LabeledDataset d = dataset_from(features, labels, identities);
    const SalConfig cfg = Json::parse(sal_json).get<SalConfig>();
    py::gil_scoped_release release;
    const SalModel base = pretrain_base(d, cfg);
    const SalModel selected = selection_phase(base, d, cfg);
    Rng noise(cfg.seed ^ 0x6e6f697365ULL);
    const SalModel added = addition_phase(selected, d, cfg, noise);
    py::gil_scoped_acquire acquire;
    return py::make_tuple(model_document(base, cfg).dump(), model_document(added, cfg).dump());
  }, py::arg("features"), py::arg("labels"), py::arg("identities"), py::arg("sal_json") = "{}");

  m.def("predict", [](const std::string& model_json, const Array& features) {
    const SalModel model = model_from_document(Json::parse(model_json));
    return predict_labels(model, from_array(features));
  });

  m.def("predict_proba", [](const std::string& model_json, const Array& features) {
    const SalModel model = model_from_document(Json::parse(model_json));
    return to_array(predict_proba(model, from_array(features)));
  });

  m.def("permutation_test", [](const std::vector<int>& a, const std::vector<int>& b, std::size_t n_perm,
                               std::uint64_t seed) {
    Rng rng(seed);
    const TestResult r = permutation_test(a, b, n_perm, rng);
    return py::make_tuple(r.statistic, r.p_value);
  }, py::arg("a"), py::arg("b"), py::arg("n_permutations") = 10000, py::arg("seed") = 0);
}
