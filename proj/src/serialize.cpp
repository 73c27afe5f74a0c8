#include "desal/serialize.hpp"

#include <initializer_list>
#include <string_view>

#include "desal/error.hpp"
#include "text_io.hpp"

namespace desal {

namespace {

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + what);
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

Json matrix_values(const Matrix& m) { return Json(m.values()); }

Matrix matrix_from(const Json& j, std::size_t rows, std::size_t cols, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != rows * cols)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(rows * cols) + " values, got " +
                      std::to_string(v.size()));
  return Matrix(rows, cols, std::move(v));
}

}  // namespace

void to_json(Json& j, const LayerSpec& s) {
  j = Json{{"kind", std::string(to_string(s.kind))}, {"in_dim", s.in_dim}, {"out_dim", s.out_dim}};
  if (s.kind == LayerKind::conv1d) {
    j["window"] = s.window;
    j["channels"] = s.channels;
    j["in_channels"] = s.in_channels;
  }
}

void from_json(const Json& j, LayerSpec& s) {
  reject_unknown(j, {"kind", "in_dim", "out_dim", "window", "channels", "in_channels", "w", "b"}, "layer");
  s = LayerSpec{};
  s.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  read_opt(j, "in_dim", s.in_dim);
  read_opt(j, "out_dim", s.out_dim);
  read_opt(j, "window", s.window);
  read_opt(j, "channels", s.channels);
  read_opt(j, "in_channels", s.in_channels);
}

void to_json(Json& j, const Layer& l) {
  to_json(j, l.spec);
  if (l.spec.has_params()) {
    j["w"] = matrix_values(l.weights);
    j["b"] = matrix_values(l.bias);
  }
}

void from_json(const Json& j, Layer& l) {
  from_json(j, l.spec);
  const LayerSpec& s = l.spec;
  if (s.kind == LayerKind::dense) {
    l.weights = matrix_from(j.at("w"), s.in_dim, s.out_dim, "dense weights");
    l.bias = matrix_from(j.at("b"), 1, s.out_dim, "dense bias");
  } else if (s.kind == LayerKind::conv1d) {
    l.weights = matrix_from(j.at("w"), s.channels, s.in_channels * s.window, "conv1d weights");
    l.bias = matrix_from(j.at("b"), 1, s.channels, "conv1d bias");
  } else {
    l.weights = Matrix();
    l.bias = Matrix();
  }
}

void to_json(Json& j, const Network& n) { j = Json{{"layers", n.layers}}; }

void from_json(const Json& j, Network& n) {
  reject_unknown(j, {"layers"}, "network");
  n.layers = j.at("layers").get<std::vector<Layer>>();
  validate_spec(n.spec());
}

void to_json(Json& j, const SalConfig& c) {
  j = Json{{"lambda_sparsity", c.lambda_sparsity},
           {"noise_sigma", c.noise_sigma},
           {"lr_base", c.lr_base},
           {"lr_select", c.lr_select},
           {"lr_add", c.lr_add},
           {"epochs_base", c.epochs_base},
           {"epochs_select", c.epochs_select},
           {"epochs_add", c.epochs_add},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"arch_g", c.arch_g},
           {"arch_f", c.arch_f},
           {"arch_h", c.arch_h},
           {"noise_resample", std::string(to_string(c.noise_resample))},
           {"reinit_classifier", c.reinit_classifier}};
}

void from_json(const Json& j, SalConfig& c) {
  reject_unknown(j,
                 {"lambda_sparsity", "noise_sigma", "lr_base", "lr_select", "lr_add", "epochs_base",
                  "epochs_select", "epochs_add", "batch_size", "seed", "arch_g", "arch_f", "arch_h",
                  "noise_resample", "reinit_classifier"},
                 "sal config");
  read_opt(j, "lambda_sparsity", c.lambda_sparsity);
  read_opt(j, "noise_sigma", c.noise_sigma);
  read_opt(j, "lr_base", c.lr_base);
  read_opt(j, "lr_select", c.lr_select);
  read_opt(j, "lr_add", c.lr_add);
  read_opt(j, "epochs_base", c.epochs_base);
  read_opt(j, "epochs_select", c.epochs_select);
  read_opt(j, "epochs_add", c.epochs_add);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "seed", c.seed);
  read_opt(j, "arch_g", c.arch_g);
  read_opt(j, "arch_f", c.arch_f);
  read_opt(j, "arch_h", c.arch_h);
  if (auto it = j.find("noise_resample"); it != j.end())
    c.noise_resample = noise_resample_from_string(it->get<std::string>());
  read_opt(j, "reinit_classifier", c.reinit_classifier);
}

void to_json(Json& j, const PhaseTrace& t) { j = Json{{"base", t.base}, {"select", t.select}, {"add", t.add}}; }

void from_json(const Json& j, PhaseTrace& t) {
  reject_unknown(j, {"base", "select", "add"}, "trace");
  read_opt(j, "base", t.base);
  read_opt(j, "select", t.select);
  read_opt(j, "add", t.add);
}

void to_json(Json& j, const ChannelSpec& c) {
  j = Json{{"name", c.name},
           {"signal_dims", c.signal_dims},
           {"confound_dims", c.confound_dims},
           {"noise_dims", c.noise_dims}};
}

void from_json(const Json& j, ChannelSpec& c) {
  reject_unknown(j, {"name", "signal_dims", "confound_dims", "noise_dims"}, "channel");
  c.name = j.at("name").get<std::string>();
  read_opt(j, "signal_dims", c.signal_dims);
  read_opt(j, "confound_dims", c.confound_dims);
  read_opt(j, "noise_dims", c.noise_dims);
}

void to_json(Json& j, const GenSpec& g) {
  j = Json{{"n_train_ids", g.n_train_ids},
           {"n_test_ids", g.n_test_ids},
           {"utt_per_id", g.utt_per_id},
           {"channels", g.channels},
           {"signal_noise_std", g.signal_noise_std},
           {"confound_align", g.confound_align},
           {"label_purity", g.label_purity},
           {"confound_noise_std", g.confound_noise_std},
           {"seed", g.seed}};
}

void from_json(const Json& j, GenSpec& g) {
  reject_unknown(j,
                 {"n_train_ids", "n_test_ids", "utt_per_id", "channels", "signal_noise_std", "confound_align",
                  "label_purity", "confound_noise_std", "seed"},
                 "generator spec");
  read_opt(j, "n_train_ids", g.n_train_ids);
  read_opt(j, "n_test_ids", g.n_test_ids);
  read_opt(j, "utt_per_id", g.utt_per_id);
  read_opt(j, "channels", g.channels);
  read_opt(j, "signal_noise_std", g.signal_noise_std);
  read_opt(j, "confound_align", g.confound_align);
  read_opt(j, "label_purity", g.label_purity);
  read_opt(j, "confound_noise_std", g.confound_noise_std);
  read_opt(j, "seed", g.seed);
}

Json model_document(const SalModel& model, const SalConfig& cfg) {
  return Json{{"config", cfg},
              {"phase", std::string(to_string(model.phase))},
              {"identity_count", model.identity_count},
              {"g", model.g},
              {"f", model.f},
              {"h", model.h},
              {"trace", model.trace}};
}

SalModel model_from_document(const Json& doc) {
  try {
    reject_unknown(doc, {"config", "phase", "identity_count", "g", "f", "h", "trace"}, "model document");
    SalModel m;
    m.phase = phase_from_string(doc.at("phase").get<std::string>());
    m.identity_count = doc.at("identity_count").get<std::size_t>();
    m.g = doc.at("g").get<Network>();
    m.f = doc.at("f").get<Network>();
    m.h = doc.at("h").get<Network>();
    read_opt(doc, "trace", m.trace);
    if (m.g.out_dim() != m.f.in_dim() || m.h.out_dim() != m.g.out_dim() || m.h.in_dim() != m.identity_count)
      throw ShapeError("model document: g, f and h dimensions do not fit together");
    return m;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("model document: ") + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_json(const Json& j, const std::filesystem::path& path) {
  detail::write_file(path, j.dump(2) + "\n");
}

}  // namespace desal
