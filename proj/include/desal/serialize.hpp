#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "desal/nn.hpp"
#include "desal/sal.hpp"
#include "desal/synthdata.hpp"

namespace desal {

using Json = nlohmann::json;

// nlohmann ADL hooks. Decoding a partial object keeps defaults for absent
// keys; unknown keys raise ConfigError so typos in config files surface.
void to_json(Json& j, const LayerSpec& s);
void from_json(const Json& j, LayerSpec& s);
void to_json(Json& j, const Layer& l);
void from_json(const Json& j, Layer& l);
void to_json(Json& j, const Network& n);
void from_json(const Json& j, Network& n);
void to_json(Json& j, const SalConfig& c);
void from_json(const Json& j, SalConfig& c);
void to_json(Json& j, const PhaseTrace& t);
void from_json(const Json& j, PhaseTrace& t);
void to_json(Json& j, const ChannelSpec& c);
void from_json(const Json& j, ChannelSpec& c);
void to_json(Json& j, const GenSpec& g);
void from_json(const Json& j, GenSpec& g);

/// {"config":..., "phase":..., "identity_count":..., "g":..., "f":..., "h":..., "trace":...}
Json model_document(const SalModel& model, const SalConfig& cfg);
SalModel model_from_document(const Json& doc);

/// Parses a JSON file, mapping syntax errors to ParseError.
Json read_json(const std::filesystem::path& path);
/// Writes j with two-space indentation and a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);

}  // namespace desal
