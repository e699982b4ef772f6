#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "synaug/diagnostics.hpp"
#include "synaug/generators.hpp"
#include "synaug/losses.hpp"
#include "synaug/rng.hpp"
#include "synaug/sim_models.hpp"
#include "synaug/trainer.hpp"
#include "synaug/vtss.hpp"

namespace synaug {

using Json = nlohmann::json;

/// A preset document compiled into the library.
struct EmbeddedPreset {
  const char* name;
  const char* json;
};

const std::vector<EmbeddedPreset>& embedded_presets();

std::vector<std::string> preset_names();
std::optional<Json> find_preset(std::string_view name);

/// A preset by name, or a JSON file when `name_or_path` names an existing
/// file. Throws InvalidArgument listing the known presets otherwise, and
/// ParseError for malformed JSON.
Json load_document(const std::string& name_or_path);

/// A simulation model with its sampling defaults.
struct ModelSetup {
  std::string name;
  SimModelHandle model;
  LossSpec loss;
  /// Default class counts; `n_iid` > 0 means the model samples (x, y)
  /// pairs jointly and n0/n1 are realized rather than fixed.
  Index n0 = 0;
  Index n1 = 0;
  Index n_iid = 0;
  Json document;

  /// Draws a dataset using explicit counts (or n_iid when the model is joint).
  LabeledDataset sample(Index n0_override, Index n1_override, const RngStream& stream) const;
};

/// Builds a model from a "model" preset document (or its inner "model"
/// object). Throws InvalidArgument on unknown kinds or missing fields.
ModelSetup model_from_json(const Json& doc, const std::string& name = "");
ModelSetup load_model(const std::string& name_or_path);

Vector vector_from_json(const Json& j);
Json to_json(const Vector& v);

LossSpec loss_from_json(const Json& j);
Json to_json(const LossSpec& spec);
GeneratorSpec generator_from_json(const Json& j, SimModelHandle model = nullptr);
Json to_json(const GeneratorSpec& spec);
FitConfig fit_from_json(const Json& j);
Json to_json(const FitConfig& cfg);
VtssConfig vtss_from_json(const Json& j, SimModelHandle model = nullptr);
Json to_json(const VtssConfig& cfg);

Json to_json(const RngStream& stream);
Json to_json(const FittedModel& model);
Json to_json(const VtssResult& result);
Json to_json(const GradientEstimate& estimate);
Json to_json(const BiasDiagnostics& diagnostics);

/// "lo:hi:n" (n evenly spaced values, both ends included) or a comma list.
/// Throws InvalidArgument for malformed input, n < 1 or negative values.
std::vector<double> parse_grid(std::string_view text);

}  // namespace synaug
