#pragma once

#include <string>

#include "json.hpp"
#include "ogaw/model.hpp"
#include "ogaw/optim.hpp"

namespace ogaw {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& config);
Json to_json(const TrainConfig& config);

/// Overlays the keys present in `json` onto `config`; unknown keys and
/// wrongly typed values are ValidationErrors.
void merge_json(const Json& json, ModelConfig& config);
void merge_json(const Json& json, TrainConfig& config);

/// Model and training settings plus the fixed pipeline choices (loss,
/// preprocessing) that a run reports before doing any work.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  /// {"model": {...}, "train": {...}}; either section may be omitted.
  static RunConfig from_json(const Json& json);
  static RunConfig from_file(const std::string& path);
  Json resolved() const;
};

}  // namespace ogaw
