// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmcogan/dataset.hpp"
#include "bmcogan/eval.hpp"
#include "bmcogan/training.hpp"

namespace bmcogan {

nlohmann::json loss_weights_to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json synthesis_config_to_json(const SynthesisConfig& c);
SynthesisConfig synthesis_config_from_json(const nlohmann::json& j);
nlohmann::json toy_spec_to_json(const ToySpec& s);
ToySpec toy_spec_from_json(const nlohmann::json& j);

// Declarative run description; drives every CLI command.
struct RunConfig {
    std::optional<std::filesystem::path> dataset_dir;
    std::optional<ToySpec> toy;
    bool normalize = false;
    TrainConfig train;
    SynthesisConfig synth;
    FinalClassifierConfig classifier;
    std::filesystem::path out_dir = "runs";

    GZSLDataset load_data() const;
    nlohmann::json to_json() const;
};

// Parses and validates; every problem found is reported, not just the first.
// Throws SchemaError with the joined diagnostics on failure.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one "dotted.path=value" override onto the raw JSON document.
// Values parse as JSON when possible and fall back to strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// The published JSON schema the validator mirrors (also shipped under docs/).
const char* run_config_schema();

}  // namespace bmcogan
