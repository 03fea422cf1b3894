#pragma once

// Run configuration for the command-line tool: one JSON document with the
// sections "model", "train", "data", "paths" and "sweep". Every key has a
// default; unknown keys are rejected.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgvc/data.hpp"
#include "dgvc/model.hpp"
#include "dgvc/train.hpp"

namespace dgvc::cli {

nlohmann::json default_config();

// Default config with the file's keys merged in.
nlohmann::json load_config(const std::filesystem::path& path);

// "section.key=value"; the value is parsed as JSON when possible, otherwise
// taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);
void set_value(nlohmann::json& config, const std::string& dotted_key, const nlohmann::json& value);

model::ModelConfig model_config(const nlohmann::json& config);
train::TrainHyper train_hyper(const nlohmann::json& config);
data::DatasetSpec dataset_spec(const nlohmann::json& config);
std::vector<double> sweep_betas(const nlohmann::json& config);
std::string path_value(const nlohmann::json& config, const std::string& key);

}  // namespace dgvc::cli
