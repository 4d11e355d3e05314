#pragma once

#include <string>

#include <json.hpp>

#include "isolab/dataset.hpp"
#include "isolab/train.hpp"

namespace isolab::cli {

// JSON config files mirror the config structs field for field; unknown keys
// are rejected so typos cannot silently fall back to defaults. All fields
// are optional and default to the struct defaults. The "preset" key selects
// the learning-rate preset: "desk" (1e-3, default) or "paper" (2e-5).
TrainConfig train_config_from_json(const nlohmann::json& doc);
TrainConfig load_train_config(const std::string& path);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

SplitSpec load_split_spec(const std::string& path);
nlohmann::json split_spec_to_json(const SplitSpec& spec);

SynthConfig load_synth_config(const std::string& path);
nlohmann::json synth_config_to_json(const SynthConfig& cfg);

// Parses "a,b,c" lists.
std::vector<std::string> split_list(const std::string& csv);
std::vector<double> parse_double_list(const std::string& csv);
std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace isolab::cli
