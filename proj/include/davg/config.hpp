#pragma once

#include "davg/scenario.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace davg {

/// Dotted names of every configurable field, e.g. "training.rounds".
const std::vector<std::string>& config_keys();

/// One-line description for CLI help.
std::string_view config_key_help(std::string_view key);

/// Sets a field from its textual form; throws ConfigError on unknown keys or bad values.
void set_config_value(ScenarioConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const ScenarioConfig& cfg, std::string_view key);

/**
 * Reads the INI-style scenario file:
 *
 *     [topology]
 *     nodes = 100
 *     [training]
 *     hidden = 512,256,128
 *
 * Sections are topology, disruption, training, data and output. Missing keys
 * keep their defaults; unknown ones are errors.
 */
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const ScenarioConfig& cfg);

nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig config_from_json(const nlohmann::json& j);

/// The full-size setting: BA(100, 2), MNIST from IDX, 784-512-256-128-10, 200 rounds.
ScenarioConfig paper_scale_config();

} // namespace davg
