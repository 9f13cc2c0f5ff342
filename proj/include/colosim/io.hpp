#pragma once

#include <string>

#include <json.hpp>

#include "colosim/basin.hpp"
#include "colosim/simulator.hpp"

namespace colosim {

/// Thrown for malformed configuration documents.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

void write_trace_csv(const std::string& path, const Trace& trace);
void write_events_csv(const std::string& path, const EventLog& events, std::size_t n_gflc);
void write_basin_csv(const std::string& path, const BasinMap& map);

nlohmann::json summary_to_json(const Summary& s);

/// Full analysis document: SEPs, damping lines, boundaries and critical
/// energies for both subsystems and all line variants.
nlohmann::json analyze_to_json(const ScenarioConfig& cfg);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace colosim
