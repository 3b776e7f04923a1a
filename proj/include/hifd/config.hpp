#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hifd/detector.hpp"
#include "hifd/wavesim.hpp"

namespace hifd::config {

/// Everything one run needs: scenario (sim + events) and pipeline settings.
struct RunConfig {
    wavesim::SimConfig sim;
    wavesim::EventSchedule schedule;
    detector::DetectorConfig detector;

    void validate() const;
};

/// Parses the sectioned JSON config (sim / events / havok / s2g / detector).
/// Unknown or ill-typed keys throw ConfigError with the offending key path.
RunConfig parse_config_json(std::string_view text);

/// Same, optionally applying the HIFD_* environment overrides first.
RunConfig parse_config_json(std::string_view text, bool apply_env);

/// Loads a config file, then applies HIFD_* environment overrides
/// (HIFD_<SECTION>__<KEY>[__<SUBKEY>]=value, value parsed as JSON).
RunConfig load_config(const std::filesystem::path& path, bool apply_env = true);

/// Canonical serialization: fixed key order and all defaults materialized,
/// so two equal configs render byte-identically.
std::string canonical_echo(const RunConfig& cfg);

/// Bundled scenario presets; returns empty for unknown names.
std::string_view preset(std::string_view name);

}  // namespace hifd::config
