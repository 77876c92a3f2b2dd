#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dfx/workflow.hpp"

namespace dfxcli {

struct LoadedConfig {
  dfx::ExtractionConfig extraction;
  std::optional<dfx::CorruptionSpec> corruption;
  std::filesystem::path source;
};

/// Parses a JSON config document, loads every experiment's data CSV (paths
/// resolve relative to the config file), applies defaults and reports all
/// validation problems at once. The env var DFX_SEED, when set, overrides
/// the configured seed.
LoadedConfig load_config(const std::filesystem::path& path);

/// Reads a `name,value` parameter file (the best_params.csv format; the
/// header line is optional).
std::vector<std::pair<std::string, double>> load_params_file(
    const std::filesystem::path& path);

}  // namespace dfxcli
