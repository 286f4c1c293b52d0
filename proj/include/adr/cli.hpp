#pragma once

#include "adr/continual.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace adr {

/// Anything wrong with a config file, an override, or an invocation target;
/// maps to exit code 2 (runtime failures map to 1).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Complete config with every key present; files and overrides are validated
/// against this shape (unknown keys rejected, type categories enforced).
nlohmann::json default_config_json();

/// Reads a JSON config and overlays it on the defaults.
nlohmann::json load_config_file(const std::filesystem::path& path);

/// "dotted.path=value"; value parsed as JSON, falling back to a bare string.
void apply_override(nlohmann::json& cfg, const std::string& key_value);

ExperimentConfig parse_experiment_config(const nlohmann::json& cfg);

struct GridSpec {
    std::vector<double> gamma;
    std::vector<int> alpha;
    std::vector<std::uint64_t> seeds;
};

/// Grid lists from cfg["grid"]; enforces the allowed search sets
/// (gamma in {1e-3..1}, alpha in {1..64} powers of two).
GridSpec parse_grid(const nlohmann::json& cfg);

/// Full command-line application (run, sweep, gen-sbm, validate-bank,
/// report). Returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace adr
