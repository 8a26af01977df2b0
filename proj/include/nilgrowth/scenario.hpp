#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace nilgrowth::scenario {

// Exit codes of the runner: 0 ok, 2 parse error, 3 cap exceeded (partial
// artifacts flagged), 4 internal assertion failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 2;
inline constexpr int kExitCap = 3;
inline constexpr int kExitInternal = 4;

struct RunOptions {
    std::filesystem::path out_dir = ".";
    int jobs = 1;
    std::optional<std::uint64_t> seed;      // overrides the config seed
    std::optional<std::uint64_t> cap;       // overrides the config state cap
    std::optional<long> trials;             // overrides the config trial count
};

// Runs one scenario object (already parsed); writes artifacts; returns the
// exit code.  Diagnostics go to `log`.
int run_scenario(const nlohmann::json& j, const RunOptions& opt, std::ostream& log);

// Runs a config file: either a single scenario object or {"scenarios": [..]}.
// With opt.jobs > 1, independent scenarios run in parallel.
int run_config_file(const std::filesystem::path& config, const RunOptions& opt, std::ostream& log);

// Reshapes an artifact (profile or decay CSV) into tidy long-format rows
// (series, x, y).
int emit_plot_series(const std::filesystem::path& artifact, const std::filesystem::path& out,
                     std::ostream& log);

}  // namespace nilgrowth::scenario
