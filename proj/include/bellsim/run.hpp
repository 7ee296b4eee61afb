#pragma once

#include "bellsim/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bellsim {

enum ExitCode : int { kExitPass = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitPhysicsAbort = 3 };

/// One numeric comparison: pass iff `value relation threshold`.
struct Check {
    std::string name;
    double value = 0.0;
    std::string relation = "<=";
    double threshold = 0.0;
    bool pass = false;
};

struct RunReport {
    RunConfig config;
    std::vector<Check> checks;
    /// Informational numbers that do not decide the exit code.
    std::vector<std::pair<std::string, double>> diagnostics;
    std::vector<std::string> aborts;
    /// Relative to config.out_dir, in write order.
    std::vector<std::string> artifacts;
    double elapsed_seconds = 0.0;

    [[nodiscard]] bool all_pass() const;
    /// kExitPhysicsAbort if any member aborted, else kExitCheckFailed if any check failed, else kExitPass.
    [[nodiscard]] int exit_code() const;
};

/// Validates the config, runs the engine and writes every artifact into
/// config.out_dir, including report.json. Wall-clock time goes to timing.txt
/// only, so the CSV and JSON artifacts depend on config and seeds alone.
/// Throws ConfigError for invalid input.
RunReport run(const RunConfig& config, unsigned threads = 1);

/// JSON dumps for debugging.
std::string dump_basis_json(const RunConfig& config);
std::string dump_spectrum_json(const RunConfig& config);

} // namespace bellsim
