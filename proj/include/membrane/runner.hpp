#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace membrane {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitCheck = 4;

struct RunRequest {
    std::string subcommand;
    std::filesystem::path config;
    std::optional<std::filesystem::path> out_dir;  // overrides output.dir
    std::optional<std::uint64_t> seed;             // overrides optimizer.seed
};

struct RunOutcome {
    int exit_code = kExitOk;                   // kExitOk, kExitSolver (no convergence) or kExitCheck
    std::filesystem::path out_dir;
    std::vector<std::string> artifacts;        // file names inside out_dir
    nlohmann::json manifest;
};

const std::vector<std::string>& subcommands();

/// Executes one subcommand. Configuration problems raise ConfigError or
/// PreconditionError, solver failures SolverError; failed theorem checks are
/// reported through the exit code.
RunOutcome run(const RunRequest& request);

/// Maps an exception from run() to an exit code.
int exit_code_for(const std::exception& e) noexcept;

} // namespace membrane
