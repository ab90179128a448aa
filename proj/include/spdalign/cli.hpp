#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spdalign {

/// Exit codes of the batch driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

struct CliArgs {
    std::string command;  // segment|synth|run-loso|ablation|cross-montage|learning-curve|stats
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;  // 0: hardware concurrency
    int verbosity = 0;
};

const std::vector<std::string>& cli_commands();

/// Runs one command. Errors become a single JSON line on `err` and a
/// nonzero exit code; JSON log lines go to `err` at verbosity >= 1.
int dispatch(const CliArgs& args, std::ostream& err);

/// Parses argv and dispatches.
int run_cli(int argc, char** argv);

}  // namespace spdalign
