#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssg/config.hpp"

namespace ssg {

/// Stable process exit codes.
enum ExitCode : int
{
    exit_ok = 0,
    exit_config = 2,
    exit_runtime = 3,
};

struct RunOptions
{
    unsigned workers = 1;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
};

/// Bound constants of a configuration along with the quantities that fed them.
struct ResolvedConstants
{
    BoundConstants consts;
    double c0_hat = 0.0;
    double c1_hat = 0.0;
    std::optional<ExpModelConstants> exp_constants;
};

/// c₀ (estimated or theoretical), f₀ of the noise and the rate b. B_cal is
/// the configured fixed value; calibration happens in cmd_tails.
ResolvedConstants resolve_constants(ExperimentConfig const& cfg, ExperimentSpec const& spec,
                                    unsigned workers);

/// Shortest round-trip decimal representation ('.' separator, locale-free).
std::string format_number(double value);

// Each command writes into the output directory and returns an ExitCode.
int cmd_simulate(ExperimentConfig cfg, RunOptions const& opts, std::ostream& log);
int cmd_tails(ExperimentConfig cfg, RunOptions const& opts, std::ostream& log);
int cmd_check(ExperimentConfig cfg, RunOptions const& opts, std::ostream& log);
int cmd_constants(ExperimentConfig cfg, RunOptions const& opts, std::ostream& out);

/// Entry point of the command-line tool; maps errors to exit codes.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace ssg
