#pragma once

#include "qbsde/drivers.hpp"
#include "qbsde/keyvalue.hpp"
#include "qbsde/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qbsde {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitNonConvergence = 3,
    kExitStrict = 4,
};

/// Solver and output settings read from the same document as the model.
struct RunConfig {
    std::string mode = "direct"; // direct | picard | stitched | triangular
    double tol = 1e-10;
    int max_iter = 200;
    std::optional<double> horizon; // stitched chunk length; nullopt = adaptive
    std::optional<double> z_truncation;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::size_t max_nodes = kDefaultMaxNodes;
    double compare_tol = 1e-8;
    std::size_t falsify_samples = 10000;
    double falsify_radius = 10.0;
};

RunConfig read_run_config(const KeyValueDoc& doc);

struct LoadedConfig {
    ProblemInstance instance;
    RunConfig run;
};

/// Reads the model and run keys of a config file; unknown keys are rejected.
LoadedConfig load_config(const std::string& path);
LoadedConfig load_config_text(const std::string& text);

/// Outcome of the configured solver on one lattice.
struct SolveOutcome {
    SolutionField field;
    bool converged = true;
    std::string status = "converged";
    std::vector<std::string> details; // extra report lines ("key = value")
};

SolveOutcome run_solver(const ProblemInstance& instance, const LatticeModel& lattice, const RunConfig& run);

/// Entry point of the command-line tool; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qbsde
