#pragma once

#include "homlab/convergence_lab.hpp"

#include <iosfwd>

namespace homlab {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitValidation = 2,
    kExitSolver = 3,
    kExitGateFailed = 4,
};

struct InitialData {
    std::string type = "sine";  // sine: sin(mode pi x); bump: x^2 (1 - x)^2 scaled to max 1
    int mode = 1;
};

struct EvolveOptions {
    double eps = 1.0 / 16;
    double t = 0.25;
    InitialData initial;
    bool contour = false;
};

/// Parsed JSON configuration. Sweep fields are shared by all commands.
struct RunConfig {
    SweepConfig sweep;
    CellScheme cell_scheme = CellScheme::Spectral;
    std::vector<int> cell_points;  // empty: 64 per axis
    EvolveOptions evolve;
    std::vector<std::string> sweeps{"parabolic"};
    std::string output = "out";
};

/// Throws Error(InvalidArgument) on unknown keys or wrong types.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Full command line (argv[0] ignored). Returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace homlab
