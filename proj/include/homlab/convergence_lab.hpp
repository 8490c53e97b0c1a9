#pragma once

#include "homlab/correctors.hpp"

#include <cstdint>
#include <limits>
#include <map>

namespace homlab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Piecewise rate in the Duhamel estimate: eps^{2-2/r}, eps (|ln eps| + 1)^{1/2}, eps.
double theta_rate(double eps, double r);
/// Piecewise rate of the corrector estimate with a right-hand side:
/// eps^{1-2/r}, eps^{1/2} (|ln eps| + 1)^{3/4}, eps^{1/2}.
double omega_rate(double eps, double r);
/// |sin phi|^{-1} for phi in (0, pi/2) or (3 pi/2, 2 pi), else 1.
double c_phi(double phi);
/// c(psi)^2 |zeta - c_flat|^{-2} close to c_flat, c(psi)^2 beyond distance 1; psi = arg(zeta - c_flat).
double rho_flat(cplx zeta, double c_flat);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

/// Least squares on (ln eps, ln value). Needs >= 3 points with positive values (NonPositiveValue).
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct SweepConfig {
    std::string preset = "sine_g";
    PresetOptions preset_options;
    double length = 1.0;
    std::vector<double> eps{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    double max_eps = 1.0 / 16;
    std::vector<double> times{0.25};
    int n_per = 16;
    std::vector<std::string> norms{"L2", "H1", "H1_corrector", "H1_corrector_plain", "flux", "flux_plain",
                                   "interior_L2", "interior_H1"};
    double delta0 = 0.25;
    bool envelope = true;
    std::vector<double> envelope_times{0.05, 0.25, 1.0};  // eps^2 is always added
    std::vector<double> decay_times{1.0, 2.0, 3.0, 4.0};
    bool contour_validation = false;
    std::vector<double> contour_times{0.1, 1.0};
    bool discretization_guard = true;
    int jobs = 0;  // 0: hardware concurrency

    // elliptic sweep
    std::vector<cplx> zetas{cplx(-1.0, 0.0)};
    std::pair<cplx, cplx> zeta_scaling{cplx(0.0, 4.0), cplx(0.0, 16.0)};

    // Duhamel sweep
    std::vector<double> r_values{kInfinity, 2.0};
    double horizon = 1.0;
    int time_steps = 2048;
    std::vector<double> duhamel_times{0.25, 0.5, 0.75, 1.0};
    double forcing_scale = 1.0;
};

/// Throws InvalidArgument, IndivisibleEpsilon or WindowExceedsMargin.
void validate_sweep_config(const SweepConfig& cfg);

/// Coefficients and finite-difference cell data on the n_per-point cell grid, with lambda
/// fixed by the argument, the preset, or calibration over the eps list (largest value).
struct LabSetup {
    CoefficientSet coeffs;
    CellData cd;
    double lambda = 0.0;
    int n_per = 16;
};

LabSetup prepare_lab(const SweepConfig& cfg, int n_per, std::optional<double> lambda = std::nullopt);

struct Gate {
    enum class Kind { None, Range, AtLeast } kind = Kind::None;
    double lo = 0.0;
    double hi = 0.0;
};

struct NormTable {
    std::string norm;
    std::string time;  // printed time label
    std::vector<double> eps;
    std::vector<double> values;
    std::optional<RateFit> fit;
    Gate gate;
    std::string status;  // pass, fail, vanishing, reported
};

struct Check {
    std::string name;
    bool pass = true;
    nlohmann::json detail;
};

struct ConvergenceReport {
    std::string kind;
    nlohmann::json metadata;
    std::vector<NormTable> tables;
    std::vector<Check> checks;
    std::map<std::string, double> runtimes;  // kept out of the JSON so that reports stay byte-stable

    bool passed() const;
    const NormTable* table(const std::string& norm, const std::string& time = {}) const;
    const Check* check(const std::string& name) const;
    nlohmann::json to_json() const;
};

/// Lambda is the largest calibrated value over the sweep grids unless the preset fixes it.
ConvergenceReport run_parabolic_sweep(const SweepConfig& cfg);
ConvergenceReport run_elliptic_sweep(const SweepConfig& cfg);
ConvergenceReport run_duhamel_sweep(const SweepConfig& cfg);

/// report.json, tables.csv, plot_<norm>_<time>.dat (log10 eps, log10 value) and timings.json.
void write_report(const ConvergenceReport& report, const std::string& dir, const std::string& stem = "report");

std::string format_time_label(double t);

}  // namespace homlab
