#pragma once

#include "homlab/coefficients.hpp"

#include <json.hpp>

namespace homlab {

/// Sampling offset (in grid steps) of flux-point quantities for a scheme.
inline double flux_shift(CellScheme s) { return s == CellScheme::FiniteDifference ? 0.5 : 0.0; }

/// Lambda (n x m per node): b(D)^* g (b(D) Lambda + 1_m) = 0, zero mean.
PeriodicField solve_Lambda(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme,
                           const EllipticSolveOptions& opts = {});

/// LambdaTilde (n x n per node): b(D)^* g b(D) LambdaTilde + sum_j D_j a_j^* = 0, zero mean.
PeriodicField solve_LambdaTilde(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme,
                                const EllipticSolveOptions& opts = {});

/// b(D) applied column by column; the result lives on the flux points.
PeriodicField apply_bD_field(const std::vector<CMat>& b, const PeriodicField& u, CellScheme scheme);

/// Hermitian part of mean(g (b(D) Lambda + 1)). g is sampled on the flux points.
CMat effective_tensor(const PeriodicField& g_flux, const PeriodicField& bLambda);

struct LowerOrderConstants {
    CMat V;            // m x n
    CMat W;            // n x n, Hermitian
    CMat W_parseval;   // through the cell equation and Fourier coefficients
};

LowerOrderConstants lower_order_constants(const PeriodicField& g_flux, const PeriodicField& bLambda,
                                          const PeriodicField& bLambdaTilde, const PeriodicField& LambdaTilde,
                                          const CMat& tilde_rhs_rows);

struct CellData {
    std::string name;
    CellScheme scheme = CellScheme::Spectral;
    PeriodicGrid grid;
    std::vector<CMat> b;

    PeriodicField Lambda;        // nodes
    PeriodicField LambdaTilde;   // nodes
    PeriodicField g_flux;        // flux points
    PeriodicField bLambda;       // flux points, m x m
    PeriodicField bLambdaTilde;  // flux points, m x n
    PeriodicField gtilde;        // flux points, m x m

    CMat g0, g_under, g_over;
    CMat V, W, W_parseval;
    std::vector<CMat> abar;  // mean a_j
    CMat Qbar, Q0bar;
    double lambda = 0.0;

    SymbolBounds bounds;
    double ginv_max = 0.0, Q0_max = 0.0, diam = 1.0;
    double c_star = 0.0, c_flat = 0.0, c3 = 0.0;
    double voigt_margin = 0.0, reuss_margin = 0.0;
    double zero_corrector_residual = 0.0;
    bool zero_corrector = false;
    bool g0_equals_under = false;
    int cg_iterations = 0;

    int n() const { return static_cast<int>(b[0].cols()); }
    int m() const { return static_cast<int>(b[0].rows()); }

    nlohmann::json to_json(bool include_fields = true) const;
};

/// Solves both cell problems and collects the effective constants. domain_diameter
/// enters c_flat; lambda is taken from the coefficient set (zero when unset).
CellData assemble_cell_data(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme,
                            double domain_diameter, const EllipticSolveOptions& opts = {});

nlohmann::json matrix_to_json(const CMat& m);
CMat matrix_from_json(const nlohmann::json& j);

}  // namespace homlab
