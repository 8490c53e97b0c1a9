#pragma once

#include "homlab/periodic_cell.hpp"

#include <cstdint>
#include <optional>

namespace homlab {

/// b(xi) = sum_j b_j xi_j with m x n blocks b_j.
struct Symbol {
    std::vector<CMat> b;

    int d() const { return static_cast<int>(b.size()); }
    int m() const { return static_cast<int>(b[0].rows()); }
    int n() const { return static_cast<int>(b[0].cols()); }
    CMat at(const std::vector<double>& theta) const;
};

struct SymbolBounds {
    double alpha0 = 0.0;
    double alpha1 = 0.0;
};

/// Extreme eigenvalues of b(theta)^* b(theta) over sampled unit vectors.
SymbolBounds validate_symbol(const Symbol& s);

/// D^* gcheck D + eps^{-2} vcheck + eps^{-1} vhat + Vcheck before the ground-state
/// factorization (d = 1). vcheck is shifted so the periodic ground level is zero.
struct OriginalForm {
    CellFunction gcheck;  // read on the flux points
    CellFunction vcheck;
    CellFunction vhat;
    CellFunction Vcheck;
    CellFunction omega;
};

struct CoefficientSet {
    std::string name;
    Lattice lattice;
    Symbol symbol;
    CellFunction g;               // m x m
    std::vector<CellFunction> a;  // n x n per axis; empty means zero
    CellFunction Q;               // n x n
    CellFunction Q0;              // n x n, positive definite
    CellFunction singular_potential;  // n x n, enters as eps^{-1} v(x / eps); empty means none
    std::optional<OriginalForm> original;
    std::optional<double> lambda; // unset: calibrate on the domain

    int d() const { return symbol.d(); }
    int m() const { return symbol.m(); }
    int n() const { return symbol.n(); }
    bool has_first_order() const { return !a.empty(); }
};

CellFunction constant_function(const CMat& value);
CellFunction scalar_function(std::function<double(const std::vector<double>&)> f);

/// Q0^{-1/2} for a Hermitian positive definite matrix.
CMat inverse_sqrt_hpd(const CMat& q0);

void validate_coefficients(const CoefficientSet& c);

struct MagneticBuild {
    CoefficientSet coefficients;
    PeriodicField phi;              // Laplace(phi) = v, zero mean
    std::vector<PeriodicField> xi;  // xi_j = -d_j phi
};

/// Rewrites (D - A)^* g (D - A) + eps^{-1} v + V as b(D)^* g b(D) + sum_j (a_j D_j + D_j a_j^*) + Q
/// with b(D) = D. g is a real symmetric d x d field, A a list of d real scalars.
MagneticBuild build_scalar_magnetic(const PeriodicGrid& grid, const CellFunction& g,
                                    const std::vector<CellFunction>& A, const CellFunction& v,
                                    const CellFunction& V, const CellFunction& Q0 = {});

struct GroundState {
    PeriodicField omega;  // positive, mean(omega^2) = 1
    CellFunction omega_fn;
    double shift = 0.0;  // lowest eigenvalue of D^* g D + v
    double gap = 0.0;
    double residual = 0.0;
};

/// Periodic ground state of D^* gcheck D + vcheck. Spectral collocation, or forward
/// differences with gcheck on the flux points (d = 1).
GroundState ground_state_factorize(const PeriodicGrid& grid, const CellFunction& gcheck, const CellFunction& vcheck,
                                   CellScheme scheme = CellScheme::Spectral);

struct StrongSingularBuild {
    MagneticBuild magnetic;
    GroundState ground;
    double vhat_mean = 0.0;  // omega^2-weighted mean removed from vhat
};

/// Factorizes D^* gcheck D + eps^{-2} vcheck + eps^{-1} vhat + Vcheck through the ground state
/// omega: g = omega^2 gcheck, v = vhat omega^2, V = Vcheck omega^2, Q0 = omega^2.
StrongSingularBuild build_strong_singular(const PeriodicGrid& grid, const CellFunction& gcheck,
                                          const CellFunction& vcheck, const CellFunction& vhat,
                                          const CellFunction& Vcheck, const std::vector<CellFunction>& A = {});

/// Finite-difference counterpart on the n_per-point cell grid (d = 1): omega is the discrete
/// ground state, g = gcheck_{k+1/2} omega_k omega_{k+1} on the flux points, and the eps^{-1}
/// term stays a potential (vhat - c) omega^2. The original form is attached to the result,
/// so that omega^{-1} (original operator) omega^{-1} equals the factorized one on the grid.
StrongSingularBuild build_strong_singular_fd(int n_per, const CellFunction& gcheck, const CellFunction& vcheck,
                                             const CellFunction& vhat, const CellFunction& Vcheck);

struct PresetOptions {
    int cell_points = 64;        // grid for builder-derived fields
    std::uint64_t seed = 1;      // random presets
    std::optional<double> lambda;
    CellScheme scheme = CellScheme::Spectral;  // FiniteDifference: grid-consistent strong-singular build
};

std::vector<std::string> preset_names();
CoefficientSet make_preset(const std::string& name, const PresetOptions& opts = {});

/// Random positive preset: d = 1 uses b = (1, 2)^T with a 2 x 2 Hermitian g,
/// d = 2 uses the gradient with a real symmetric 2 x 2 g.
CoefficientSet random_positive_preset(std::uint64_t seed, int d);

}  // namespace homlab
