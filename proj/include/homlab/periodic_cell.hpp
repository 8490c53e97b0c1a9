#pragma once

#include "homlab/common.hpp"

#include <functional>

namespace homlab {

/// Rectangular lattice with orthogonal periods L_i.
struct Lattice {
    std::vector<double> periods{1.0};

    int dim() const { return static_cast<int>(periods.size()); }
    double measure() const;
    /// Half the diameter of the cell.
    double r1() const;
    static Lattice unit(int d);
};

/// Uniform periodic grid with node coordinates y_k = k h (axis 0 fastest).
struct PeriodicGrid {
    Lattice lattice;
    std::vector<int> n;

    PeriodicGrid() = default;
    PeriodicGrid(Lattice lat, std::vector<int> counts);

    int dim() const { return lattice.dim(); }
    int size() const;
    double h(int axis) const { return lattice.periods[axis] / n[axis]; }
    std::vector<double> node(int k, double shift = 0.0) const;
    /// Signed wavenumber 2 pi k / L for the FFT index along an axis; Nyquist maps to 0.
    double wavenumber(int axis, int k) const;
    int axis_index(int k, int axis) const;
};

/// Periodic function sampled at arbitrary cell coordinates.
using CellFunction = std::function<CMat(const std::vector<double>&)>;

/// Complex rows x cols matrix per grid node.
struct PeriodicField {
    PeriodicGrid grid;
    int rows = 1;
    int cols = 1;
    std::vector<CMat> values;

    PeriodicField() = default;
    PeriodicField(PeriodicGrid g, int r, int c);
    const CMat& operator[](int k) const { return values[k]; }
    CMat& operator[](int k) { return values[k]; }
    /// Entry (r, c) as a 1 x N row.
    CMat entry_row(int r, int c) const;
};

/// Sample f at y_k + shift * h on every axis.
PeriodicField sample_field(const CellFunction& f, const PeriodicGrid& grid, double shift = 0.0);

/// Trigonometric interpolant of a sampled field (samples at y_k + shift * h).
CellFunction fourier_interpolant(const PeriodicField& field, double shift = 0.0);
/// Value of the nearest sample (samples at y_k + shift * h). Exact on the sample points.
CellFunction grid_lookup(const PeriodicField& field, double shift = 0.0);

CMat mean_value(const PeriodicField& f);
/// (mean f^-1)^-1; throws SingularSample when a nodal condition number exceeds 1e12.
CMat underline_mean(const PeriodicField& f);
double max_norm(const PeriodicField& f);
double max_inverse_norm(const PeriodicField& f);

// Grid vectors are stored as (components x nodes).

CMat fft_forward(const CMat& u, const PeriodicGrid& grid);
CMat fft_inverse(const CMat& u, const PeriodicGrid& grid);

/// D_j = -i d/dy_j, spectrally.
CMat spectral_derivative(const CMat& u, const PeriodicGrid& grid, int axis);

/// Zero-mean solution of Laplace(u) = rhs.
CMat poisson_periodic(const CMat& rhs, const PeriodicGrid& grid);

enum class CellScheme { Spectral, FiniteDifference };

/// b(D) u. For the finite-difference scheme (d = 1) the output lives on the
/// flux points y_{k+1/2}.
CMat apply_bD(const std::vector<CMat>& b, const CMat& u, const PeriodicGrid& grid, CellScheme scheme);
CMat apply_bD_adjoint(const std::vector<CMat>& b, const CMat& w, const PeriodicGrid& grid, CellScheme scheme);
/// Centered difference -i (u_{k+1} - u_{k-1}) / 2h (d = 1).
CMat centered_derivative(const CMat& u, const PeriodicGrid& grid);

/// b(D)^* g b(D) u. For the finite-difference scheme g holds samples at the flux points.
CMat apply_cell_operator(const PeriodicField& g, const std::vector<CMat>& b, const CMat& u,
                         CellScheme scheme);

struct EllipticSolveOptions {
    double rel_tol = 1e-10;
    int max_iter = -1;  // default 10 * nodes
};

struct EllipticSolveResult {
    CMat u;
    int iterations = 0;
    double residual = 0.0;
};

/// Zero-mean solution of b(D)^* g b(D) u = rhs by preconditioned conjugate
/// gradients; the preconditioner inverts the operator with g replaced by its mean.
EllipticSolveResult periodic_elliptic_solve(const PeriodicField& g, const std::vector<CMat>& b,
                                            const CMat& rhs, CellScheme scheme,
                                            const EllipticSolveOptions& opts = {});

inline double grid_inner_real(const CMat& a, const CMat& b) {
    return (a.conjugate().cwiseProduct(b)).sum().real();
}

}  // namespace homlab
