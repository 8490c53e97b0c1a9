#pragma once

#include "homlab/domain_ops.hpp"

namespace homlab {

/// Eigendecomposition of f^* B f; the full basis V = f U maps modes to nodal values,
/// so E(t) = V e^{-mu t} V^*.
struct Factorization {
    RVec mu;
    bool real_basis = false;
    RMat Ur;   // real path: V = diag(d) Ur
    CVec d;
    CMat V;    // complex path

    Eigen::Index dim() const { return mu.size(); }
    CVec to_modes(const CVec& x) const;   // V^* x
    CVec from_modes(const CVec& c) const; // V c
    CMat to_modes(const CMat& x) const;
    /// V diag(w) V^*.
    CMat spectral_matrix(const CVec& w) const;
};

/// Scalar problems with a tridiagonal operator are reduced to a real symmetric
/// tridiagonal eigenproblem by a diagonal phase change. Throws NotPositiveDefinite.
Factorization factorize(const SpMat& B, const SpMat& f);

CMat semigroup_matrix(const Factorization& fac, double t);
CVec semigroup_apply(const Factorization& fac, double t, const CVec& x);
/// (B - zeta Q0)^{-1} = f (f^* B f - zeta)^{-1} f^*.
CMat resolvent_matrix(const Factorization& fac, cplx zeta);

struct ContourOptions {
    int nodes_per_panel = 16;  // Gauss-Legendre panels on [0, T] with edges doubling from c_flat / 4
    double T_max = -1.0;  // <= 0: choose from exp(-(c_flat/2 + T) t) <= 1e-10
    double tail_tol = 1e-8;
    double f_norm_sq = 1.0;  // bound for |f|^2 in the tail estimate
};

struct ContourResult {
    CMat value;
    double T_max = 0.0;
    double tail_bound = 0.0;
    int nodes = 0;  // resolvent solves
};

/// e^{-B t} through -(2 pi i)^{-1} int_gamma e^{-zeta t} (B - zeta Q0)^{-1} dzeta on the
/// rays Re zeta = |Im zeta| + c_flat / 2, graded Gauss-Legendre panels per ray, sparse LU per node.
ContourResult contour_semigroup(const SpMat& B, const SpMat& Q0, const CMat& rhs, double t, double c_flat,
                                const ContourOptions& opts = {});

/// u(t) = E(t) phi + int_0^t E(t - s) F(s) ds with F piecewise linear between samples
/// F[j] at s = j dt, integrated exactly per mode. Output times must lie on the sample grid.
std::vector<CVec> duhamel_solve(const Factorization& fac, const CVec& phi, const std::vector<CVec>& F, double dt,
                                const std::vector<double>& times);

/// Interior layout -> full layout rows (zero Dirichlet rows).
CMat embed_rows(const CMat& m, const DomainGrid& g, int comps);

/// Columns: x, then re/im per component.
void write_snapshot_csv(const std::string& path, const DomainGrid& g, const CVec& full, int comps);

}  // namespace homlab
