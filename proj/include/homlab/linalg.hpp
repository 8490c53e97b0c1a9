#pragma once

#include "homlab/common.hpp"

#include <cstdint>
#include <functional>

namespace homlab {

struct HermitianEig {
    RVec values;  // ascending
    CMat vectors;
};

/// Dense Hermitian eigendecomposition (LAPACK divide and conquer). Falls back
/// to the real symmetric driver when the imaginary part vanishes.
HermitianEig hermitian_eig(const CMat& a);

/// Real symmetric tridiagonal eigendecomposition, ascending.
void tridiagonal_eig(const RVec& diag, const RVec& off, RVec& values, RMat& vectors);

/// Smallest eigenvalue of a sparse Hermitian matrix with narrow bandwidth.
double smallest_eigenvalue_banded(const SpMat& a);

/// Bandwidth (max |i-j| over stored entries).
int bandwidth(const SpMat& a);

/// Matrix-free linear map with adjoint.
struct LinearMap {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::function<CVec(const CVec&)> apply;
    std::function<CVec(const CVec&)> adjoint;

    static LinearMap dense(const CMat& m);
    static LinearMap dense(CMat&& m);
    CMat materialize() const;
};

struct LanczosOptions {
    double rel_tol = 1e-6;
    int max_iter = 300;
    std::uint64_t seed = 12345;
};

/// Largest eigenvalue of a Hermitian positive semidefinite map, by Lanczos with
/// full reorthogonalization. Returns the Ritz value at convergence.
double lanczos_max_eigenvalue(const std::function<CVec(const CVec&)>& op, Eigen::Index dim,
                              const LanczosOptions& opts = {});

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, RVec& nodes, RVec& weights);

}  // namespace homlab
