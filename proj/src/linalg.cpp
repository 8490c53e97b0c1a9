#include "homlab/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace homlab {

HermitianEig hermitian_eig(const CMat& a) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    HermitianEig out;
    out.values.resize(n);
    if (n == 0) return out;
    if (a.imag().cwiseAbs().maxCoeff() == 0.0) {
        RMat r = a.real();
        lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, r.data(), n, out.values.data());
        if (info != 0) fail_solver("NoConvergence", "dsyevd info " + std::to_string(info));
        out.vectors = r.cast<cplx>();
        return out;
    }
    CMat c = a;
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                     reinterpret_cast<lapack_complex_double*>(c.data()), n,
                                     out.values.data());
    if (info != 0) fail_solver("NoConvergence", "zheevd info " + std::to_string(info));
    out.vectors = std::move(c);
    return out;
}

void tridiagonal_eig(const RVec& diag, const RVec& off, RVec& values, RMat& vectors) {
    const lapack_int n = static_cast<lapack_int>(diag.size());
    values = diag;
    RVec e = off;
    if (e.size() < n) e.conservativeResize(std::max<lapack_int>(n, 1));
    vectors.resize(n, n);
    lapack_int info = LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', n, values.data(), e.data(), vectors.data(), n);
    if (info != 0) fail_solver("NoConvergence", "dstevd info " + std::to_string(info));
}

int bandwidth(const SpMat& a) {
    int kd = 0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it)
            kd = std::max<int>(kd, static_cast<int>(std::abs(it.row() - it.col())));
    return kd;
}

double smallest_eigenvalue_banded(const SpMat& a) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    const lapack_int kd = bandwidth(a);
    const lapack_int ldab = kd + 1;
    std::vector<cplx> ab(static_cast<size_t>(ldab) * n, cplx(0.0, 0.0));
    cplx* abc = ab.data();
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it) {
            const auto i = it.row(), j = it.col();
            if (i <= j) abc[(kd + i - j) + j * ldab] = it.value();
        }
    std::vector<cplx> q(1), z(1);
    std::vector<double> w(n);
    std::vector<lapack_int> ifail(n);
    lapack_int m = 0;
    lapack_int info = LAPACKE_zhbevx(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, kd, reinterpret_cast<lapack_complex_double*>(ab.data()),
                                     ldab, reinterpret_cast<lapack_complex_double*>(q.data()), 1, 0.0, 0.0, 1, 1,
                                     0.0, &m, w.data(), reinterpret_cast<lapack_complex_double*>(z.data()), 1,
                                     ifail.data());
    if (info != 0 || m < 1) fail_solver("NoConvergence", "zhbevx info " + std::to_string(info));
    return w[0];
}

LinearMap LinearMap::dense(const CMat& m) { return dense(CMat(m)); }

LinearMap LinearMap::dense(CMat&& m) {
    LinearMap out;
    out.rows = m.rows();
    out.cols = m.cols();
    auto shared = std::make_shared<CMat>(std::move(m));
    out.apply = [shared](const CVec& x) -> CVec { return (*shared) * x; };
    out.adjoint = [shared](const CVec& y) -> CVec { return shared->adjoint() * y; };
    return out;
}

CMat LinearMap::materialize() const {
    CMat out(rows, cols);
    CVec e = CVec::Zero(cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        e.setZero();
        e(j) = 1.0;
        out.col(j) = apply(e);
    }
    return out;
}

double lanczos_max_eigenvalue(const std::function<CVec(const CVec&)>& op, Eigen::Index dim,
                              const LanczosOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd;
    CVec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = cplx(nd(rng), nd(rng));
    v.normalize();

    const int kmax = static_cast<int>(std::min<Eigen::Index>(dim, opts.max_iter));
    CMat basis(dim, kmax);
    std::vector<double> alpha, beta;
    double theta = 0.0;
    for (int k = 0; k < kmax; ++k) {
        basis.col(k) = v;
        CVec w = op(v);
        const double a = std::real(v.dot(w));
        alpha.push_back(a);
        // full reorthogonalization, applied twice
        for (int pass = 0; pass < 2; ++pass)
            w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).adjoint() * w);
        const double b = w.norm();

        const int m = k + 1;
        RVec d = Eigen::Map<RVec>(alpha.data(), m);
        RVec e(std::max(m - 1, 1));
        for (int i = 0; i + 1 < m; ++i) e(i) = beta[i];
        RVec vals;
        RMat vecs;
        tridiagonal_eig(d, e.head(std::max(m - 1, 0)), vals, vecs);
        theta = vals(m - 1);
        const double resid = b * std::abs(vecs(m - 1, m - 1));
        if (b <= 1e-14 * std::abs(theta) || b == 0.0 || resid <= opts.rel_tol * std::abs(theta) ||
            m == kmax)
            break;
        beta.push_back(b);
        v = w / b;
    }
    return theta;
}

void gauss_legendre(int n, RVec& nodes, RVec& weights) {
    RVec d = RVec::Zero(n);
    RVec e(std::max(n - 1, 1));
    for (int k = 1; k < n; ++k) e(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    RMat vecs;
    tridiagonal_eig(d, e.head(n - 1), nodes, vecs);
    weights.resize(n);
    for (int i = 0; i < n; ++i) weights(i) = 2.0 * vecs(0, i) * vecs(0, i);
}

}  // namespace homlab
