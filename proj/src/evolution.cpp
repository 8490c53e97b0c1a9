#include "homlab/evolution.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace homlab {

CVec Factorization::to_modes(const CVec& x) const {
    if (real_basis) return Ur.transpose() * (d.conjugate().cwiseProduct(x));
    return V.adjoint() * x;
}

CVec Factorization::from_modes(const CVec& c) const {
    if (real_basis) return d.cwiseProduct(Ur * c);
    return V * c;
}

CMat Factorization::to_modes(const CMat& x) const {
    if (real_basis) return Ur.transpose() * (d.conjugate().asDiagonal() * x);
    return V.adjoint() * x;
}

CMat Factorization::spectral_matrix(const CVec& w) const {
    if (!real_basis) return V * w.asDiagonal() * V.adjoint();
    const RVec wr = w.real(), wi = w.imag();
    RMat re = Ur * wr.asDiagonal() * Ur.transpose();
    CMat out;
    if (wi.cwiseAbs().maxCoeff() > 0.0) {
        RMat im = Ur * wi.asDiagonal() * Ur.transpose();
        out = re.cast<cplx>() + kI * im.cast<cplx>();
    } else {
        out = re.cast<cplx>();
    }
    return d.asDiagonal() * out * d.conjugate().asDiagonal();
}

Factorization factorize(const SpMat& B, const SpMat& f) {
    SpMat bt = f.adjoint() * B * f;
    Factorization fac;
    const Eigen::Index n = bt.rows();
    if (bandwidth(bt) <= 1 && bandwidth(f) == 0) {
        RVec diag(n), off(std::max<Eigen::Index>(n - 1, 0));
        CVec phase(n);
        phase(0) = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) diag(i) = bt.coeff(i, i).real();
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            const cplx lower = 0.5 * (bt.coeff(i + 1, i) + std::conj(bt.coeff(i, i + 1)));
            const double r = std::abs(lower);
            off(i) = r;
            phase(i + 1) = r > 0.0 ? phase(i) * lower / r : phase(i);
        }
        tridiagonal_eig(diag, off, fac.mu, fac.Ur);
        fac.real_basis = true;
        fac.d.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) fac.d(i) = f.coeff(i, i) * phase(i);
    } else {
        const CMat dense = hermitian_part(CMat(bt));
        auto eig = hermitian_eig(dense);
        fac.mu = eig.values;
        fac.V = f * eig.vectors;
    }
    if (n > 0 && !(fac.mu(0) > 0.0)) fail_solver("NotPositiveDefinite", "f^* B f has a non-positive eigenvalue");
    return fac;
}

CMat semigroup_matrix(const Factorization& fac, double t) {
    CVec w(fac.dim());
    for (Eigen::Index k = 0; k < fac.dim(); ++k) w(k) = std::exp(-fac.mu(k) * t);
    return fac.spectral_matrix(w);
}

CVec semigroup_apply(const Factorization& fac, double t, const CVec& x) {
    CVec c = fac.to_modes(x);
    for (Eigen::Index k = 0; k < fac.dim(); ++k) c(k) *= std::exp(-fac.mu(k) * t);
    return fac.from_modes(c);
}

CMat resolvent_matrix(const Factorization& fac, cplx zeta) {
    CVec w(fac.dim());
    for (Eigen::Index k = 0; k < fac.dim(); ++k) w(k) = 1.0 / (fac.mu(k) - zeta);
    return fac.spectral_matrix(w);
}

ContourResult contour_semigroup(const SpMat& B, const SpMat& Q0, const CMat& rhs, double t, double c_flat,
                                const ContourOptions& opts) {
    if (!(t > 0.0)) fail_validation("InvalidArgument", "contour route needs t > 0");
    ContourResult out;
    const double shift = 0.5 * c_flat;
    out.T_max = opts.T_max > 0.0 ? opts.T_max : std::max(1.0, std::log(1e10) / t - shift);
    // |int_T^inf| <= (2/pi) * sqrt2 * sqrt2 |f|^2 / T * e^{-(shift+T) t} / t on both rays
    out.tail_bound = (4.0 / kPi) * opts.f_norm_sq / out.T_max * std::exp(-(shift + out.T_max) * t) / t;
    if (out.tail_bound > opts.tail_tol) fail_validation("TailTooLarge", "contour truncation tail exceeds tolerance");

    // Poles of the resolvent sit at a distance from the ray proportional to their position
    // along it, so panels grow geometrically.
    std::vector<double> edges{0.0};
    for (double e = std::max(0.25 * c_flat, 1e-3); e < out.T_max; e *= 2.0) edges.push_back(e);
    edges.push_back(out.T_max);
    RVec x, w;
    gauss_legendre(opts.nodes_per_panel, x, w);
    out.value = CMat::Zero(rhs.rows(), rhs.cols());
    const cplx dir[2] = {cplx(1.0, -1.0), cplx(1.0, 1.0)};  // lower ray outward, upper ray outward
    const double sign[2] = {1.0, -1.0};
    Eigen::SparseLU<SpMat> lu;
    bool analyzed = false;
    for (size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        for (int k = 0; k < opts.nodes_per_panel; ++k) {
            const double s = a + 0.5 * (b - a) * (x(k) + 1.0);
            const double ds = 0.5 * (b - a) * w(k);
            for (int ray = 0; ray < 2; ++ray) {
                const cplx zeta = shift + s * dir[ray];
                SpMat A = B - zeta * Q0;
                A.makeCompressed();
                if (!analyzed) {
                    lu.analyzePattern(A);
                    analyzed = true;
                }
                lu.factorize(A);
                if (lu.info() != Eigen::Success) fail_solver("NoConvergence", "sparse LU failed on the contour");
                const CMat r = lu.solve(rhs);
                out.value += (sign[ray] * ds * std::exp(-zeta * t)) * dir[ray] * r;
                ++out.nodes;
            }
        }
    }
    out.value *= -1.0 / (2.0 * kPi * kI);
    return out;
}

namespace {

// int_0^1 e^{-x s} ds and int_0^1 e^{-x s} s ds
double phi1(double x) { return x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x; }

double psi1(double x) {
    if (x < 1e-3) return 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0;
    return (1.0 - std::exp(-x) * (1.0 + x)) / (x * x);
}

}  // namespace

std::vector<CVec> duhamel_solve(const Factorization& fac, const CVec& phi, const std::vector<CVec>& F, double dt,
                                const std::vector<double>& times) {
    if (!(dt > 0.0) || F.empty()) fail_validation("InvalidArgument", "need a positive time step and samples of F");
    double fmax = 0.0, dd = 0.0;
    for (const auto& f : F) fmax = std::max(fmax, f.norm());
    for (size_t j = 1; j + 1 < F.size(); ++j) dd = std::max(dd, (F[j + 1] - 2.0 * F[j] + F[j - 1]).norm() / 8.0);
    if (fmax > 0.0 && dd > 1e-6 * fmax)
        fail_validation("TimeGridTooCoarse", "piecewise-linear interpolation error of F exceeds 1e-6");

    std::vector<long> steps;
    for (double t : times) {
        const double r = t / dt;
        const long k = std::lround(r);
        if (std::abs(r - k) > 1e-9 * std::max(1.0, r) || k < 0 || k >= static_cast<long>(F.size()))
            fail_validation("InvalidArgument", "output time is not on the sample grid");
        steps.push_back(k);
    }
    const Eigen::Index n = fac.dim();
    RVec decay(n), a0(n), a1(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double x = fac.mu(k) * dt;
        decay(k) = std::exp(-x);
        const double p = psi1(x);
        a0(k) = dt * p;                 // weight of F_j (left end)
        a1(k) = dt * (phi1(x) - p);     // weight of F_{j+1}
    }
    std::vector<CVec> out(times.size());
    CVec c = fac.to_modes(phi);
    CVec fl = fac.to_modes(F[0]);
    long last = *std::max_element(steps.begin(), steps.end());
    for (long j = 0; j <= last; ++j) {
        for (size_t q = 0; q < steps.size(); ++q)
            if (steps[q] == j) out[q] = fac.from_modes(c);
        if (j == last) break;
        const CVec fr = fac.to_modes(F[j + 1]);
        c = decay.cwiseProduct(c) + a0.cwiseProduct(fl) + a1.cwiseProduct(fr);
        fl = fr;
    }
    return out;
}

CMat embed_rows(const CMat& m, const DomainGrid& g, int comps) {
    CMat out = CMat::Zero(static_cast<Eigen::Index>(g.full_nodes()) * comps, m.cols());
    out.middleRows(comps, m.rows()) = m;
    return out;
}

void write_snapshot_csv(const std::string& path, const DomainGrid& g, const CVec& full, int comps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_validation("InvalidArgument", "cannot open " + path);
    out << "x";
    for (int c = 0; c < comps; ++c) {
        if (comps == 1) out << ",re,im";
        else out << ",re_" << c << ",im_" << c;
    }
    out << '\n';
    char buf[64];
    for (int i = 0; i <= g.N; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", g.x(i));
        out << buf;
        for (int c = 0; c < comps; ++c) {
            const cplx v = full(static_cast<Eigen::Index>(i) * comps + c);
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", v.real(), v.imag());
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace homlab
