#include "homlab/correctors.hpp"

#include <cstdio>
#include <fstream>

namespace homlab {

CorrectorFields sample_corrector_fields(const CellData& cd, const DomainGrid& g) {
    CorrectorFields out;
    const bool exact = cd.scheme == CellScheme::FiniteDifference && cd.grid.n[0] == g.n_per &&
                       cd.grid.lattice.periods[0] == 1.0;
    const int nodes = g.full_nodes();
    auto lookup = [&](const PeriodicField& f, double shift, std::vector<CMat>& dst, int count, double offset) {
        dst.resize(count);
        if (exact) {
            for (int i = 0; i < count; ++i) dst[i] = f[i % g.n_per];
            return;
        }
        const CellFunction fn = fourier_interpolant(f, shift);
        for (int i = 0; i < count; ++i) dst[i] = fn(cell_point(g, (i + offset) * g.h));
    };
    const double fs = flux_shift(cd.scheme);
    lookup(cd.Lambda, 0.0, out.Lambda, nodes, 0.0);
    lookup(cd.LambdaTilde, 0.0, out.LambdaTilde, nodes, 0.0);
    lookup(cd.g_flux, fs, out.g_mid, g.N, 0.5);
    lookup(cd.gtilde, fs, out.gtilde_mid, g.N, 0.5);
    std::vector<CMat> blt;
    lookup(cd.bLambdaTilde, fs, blt, g.N, 0.5);
    out.gbLt_mid.resize(g.N);
    for (int i = 0; i < g.N; ++i) out.gbLt_mid[i] = out.g_mid[i] * blt[i];
    return out;
}

SpMat node_to_midpoint(int nodes, int comps) {
    std::vector<Triplet> t;
    for (int i = 0; i + 1 < nodes; ++i) {
        t.emplace_back(i, i, 0.5);
        t.emplace_back(i, i + 1, 0.5);
    }
    SpMat s(nodes - 1, nodes);
    s.setFromTriplets(t.begin(), t.end());
    return kron_block(s, CMat::Identity(comps, comps));
}

SpMat corrector_KD(const CellData& cd, const CorrectorFields& f, const DomainGrid& g) {
    const int n = cd.n(), m = cd.m();
    const SpMat P = extension_PO(g, n);
    const SpMat bD = kron_block(centered_D(g.ext_nodes(), g.h, 1), cd.b[0]);
    SpMat K = block_diagonal(f.Lambda) * (steklov_nodes(g, m) * (bD * P));
    K += block_diagonal(f.LambdaTilde) * (steklov_nodes(g, n) * P);
    K.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != 0.0; });
    return K;
}

SpMat corrector_KD0(const CellData& cd, const CorrectorFields& f, const DomainGrid& g) {
    const SpMat bD = kron_block(centered_D(g.full_nodes(), g.h, 1), cd.b[0]);
    SpMat K = block_diagonal(f.Lambda) * bD + block_diagonal(f.LambdaTilde);
    K.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != 0.0; });
    return K;
}

SpMat flux_true(const CellData& cd, const CorrectorFields& f, const DomainGrid& g) {
    const SpMat bD = kron_block(forward_D(g.full_nodes(), g.h, 1), cd.b[0]);
    return midpoint_to_node(g.full_nodes(), cd.m()) * (block_diagonal(f.g_mid) * bD);
}

SpMat flux_approx(const CellData& cd, const CorrectorFields& f, const DomainGrid& g) {
    const int n = cd.n(), m = cd.m();
    const SpMat P = extension_PO(g, n);
    const SpMat bD = kron_block(forward_D(g.ext_nodes(), g.h, 1), cd.b[0]);
    SpMat mid = block_diagonal(f.gtilde_mid) * (steklov_midpoints(g, m) * (bD * P));
    mid += block_diagonal(f.gbLt_mid) * (steklov_midpoints(g, n) * (node_to_midpoint(g.ext_nodes(), n) * P));
    SpMat out = midpoint_to_node(g.full_nodes(), m) * mid;
    out.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != 0.0; });
    return out;
}

SpMat flux_approx_plain(const CellData& cd, const CorrectorFields& f, const DomainGrid& g) {
    const int n = cd.n(), m = cd.m();
    const SpMat bD = kron_block(forward_D(g.full_nodes(), g.h, 1), cd.b[0]);
    SpMat mid = block_diagonal(f.gtilde_mid) * bD;
    mid += block_diagonal(f.gbLt_mid) * node_to_midpoint(g.full_nodes(), n);
    SpMat out = midpoint_to_node(g.full_nodes(), m) * mid;
    out.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != 0.0; });
    return out;
}

InteriorNorms interior_norm_pack(const LinearMap& T, const DomainGrid& g, double delta0, int comps,
                                 const LanczosOptions& opts) {
    NormTarget t;
    t.comps = comps;
    t.subdomain = std::make_pair(delta0, g.length - delta0);
    InteriorNorms out;
    t.kind = NormKind::L2;
    out.l2 = operator_norm(T, g, t, opts);
    t.kind = NormKind::H1;
    out.h1 = operator_norm(T, g, t, opts);
    return out;
}

void write_bundle_csv(const std::string& path, const DomainGrid& g, const CVec& u_eps, const CVec& u0,
                      const CVec& v_eps, const CVec& p_eps, const CVec& flux, int n, int m,
                      const CVec* u_eps_contour) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_validation("InvalidArgument", "cannot open " + path);
    out << "x,u_eps_re,u_eps_im,u0_re,u0_im,v_eps_re,v_eps_im,p_eps_re,p_eps_im,flux_approx_re,flux_approx_im";
    if (u_eps_contour) out << ",u_eps_contour_re,u_eps_contour_im";
    out << '\n';
    char buf[64];
    for (int i = 0; i <= g.N; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", g.x(i));
        out << buf;
        std::vector<cplx> vals{u_eps(i * n), u0(i * n), v_eps(i * n), p_eps(i * m), flux(i * m)};
        if (u_eps_contour) vals.push_back((*u_eps_contour)(i * n));
        for (const cplx& v : vals) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", v.real(), v.imag());
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace homlab
