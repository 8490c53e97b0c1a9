#pragma once

#include "homlab/evolution.hpp"

namespace homlab {

/// Cell fields evaluated at x / eps on the domain grid.
struct CorrectorFields {
    std::vector<CMat> Lambda;        // full nodes, n x m
    std::vector<CMat> LambdaTilde;   // full nodes, n x n
    std::vector<CMat> g_mid;         // midpoints, m x m
    std::vector<CMat> gtilde_mid;    // midpoints, m x m
    std::vector<CMat> gbLt_mid;      // midpoints, g b(D) LambdaTilde, m x n
};

/// Exact lookup when the cell grid is the finite-difference grid with n_per points;
/// trigonometric interpolation otherwise.
CorrectorFields sample_corrector_fields(const CellData& cd, const DomainGrid& g);

/// Smoothed corrector: R_O (Lambda^eps S_eps b(D) + LambdaTilde^eps S_eps) P_O, full -> full.
SpMat corrector_KD(const CellData& cd, const CorrectorFields& f, const DomainGrid& g);
/// Plain corrector: Lambda^eps b(D) + LambdaTilde^eps with one-sided end stencils.
SpMat corrector_KD0(const CellData& cd, const CorrectorFields& f, const DomainGrid& g);

/// g^eps b(D) u averaged from the flux points back to the nodes, full(n) -> full(m).
SpMat flux_true(const CellData& cd, const CorrectorFields& f, const DomainGrid& g);
/// gtilde^eps S_eps b(D) P_O u + g^eps (b(D) LambdaTilde)^eps S_eps P_O u, full(n) -> full(m).
SpMat flux_approx(const CellData& cd, const CorrectorFields& f, const DomainGrid& g);
/// Same without S_eps and P_O.
SpMat flux_approx_plain(const CellData& cd, const CorrectorFields& f, const DomainGrid& g);

/// Nodes -> midpoints by averaging neighbours.
SpMat node_to_midpoint(int nodes, int comps);

struct InteriorNorms {
    double l2 = 0.0;
    double h1 = 0.0;
};

/// Operator norms restricted to O' = (delta0, length - delta0). Throws EmptySubdomain.
InteriorNorms interior_norm_pack(const LinearMap& T, const DomainGrid& g, double delta0, int comps,
                                 const LanczosOptions& opts = {});

/// Columns: x, u_eps, u0, v_eps, p_eps, flux_approx as re/im pairs (first component), and
/// u_eps_contour when given.
void write_bundle_csv(const std::string& path, const DomainGrid& g, const CVec& u_eps, const CVec& u0,
                      const CVec& v_eps, const CVec& p_eps, const CVec& flux, int n, int m,
                      const CVec* u_eps_contour = nullptr);

}  // namespace homlab
