#pragma once

#include "homlab/cell_problems.hpp"
#include "homlab/linalg.hpp"

#include <optional>

namespace homlab {

/// Uniform grid on O = (0, length) with h = eps / n_per. Nodes x_i = i h, i = 0..N.
/// Unknown vectors interleave components: index = node * comps + component.
/// "interior" layouts hold nodes 1..N-1, "full" layouts 0..N, "ext" layouts the
/// extension box nodes -M..N+M.
struct DomainGrid {
    double length = 1.0;
    double eps = 0.25;
    int n_per = 16;
    int N = 64;
    double h = 1.0 / 64;
    int margin = 21;  // M, extension nodes beyond each end

    double x(int i) const { return i * h; }
    double diam() const { return length; }
    int interior_nodes() const { return N - 1; }
    int full_nodes() const { return N + 1; }
    int ext_nodes() const { return N + 1 + 2 * margin; }
};

/// Requires length / eps integral, n_per even and >= 8.
DomainGrid make_domain_grid(double length, double eps, int n_per);

/// Cell-coordinate sample of a coefficient at physical point x.
inline std::vector<double> cell_point(const DomainGrid& g, double x) { return {x / g.eps}; }

/// scalar_op (x) block with interleaved component ordering.
SpMat kron_block(const SpMat& scalar_op, const CMat& block);
SpMat block_diagonal(const std::vector<CMat>& blocks);
SpMat identity_sparse(Eigen::Index n);

/// full <- interior (zero boundary values).
SpMat embed_interior(const DomainGrid& g, int comps);
SpMat restrict_to_interior(const DomainGrid& g, int comps);

struct OperatorParts {
    SpMat principal;    // A_{D,eps}
    SpMat first_order;  // sum_j (a_j D_j + D_j a_j^*)
    SpMat Q;
    SpMat Q0;
};

/// Conservative finite differences with Dirichlet rows eliminated (interior layout).
OperatorParts assemble_parts(const CoefficientSet& c, const DomainGrid& g);

/// B_{D,eps} = A + first order + Q + lambda Q0. Throws NotPositiveDefinite.
SpMat assemble_Beps(const CoefficientSet& c, const DomainGrid& g, double lambda);
SpMat assemble_Q0(const CoefficientSet& c, const DomainGrid& g);
/// Block-diagonal Q0^{-1/2} at interior nodes.
SpMat sandwich_f(const CoefficientSet& c, const DomainGrid& g);

/// D^* gcheck D + eps^{-2} vcheck + eps^{-1} vhat + Vcheck + lambda (scalar, interior layout).
SpMat assemble_original(const OriginalForm& o, const DomainGrid& g, double lambda);
/// Diagonal of omega(x / eps) at interior nodes.
SpMat omega_diagonal(const OriginalForm& o, const DomainGrid& g);

/// Constant-coefficient effective operator on the same grid.
SpMat assemble_B0(const CellData& cd, const DomainGrid& g);
SpMat assemble_Q0bar(const CellData& cd, const DomainGrid& g);

/// Smallest lambda >= 0 with B - A/4 >= 0 on the grid, times 1.1.
double calibrate_lambda(const CoefficientSet& c, const DomainGrid& g);

/// Extension onto the box (-M h, length + M h): Hestenes reflection matching two
/// derivatives, times a smooth cutoff that equals 1 on O and vanishes at the box edge.
SpMat extension_PO(const DomainGrid& g, int comps);
/// ext -> full restriction; restriction_RO * extension_PO = I.
SpMat restriction_RO(const DomainGrid& g, int comps);

/// Steklov smoothing as a box filter of width eps with half-weighted endpoints.
/// Nodes: ext -> full. Midpoints: ext midpoints -> full midpoints.
SpMat steklov_nodes(const DomainGrid& g, int comps);
SpMat steklov_midpoints(const DomainGrid& g, int comps);
/// Box filter on a plain vector of samples with step h; output covers indices with a full window.
RVec steklov_smooth(const RVec& u, double h, double eps);

/// Centered -i d/dx with one-sided end stencils on `nodes` points.
SpMat centered_D(int nodes, double h, int comps);
/// Forward -i d/dx from `nodes` points to nodes - 1 midpoints.
SpMat forward_D(int nodes, double h, int comps);
/// Midpoints -> nodes by averaging neighbours; end nodes take the adjacent midpoint.
SpMat midpoint_to_node(int nodes, int comps);

enum class NormKind { L2, H1 };

struct NormTarget {
    NormKind kind = NormKind::L2;
    int comps = 1;
    std::optional<std::pair<double, double>> subdomain;  // O' = (lo, hi)
};

/// Gram matrix of the target norm on full-layout vectors.
SpMat target_weight(const DomainGrid& g, const NormTarget& t);
double vector_norm(const CVec& v, const DomainGrid& g, const NormTarget& t);

/// Norm of T from L2 (weight h per entry) to the target norm: top singular value of
/// W_t^{1/2} T W_s^{-1/2}, by Lanczos on the normal operator.
double operator_norm(const LinearMap& T, const DomainGrid& g, const NormTarget& t, const LanczosOptions& opts = {});
/// Same quantity through a dense eigendecomposition.
double operator_norm_dense(const CMat& T, const DomainGrid& g, const NormTarget& t);

/// "rows cols nnz" header then "i j re im" lines.
void write_coo(const std::string& path, const SpMat& m);

}  // namespace homlab
