#include "homlab/domain_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <tuple>

namespace homlab {

DomainGrid make_domain_grid(double length, double eps, int n_per) {
    if (!(length > 0.0) || !(eps > 0.0)) fail_validation("InvalidArgument", "length and eps must be positive");
    if (n_per < 8 || n_per % 2 != 0) fail_validation("InvalidArgument", "n_per must be even and >= 8");
    const double cells = length / eps;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells) || rounded < 1.0)
        fail_validation("IndivisibleEpsilon", "length / eps must be an integer");
    DomainGrid g;
    g.length = length;
    g.eps = eps;
    g.n_per = n_per;
    g.N = static_cast<int>(rounded) * n_per;
    g.h = length / g.N;
    g.margin = g.N / 3;
    return g;
}

SpMat kron_block(const SpMat& s, const CMat& block) {
    const auto br = block.rows(), bc = block.cols();
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(s.nonZeros() * br * bc));
    for (int k = 0; k < s.outerSize(); ++k)
        for (SpMat::InnerIterator it(s, k); it; ++it)
            for (Eigen::Index p = 0; p < br; ++p)
                for (Eigen::Index q = 0; q < bc; ++q)
                    if (block(p, q) != 0.0) t.emplace_back(it.row() * br + p, it.col() * bc + q, it.value() * block(p, q));
    SpMat out(s.rows() * br, s.cols() * bc);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

SpMat block_diagonal(const std::vector<CMat>& blocks) {
    Eigen::Index rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    std::vector<Triplet> t;
    Eigen::Index r0 = 0, c0 = 0;
    for (const auto& b : blocks) {
        for (Eigen::Index p = 0; p < b.rows(); ++p)
            for (Eigen::Index q = 0; q < b.cols(); ++q)
                if (b(p, q) != 0.0) t.emplace_back(r0 + p, c0 + q, b(p, q));
        r0 += b.rows();
        c0 += b.cols();
    }
    SpMat out(rows, cols);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

SpMat identity_sparse(Eigen::Index n) {
    SpMat out(n, n);
    out.setIdentity();
    return out;
}

SpMat embed_interior(const DomainGrid& g, int comps) {
    std::vector<Triplet> t;
    for (int i = 1; i < g.N; ++i)
        for (int c = 0; c < comps; ++c) t.emplace_back(i * comps + c, (i - 1) * comps + c, 1.0);
    SpMat out(g.full_nodes() * comps, g.interior_nodes() * comps);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

SpMat restrict_to_interior(const DomainGrid& g, int comps) { return SpMat(embed_interior(g, comps).transpose()); }

namespace {

void require_1d(const CoefficientSet& c) {
    if (c.d() != 1) fail_validation("InvalidArgument", "domain operators are implemented for d = 1");
}

void add_block(std::vector<Triplet>& t, int bi, int bj, const CMat& blk) {
    for (Eigen::Index p = 0; p < blk.rows(); ++p)
        for (Eigen::Index q = 0; q < blk.cols(); ++q)
            if (blk(p, q) != 0.0) t.emplace_back(bi * blk.rows() + p, bj * blk.cols() + q, blk(p, q));
}

SpMat from_triplets(const std::vector<Triplet>& t, Eigen::Index rows, Eigen::Index cols) {
    SpMat out(rows, cols);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

void require_positive_definite(const SpMat& b, const char* what) {
    Eigen::SimplicialLLT<SpMat> llt(b);
    if (llt.info() != Eigen::Success) fail_solver("NotPositiveDefinite", std::string(what) + " is not positive definite");
}

}  // namespace

OperatorParts assemble_parts(const CoefficientSet& c, const DomainGrid& g) {
    require_1d(c);
    const int n = c.n();
    const int NI = g.interior_nodes();
    const Eigen::Index dim = static_cast<Eigen::Index>(NI) * n;
    const CMat& b1 = c.symbol.b[0];
    const double inv_h2 = 1.0 / (g.h * g.h);

    std::vector<Triplet> ta;
    for (int k = 0; k < g.N; ++k) {
        const CMat G = (b1.adjoint() * c.g(cell_point(g, (k + 0.5) * g.h)) * b1) * inv_h2;
        const int i0 = k, i1 = k + 1;  // node indices
        const bool in0 = i0 >= 1 && i0 <= NI, in1 = i1 >= 1 && i1 <= NI;
        if (in0) add_block(ta, i0 - 1, i0 - 1, G);
        if (in1) add_block(ta, i1 - 1, i1 - 1, G);
        if (in0 && in1) {
            add_block(ta, i0 - 1, i1 - 1, -G);
            add_block(ta, i1 - 1, i0 - 1, -G);
        }
    }

    std::vector<Triplet> tf, tq, tq0;
    const cplx fwd = -kI / (2.0 * g.h);
    std::vector<CMat> a_nodes;
    if (c.has_first_order()) {
        a_nodes.resize(g.full_nodes());
        for (int i = 0; i <= g.N; ++i) a_nodes[i] = c.a[0](cell_point(g, g.x(i)));
    }
    for (int i = 1; i <= NI; ++i) {
        const auto y = cell_point(g, g.x(i));
        add_block(tq, i - 1, i - 1, c.singular_potential ? CMat(c.Q(y) + c.singular_potential(y) / g.eps) : c.Q(y));
        add_block(tq0, i - 1, i - 1, c.Q0(y));
        if (!c.has_first_order()) continue;
        // a D_c + D_c a^*
        if (i + 1 <= NI) {
            add_block(tf, i - 1, i, fwd * a_nodes[i]);
            add_block(tf, i - 1, i, fwd * a_nodes[i + 1].adjoint());
        }
        if (i - 1 >= 1) {
            add_block(tf, i - 1, i - 2, -fwd * a_nodes[i]);
            add_block(tf, i - 1, i - 2, -fwd * a_nodes[i - 1].adjoint());
        }
    }
    OperatorParts out;
    out.principal = from_triplets(ta, dim, dim);
    out.first_order = from_triplets(tf, dim, dim);
    out.Q = from_triplets(tq, dim, dim);
    out.Q0 = from_triplets(tq0, dim, dim);
    return out;
}

SpMat assemble_Beps(const CoefficientSet& c, const DomainGrid& g, double lambda) {
    const auto p = assemble_parts(c, g);
    SpMat b = p.principal + p.first_order + p.Q + lambda * p.Q0;
    b.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != 0.0; });
    require_positive_definite(b, "B_eps");
    return b;
}

SpMat assemble_Q0(const CoefficientSet& c, const DomainGrid& g) { return assemble_parts(c, g).Q0; }

SpMat sandwich_f(const CoefficientSet& c, const DomainGrid& g) {
    std::vector<CMat> blocks;
    for (int i = 1; i < g.N; ++i) blocks.push_back(inverse_sqrt_hpd(c.Q0(cell_point(g, g.x(i)))));
    return block_diagonal(blocks);
}

SpMat assemble_original(const OriginalForm& o, const DomainGrid& g, double lambda) {
    const int NI = g.interior_nodes();
    const double inv_h2 = 1.0 / (g.h * g.h);
    std::vector<Triplet> t;
    for (int k = 0; k < g.N; ++k) {
        const double w = o.gcheck(cell_point(g, (k + 0.5) * g.h))(0, 0).real() * inv_h2;
        if (k >= 1) t.emplace_back(k - 1, k - 1, w);
        if (k + 1 <= NI) t.emplace_back(k, k, w);
        if (k >= 1 && k + 1 <= NI) {
            t.emplace_back(k - 1, k, -w);
            t.emplace_back(k, k - 1, -w);
        }
    }
    for (int i = 1; i <= NI; ++i) {
        const auto y = cell_point(g, g.x(i));
        const double pot = o.vcheck(y)(0, 0).real() / (g.eps * g.eps) + o.vhat(y)(0, 0).real() / g.eps +
                           o.Vcheck(y)(0, 0).real() + lambda;
        t.emplace_back(i - 1, i - 1, pot);
    }
    SpMat b = from_triplets(t, NI, NI);
    require_positive_definite(b, "original operator");
    return b;
}

SpMat omega_diagonal(const OriginalForm& o, const DomainGrid& g) {
    std::vector<CMat> blocks;
    for (int i = 1; i < g.N; ++i) blocks.push_back(o.omega(cell_point(g, g.x(i))));
    return block_diagonal(blocks);
}

namespace {

CoefficientSet effective_coefficients(const CellData& cd) {
    CoefficientSet e;
    e.name = cd.name + "_effective";
    e.lattice = Lattice::unit(1);
    e.symbol.b = cd.b;
    e.g = constant_function(cd.g0);
    const CMat& b1 = cd.b[0];
    CMat C = -(b1.adjoint() * cd.V + cd.V.adjoint() * b1);
    for (const auto& a : cd.abar) C += a + a.adjoint();
    if (C.norm() > 0.0) e.a = {constant_function(0.5 * C)};
    e.Q = constant_function(cd.Qbar - cd.W);
    e.Q0 = constant_function(cd.Q0bar);
    return e;
}

}  // namespace

SpMat assemble_B0(const CellData& cd, const DomainGrid& g) {
    const auto p = assemble_parts(effective_coefficients(cd), g);
    SpMat b = p.principal + p.first_order + p.Q + cd.lambda * p.Q0;
    b.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != 0.0; });
    require_positive_definite(b, "B0");
    return b;
}

SpMat assemble_Q0bar(const CellData& cd, const DomainGrid& g) {
    return kron_block(identity_sparse(g.interior_nodes()), cd.Q0bar);
}

double calibrate_lambda(const CoefficientSet& c, const DomainGrid& g) {
    const auto p = assemble_parts(c, g);
    const SpMat f = sandwich_f(c, g);
    SpMat x = 0.75 * p.principal + p.first_order + p.Q;
    SpMat fx = f.adjoint() * x * f;
    fx = SpMat(0.5 * (fx + SpMat(fx.adjoint())));
    const double mu = smallest_eigenvalue_banded(fx);
    const double needed = std::max(0.0, -mu);
    double scale = 1.0;
    for (int i = 0; i <= g.N; ++i) {
        const auto y = cell_point(g, g.x(i));
        scale = std::max(scale, c.Q(y).norm());
        if (c.has_first_order()) scale = std::max(scale, c.a[0](y).squaredNorm());
    }
    const double lambda = 1.1 * needed;
    if (lambda > 1e6 * scale) fail_solver("CalibrationDiverged", "lambda exceeds 1e6 times the coefficient scale");
    return lambda;
}

namespace {

double smooth_step(double t) {
    auto psi = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
    const double a = psi(t), b = psi(1.0 - t);
    return a / (a + b);
}

}  // namespace

SpMat extension_PO(const DomainGrid& g, int comps) {
    const int M = g.margin;
    std::vector<Triplet> t;
    for (int i = 0; i <= g.N; ++i) t.emplace_back(i + M, i, 1.0);
    const double width = M * g.h;
    for (int s = 1; s <= M; ++s) {
        const double chi = smooth_step(1.0 - s * g.h / width);
        if (chi == 0.0) continue;
        const int sl[3] = {s, 2 * s, 3 * s};
        const double w[3] = {6.0, -8.0, 3.0};
        for (int r = 0; r < 3; ++r) {
            t.emplace_back(M - s, sl[r], chi * w[r]);
            t.emplace_back(M + g.N + s, g.N - sl[r], chi * w[r]);
        }
    }
    SpMat scalar = from_triplets(t, g.ext_nodes(), g.full_nodes());
    return kron_block(scalar, CMat::Identity(comps, comps));
}

SpMat restriction_RO(const DomainGrid& g, int comps) {
    std::vector<Triplet> t;
    for (int i = 0; i <= g.N; ++i) t.emplace_back(i, i + g.margin, 1.0);
    return kron_block(from_triplets(t, g.full_nodes(), g.ext_nodes()), CMat::Identity(comps, comps));
}

namespace {

SpMat box_filter(int out_count, int in_count, int offset, int width) {
    std::vector<Triplet> t;
    const int half = width / 2;
    const double w = 1.0 / width;
    for (int i = 0; i < out_count; ++i)
        for (int k = -half; k <= half; ++k) {
            const double wk = (k == -half || k == half) ? 0.5 * w : w;
            t.emplace_back(i, i + offset + k, wk);
        }
    return from_triplets(t, out_count, in_count);
}

void require_window(const DomainGrid& g) {
    if (g.n_per / 2 + 1 > g.margin)
        fail_validation("WindowExceedsMargin", "Steklov window exceeds the extension margin");
}

}  // namespace

SpMat steklov_nodes(const DomainGrid& g, int comps) {
    require_window(g);
    return kron_block(box_filter(g.full_nodes(), g.ext_nodes(), g.margin, g.n_per), CMat::Identity(comps, comps));
}

SpMat steklov_midpoints(const DomainGrid& g, int comps) {
    require_window(g);
    return kron_block(box_filter(g.N, g.ext_nodes() - 1, g.margin, g.n_per), CMat::Identity(comps, comps));
}

RVec steklov_smooth(const RVec& u, double h, double eps) {
    const double ratio = eps / h;
    const int width = static_cast<int>(std::lround(ratio));
    if (std::abs(ratio - width) > 1e-9 * ratio || width < 2 || width % 2 != 0)
        fail_validation("InvalidArgument", "eps / h must be an even integer");
    if (u.size() <= width) fail_validation("WindowExceedsMargin", "sample range shorter than the window");
    RVec csum(u.size() + 1);
    csum(0) = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) csum(i + 1) = csum(i) + u(i);
    RVec out(u.size() - width);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double full = csum(i + width + 1) - csum(i);
        out(i) = (full - 0.5 * u(i) - 0.5 * u(i + width)) / width;
    }
    return out;
}

SpMat centered_D(int nodes, double h, int comps) {
    std::vector<Triplet> t;
    const cplx c = -kI / (2.0 * h);
    for (int i = 1; i + 1 < nodes; ++i) {
        t.emplace_back(i, i + 1, c);
        t.emplace_back(i, i - 1, -c);
    }
    t.emplace_back(0, 1, -kI / h);
    t.emplace_back(0, 0, kI / h);
    t.emplace_back(nodes - 1, nodes - 1, -kI / h);
    t.emplace_back(nodes - 1, nodes - 2, kI / h);
    return kron_block(from_triplets(t, nodes, nodes), CMat::Identity(comps, comps));
}

SpMat forward_D(int nodes, double h, int comps) {
    std::vector<Triplet> t;
    for (int i = 0; i + 1 < nodes; ++i) {
        t.emplace_back(i, i + 1, -kI / h);
        t.emplace_back(i, i, kI / h);
    }
    return kron_block(from_triplets(t, nodes - 1, nodes), CMat::Identity(comps, comps));
}

SpMat midpoint_to_node(int nodes, int comps) {
    std::vector<Triplet> t;
    t.emplace_back(0, 0, 1.0);
    for (int i = 1; i + 1 < nodes; ++i) {
        t.emplace_back(i, i - 1, 0.5);
        t.emplace_back(i, i, 0.5);
    }
    t.emplace_back(nodes - 1, nodes - 2, 1.0);
    return kron_block(from_triplets(t, nodes, nodes - 1), CMat::Identity(comps, comps));
}

SpMat target_weight(const DomainGrid& g, const NormTarget& t) {
    const int nodes = g.full_nodes();
    std::vector<double> mask(nodes, 1.0);
    if (t.subdomain) {
        int count = 0;
        for (int i = 0; i < nodes; ++i) {
            const double x = g.x(i);
            mask[i] = (x > t.subdomain->first && x < t.subdomain->second) ? 1.0 : 0.0;
            count += mask[i] > 0.0;
        }
        if (count == 0) fail_validation("EmptySubdomain", "no grid nodes inside the subdomain");
    }
    std::vector<Triplet> tr;
    for (int i = 0; i < nodes; ++i)
        if (mask[i] > 0.0) tr.emplace_back(i, i, g.h);
    if (t.kind == NormKind::H1) {
        const double w = 1.0 / g.h;
        for (int k = 0; k + 1 < nodes; ++k) {
            if (mask[k] == 0.0 || mask[k + 1] == 0.0) continue;
            tr.emplace_back(k, k, w);
            tr.emplace_back(k + 1, k + 1, w);
            tr.emplace_back(k, k + 1, -w);
            tr.emplace_back(k + 1, k, -w);
        }
    }
    return kron_block(from_triplets(tr, nodes, nodes), CMat::Identity(t.comps, t.comps));
}

double vector_norm(const CVec& v, const DomainGrid& g, const NormTarget& t) {
    const SpMat w = target_weight(g, t);
    return std::sqrt(std::max(0.0, std::real(v.dot(w * v))));
}

double operator_norm(const LinearMap& T, const DomainGrid& g, const NormTarget& t, const LanczosOptions& opts) {
    const SpMat w = target_weight(g, t);
    if (w.rows() != T.rows) fail_validation("InvalidArgument", "operator rows do not match the target layout");
    const double inv_h = 1.0 / g.h;
    auto normal = [&](const CVec& x) -> CVec { return inv_h * T.adjoint(w * T.apply(x)); };
    return std::sqrt(std::max(0.0, lanczos_max_eigenvalue(normal, T.cols, opts)));
}

double operator_norm_dense(const CMat& T, const DomainGrid& g, const NormTarget& t) {
    const SpMat w = target_weight(g, t);
    const CMat normal = hermitian_part(T.adjoint() * (w * T) / g.h);
    Eigen::SelfAdjointEigenSolver<CMat> es(normal, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

void write_coo(const std::string& path, const SpMat& m) {
    std::vector<std::tuple<Eigen::Index, Eigen::Index, cplx>> e;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) e.emplace_back(it.row(), it.col(), it.value());
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_validation("InvalidArgument", "cannot open " + path);
    out << m.rows() << ' ' << m.cols() << ' ' << e.size() << '\n' << std::setprecision(17);
    for (const auto& [i, j, v] : e) out << i << ' ' << j << ' ' << v.real() << ' ' << v.imag() << '\n';
}

}  // namespace homlab
