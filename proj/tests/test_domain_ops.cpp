#include "homlab/domain_ops.hpp"

#include <doctest.h>

#include <random>

using namespace homlab;

namespace {

double smallest_eig(const SpMat& B) { return hermitian_eig(CMat(B)).values(0); }

CoefficientSet with_lambda(CoefficientSet c, const DomainGrid& g) {
    if (!c.lambda) c.lambda = calibrate_lambda(c, g);
    return c;
}

CoefficientSet fd_preset(const std::string& name) {
    PresetOptions po;
    po.scheme = CellScheme::FiniteDifference;
    po.cell_points = 16;
    return make_preset(name, po);
}

CVec smooth_random(int size, double h, std::uint64_t seed, int modes, double x0 = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<std::pair<double, double>> c;
    for (int k = 0; k < modes; ++k) c.emplace_back(nd(rng), nd(rng));
    CVec u(size);
    for (int i = 0; i < size; ++i) {
        const double x = x0 + i * h;
        cplx s = 0.0;
        for (int k = 0; k < modes; ++k) s += c[k].first * std::sin((k + 1) * kPi * x) + kI * c[k].second * std::cos((k + 1) * kPi * x);
        u(i) = s;
    }
    return u;
}

}  // namespace

TEST_CASE("domain grid validation") {
    CHECK_THROWS_AS(make_domain_grid(1.0, 0.3, 16), Error);
    CHECK_THROWS_AS(make_domain_grid(1.0, 0.25, 2), Error);
    CHECK_THROWS_AS(make_domain_grid(1.0, 0.25, 15), Error);
    const DomainGrid g = make_domain_grid(1.0, 1.0 / 16, 16);
    CHECK(g.N == 256);
    CHECK(g.h == doctest::Approx(1.0 / 256));
}

TEST_CASE("Dirichlet Laplacian spectrum") {
    const DomainGrid g = make_domain_grid(1.0, 1.0 / 16, 16);
    const SpMat B = assemble_Beps(make_preset("constant"), g, 0.0);
    const RVec ev = hermitian_eig(CMat(B)).values;
    CHECK(ev(0) == doctest::Approx(kPi * kPi).epsilon(0.01));
    CHECK(ev(1) == doctest::Approx(4 * kPi * kPi).epsilon(0.01));
}

TEST_CASE("sine coefficient: lowest eigenvalue close to the effective one") {
    const DomainGrid g = make_domain_grid(1.0, 1.0 / 32, 16);
    CHECK(g.h == doctest::Approx(1.0 / 512));
    const SpMat B = assemble_Beps(make_preset("sine_g"), g, 0.0);
    CHECK(smallest_eig(B) == doctest::Approx(0.5 * kPi * kPi).epsilon(0.02));
}

TEST_CASE("operators are Hermitian and coercive after calibration") {
    const DomainGrid g = make_domain_grid(1.0, 0.25, 16);
    for (const char* name : {"constant", "sine_g", "zero_corrector", "magnetic_sine", "strong_singular_sine", "random_positive"}) {
        CAPTURE(name);
        const CoefficientSet c = with_lambda(fd_preset(name), g);
        const SpMat B = assemble_Beps(c, g, *c.lambda);
        CHECK(SpMat(B - SpMat(B.adjoint())).norm() <= 1e-12 * B.norm());
        const CellData cd = assemble_cell_data(c, PeriodicGrid(Lattice::unit(1), {16}), CellScheme::FiniteDifference, 1.0);
        const SpMat f = sandwich_f(c, g);
        CHECK(smallest_eig(SpMat(f.adjoint() * B * f)) >= 0.9 * cd.c_flat);
        CHECK(smallest_eig(B) >= 0.9 * cd.c_star / (g.diam() * g.diam()));
        const SpMat B0 = assemble_B0(cd, g);
        CHECK(SpMat(B0 - SpMat(B0.adjoint())).norm() <= 1e-12 * B0.norm());
        CHECK(smallest_eig(B0) > 0.0);
    }
}

TEST_CASE("calibration against a constant negative potential") {
    const DomainGrid g = make_domain_grid(1.0, 1.0 / 16, 16);
    CoefficientSet c = make_preset("constant");
    c.Q = constant_function(CMat::Constant(1, 1, -20.0));
    CHECK_THROWS_AS(assemble_Beps(c, g, 0.0), Error);
    const double first = smallest_eig(assemble_Beps(make_preset("constant"), g, 0.0));
    const double lambda = calibrate_lambda(c, g);
    CHECK(lambda == doctest::Approx(1.1 * (20.0 - 0.75 * first)).epsilon(1e-6));
    CHECK(smallest_eig(assemble_Beps(c, g, lambda)) > 0.0);
    CHECK(calibrate_lambda(make_preset("sine_g"), g) == 0.0);
}

TEST_CASE("extension and restriction") {
    const DomainGrid g = make_domain_grid(1.0, 0.25, 16);
    const SpMat P = extension_PO(g, 1), R = restriction_RO(g, 1);
    CHECK(SpMat(R * P - identity_sparse(g.full_nodes())).norm() < 1e-14);
    // The reflection reproduces quadratics where the cutoff is still 1.
    CVec u(g.full_nodes());
    for (int i = 0; i <= g.N; ++i) {
        const double x = g.x(i);
        u(i) = 1.0 + x - 3.0 * x * x;
    }
    const CVec e = P * u;
    const double x = -g.h, y = 1.0 + g.h;
    CHECK(std::abs(e(g.margin - 1) - (1.0 + x - 3.0 * x * x)) < 1e-6);
    CHECK(std::abs(e(g.margin + g.N + 1) - (1.0 + y - 3.0 * y * y)) < 1e-6);
    CHECK(std::abs(e(0)) < 1e-12);
    CHECK(std::abs(e(g.ext_nodes() - 1)) < 1e-12);
}

TEST_CASE("Steklov smoothing: contraction and first-order bound") {
    const DomainGrid g = make_domain_grid(1.0, 0.125, 16);
    const SpMat S = steklov_nodes(g, 1);
    const SpMat R = restriction_RO(g, 1);
    const RVec sv = Eigen::JacobiSVD<CMat>(CMat(S)).singularValues();
    CHECK(sv(0) <= 1.0 + 1e-12);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const CVec u = smooth_random(g.ext_nodes(), g.h, seed, 12, -g.margin * g.h);
        const CVec diff = S * u - R * u;
        CVec du(g.ext_nodes() - 1);
        for (int i = 0; i + 1 < g.ext_nodes(); ++i) du(i) = (u(i + 1) - u(i)) / g.h;
        const double lhs = std::sqrt(g.h) * diff.norm();
        const double rhs = g.eps * 0.5 * std::sqrt(g.h) * du.norm();
        CHECK(lhs <= rhs);
        CHECK(std::sqrt(g.h) * (S * u).norm() <= std::sqrt(g.h) * u.norm());
    }
    // Box filter of a linear function is exact; of a constant is the constant.
    RVec lin(40);
    for (int i = 0; i < 40; ++i) lin(i) = 2.0 + 0.5 * i;
    const RVec sm = steklov_smooth(lin, 0.1, 0.4);
    for (int i = 0; i < sm.size(); ++i) CHECK(sm(i) == doctest::Approx(lin(i + 2)));
    CHECK_THROWS_AS(steklov_smooth(lin, 0.1, 0.3), Error);
}

TEST_CASE("operator norm: Lanczos agrees with the dense evaluation") {
    const DomainGrid g = make_domain_grid(1.0, 0.25, 16);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    CMat T(g.full_nodes(), g.full_nodes());
    for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = cplx(nd(rng), nd(rng));
    NormTarget l2, h1, sub;
    h1.kind = NormKind::H1;
    sub.kind = NormKind::H1;
    sub.subdomain = std::make_pair(0.25, 0.75);
    for (const auto& t : {l2, h1, sub}) {
        const double a = operator_norm(LinearMap::dense(T), g, t, LanczosOptions{1e-10, 300, 1});
        const double b = operator_norm_dense(T, g, t);
        CHECK(a == doctest::Approx(b).epsilon(1e-6));
    }
    // Scaling oracle: T = c I on full nodes has L2 norm c.
    const CMat I3 = 3.0 * CMat::Identity(g.full_nodes(), g.full_nodes());
    CHECK(operator_norm(LinearMap::dense(I3), g, l2) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("vector norms") {
    const DomainGrid g = make_domain_grid(1.0, 1.0 / 16, 16);
    CVec u(g.full_nodes());
    for (int i = 0; i <= g.N; ++i) u(i) = std::sin(kPi * g.x(i));
    NormTarget l2, h1;
    h1.kind = NormKind::H1;
    CHECK(vector_norm(u, g, l2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-4));
    CHECK(vector_norm(u, g, h1) == doctest::Approx(std::sqrt(0.5 * (1.0 + kPi * kPi))).epsilon(1e-4));
}
