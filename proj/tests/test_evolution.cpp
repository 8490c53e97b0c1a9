#include "homlab/evolution.hpp"

#include <doctest.h>

#include <random>

using namespace homlab;

namespace {

struct Setup {
    CoefficientSet c;
    DomainGrid g;
    SpMat B, Q0, f;
    Factorization F;
    double c_flat = 0.0;
};

Setup make(const std::string& name, double eps = 0.25) {
    Setup s;
    PresetOptions po;
    po.scheme = CellScheme::FiniteDifference;
    po.cell_points = 16;
    s.c = make_preset(name, po);
    s.g = make_domain_grid(1.0, eps, 16);
    const double lambda = s.c.lambda ? *s.c.lambda : calibrate_lambda(s.c, s.g);
    s.c.lambda = lambda;
    s.B = assemble_Beps(s.c, s.g, lambda);
    s.Q0 = assemble_Q0(s.c, s.g);
    s.f = sandwich_f(s.c, s.g);
    s.F = factorize(s.B, s.f);
    s.c_flat = assemble_cell_data(s.c, PeriodicGrid(Lattice::unit(1), {16}), CellScheme::FiniteDifference, 1.0).c_flat;
    return s;
}

CVec sine(const DomainGrid& g, int mode) {
    CVec u(g.interior_nodes());
    for (int i = 1; i < g.N; ++i) u(i - 1) = std::sin(mode * kPi * g.x(i));
    return u;
}

double l2(const CVec& v, const DomainGrid& g) { return std::sqrt(g.h) * v.norm(); }

}  // namespace

TEST_CASE("heat semigroup on a sine mode") {
    const Setup s = make("constant", 1.0 / 16);
    for (double t : {0.0, 0.1, 0.25, 1.0}) {
        const CVec u = semigroup_apply(s.F, t, sine(s.g, 1));
        const CVec ref = std::exp(-kPi * kPi * t) * sine(s.g, 1);
        CHECK((u - ref).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("t = 0 returns the sandwiched initial data") {
    const Setup s = make("zero_corrector");
    const CVec phi = sine(s.g, 2);
    const CVec u = semigroup_apply(s.F, 0.0, phi);
    CHECK((u - s.f * (s.f.adjoint() * phi)).norm() < 1e-12 * phi.norm());
}

TEST_CASE("factorization diagonalizes the sandwiched operator") {
    for (const char* name : {"sine_g", "magnetic_sine", "random_positive"}) {
        CAPTURE(name);
        const Setup s = make(name);
        const CMat fBf = CMat(s.f.adjoint() * s.B * s.f);
        const RVec ev = hermitian_eig(fBf).values;
        CHECK((ev - s.F.mu).cwiseAbs().maxCoeff() <= 1e-10 * ev.cwiseAbs().maxCoeff());
        CHECK(s.F.mu.minCoeff() > 0.0);
        const CMat E = semigroup_matrix(s.F, 0.3);
        CHECK((E - E.adjoint()).norm() < 1e-12 * E.norm());
    }
}

TEST_CASE("contour quadrature agrees with the eigendecomposition") {
    for (const char* name : {"sine_g", "strong_singular_sine", "magnetic_sine"}) {
        const Setup s = make(name);
        std::mt19937_64 rng(4);
        std::normal_distribution<double> nd;
        CMat rhs(s.B.rows(), 3);
        for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs.data()[i] = cplx(nd(rng), nd(rng));
        for (double t : {0.1, 1.0}) {
            CAPTURE(name);
            CAPTURE(t);
            const ContourResult cr = contour_semigroup(s.B, s.Q0, rhs, t, s.c_flat);
            const CMat ref = semigroup_matrix(s.F, t) * rhs;
            CHECK((cr.value - ref).norm() <= 1e-6 * ref.norm());
            CHECK(cr.tail_bound <= 1e-8);
        }
    }
}

TEST_CASE("exponential decay of the semigroup") {
    for (const auto& name : preset_names()) {
        if (name == "random_positive_2d") continue;
        CAPTURE(name);
        const Setup s = make(name);
        double f2 = 0.0;
        for (int i = 1; i < s.g.N; ++i) f2 = std::max(f2, inverse_sqrt_hpd(s.c.Q0(cell_point(s.g, s.g.x(i)))).squaredNorm());
        for (double t : {0.1, 0.5, 1.0, 2.0, 4.0}) {
            const double nrm = Eigen::JacobiSVD<CMat>(semigroup_matrix(s.F, t)).singularValues()(0);
            CHECK(nrm <= f2 * std::exp(-0.9 * s.c_flat * t) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("resolvent inverts B - zeta Q0") {
    const Setup s = make("magnetic_sine");
    const cplx z(-1.0, 2.0);
    const CMat R = resolvent_matrix(s.F, z);
    const CMat A = CMat(s.B) - z * CMat(s.Q0);
    CHECK((A * R - CMat::Identity(A.rows(), A.cols())).norm() < 1e-9);
}

TEST_CASE("Duhamel: zero forcing reproduces the semigroup") {
    const Setup s = make("sine_g");
    const CVec phi = sine(s.g, 1);
    const int steps = 64;
    const double dt = 1.0 / steps;
    std::vector<CVec> F(steps + 1, CVec::Zero(phi.size()));
    const auto u = duhamel_solve(s.F, phi, F, dt, {0.25, 1.0});
    CHECK((u[0] - semigroup_apply(s.F, 0.25, phi)).norm() < 1e-12 * phi.norm());
    CHECK((u[1] - semigroup_apply(s.F, 1.0, phi)).norm() < 1e-12 * phi.norm());
}

TEST_CASE("Duhamel: linearity and a closed-form mode") {
    const Setup s = make("constant", 1.0 / 16);
    const int n = static_cast<int>(s.B.rows());
    const int steps = 128;
    const double dt = 1.0 / steps;
    // Constant forcing along the first eigenvector: u(t) = (1 - e^{-mu t}) / mu v.
    const CVec v = s.F.from_modes(CVec::Unit(n, 0));
    std::vector<CVec> F(steps + 1, v);
    const auto u = duhamel_solve(s.F, CVec::Zero(n), F, dt, {0.5});
    const double mu = s.F.mu(0);
    CHECK((u[0] - (1.0 - std::exp(-mu * 0.5)) / mu * v).norm() < 1e-12 * v.norm());

    const int fine = 4096;
    const double fdt = 1.0 / fine;
    std::vector<CVec> F1(fine + 1), F2(fine + 1), F12(fine + 1);
    for (int j = 0; j <= fine; ++j) {
        F1[j] = std::cos(3.0 * j * fdt) * sine(s.g, 2);
        F2[j] = (j * fdt) * sine(s.g, 3);
        F12[j] = 2.0 * F1[j] - 0.5 * F2[j];
    }
    const CVec p1 = sine(s.g, 1), p2 = sine(s.g, 4);
    const auto a = duhamel_solve(s.F, p1, F1, fdt, {0.75});
    const auto b = duhamel_solve(s.F, p2, F2, fdt, {0.75});
    const auto c = duhamel_solve(s.F, CVec(2.0 * p1 - 0.5 * p2), F12, fdt, {0.75});
    CHECK((c[0] - (2.0 * a[0] - 0.5 * b[0])).norm() < 1e-12 * c[0].norm());
    CHECK_THROWS_AS(duhamel_solve(s.F, p1, F1, fdt, {0.3 + fdt / 3}), Error);
    std::vector<CVec> rough(steps + 1);
    for (int j = 0; j <= steps; ++j) rough[j] = std::cos(40.0 * j * dt) * p1;
    CHECK_THROWS_AS(duhamel_solve(s.F, p1, rough, dt, {0.5}), Error);
}

TEST_CASE("sine mode decays at the discrete rate under the Duhamel solver") {
    const Setup s = make("constant", 1.0 / 16);
    const CVec phi = sine(s.g, 1);
    std::vector<CVec> F(33, CVec::Zero(phi.size()));
    const auto u = duhamel_solve(s.F, phi, F, 1.0 / 32, {1.0});
    CHECK(l2(u[0], s.g) == doctest::Approx(std::exp(-kPi * kPi) * l2(phi, s.g)).epsilon(1e-3));
}
