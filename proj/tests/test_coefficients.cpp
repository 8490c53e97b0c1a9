#include "homlab/coefficients.hpp"

#include <doctest.h>

using namespace homlab;

namespace {

CellFunction fn(std::function<double(double)> f) {
    return scalar_function([f](const std::vector<double>& y) { return f(y[0]); });
}

double quad_mean(const CMat& a) { return a.sum().real() / static_cast<double>(a.size()); }

}  // namespace

TEST_CASE("symbol bounds of the gradient and of b = (1, 2)^T") {
    const auto grad = validate_symbol(Symbol{{CMat::Identity(1, 1)}});
    CHECK(grad.alpha0 == doctest::Approx(1.0));
    CHECK(grad.alpha1 == doctest::Approx(1.0));
    CMat b(2, 1);
    b << 1.0, 2.0;
    const auto s = validate_symbol(Symbol{{b}});
    CHECK(s.alpha0 == doctest::Approx(5.0));
    CHECK_THROWS_AS(validate_symbol(Symbol{{CMat::Zero(1, 1)}}), Error);
}

TEST_CASE("inverse square root of a Hermitian matrix") {
    CMat q(2, 2);
    q << 3.0, cplx(0.0, 1.0), cplx(0.0, -1.0), 2.0;
    const CMat f = inverse_sqrt_hpd(q);
    CHECK((f * q * f - CMat::Identity(2, 2)).norm() < 1e-12);
    CHECK((f - f.adjoint()).norm() < 1e-14);
}

TEST_CASE("every preset validates") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        CHECK_NOTHROW(validate_coefficients(make_preset(name)));
    }
    CHECK_THROWS_AS(make_preset("nope"), Error);
}

TEST_CASE("magnetic rewrite reproduces the quadratic form") {
    // (D - A)^* g (D - A) + v + V against D^* g D + a D + D a^* + Q on a random trigonometric polynomial.
    const PeriodicGrid grid(Lattice::unit(1), {128});
    const auto g = fn([](double y) { return 1.0 / (2.0 + std::sin(2 * kPi * y)); });
    const auto A = fn([](double y) { return 0.5 * std::cos(2 * kPi * y); });
    const auto v = fn([](double y) { return std::sin(2 * kPi * y) + 0.3 * std::cos(4 * kPi * y); });
    const auto V = fn([](double y) { return 0.5 * std::cos(4 * kPi * y); });
    const auto mb = build_scalar_magnetic(grid, g, {A}, v, V);
    const CoefficientSet& c = mb.coefficients;

    CMat u(1, grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const double y = grid.node(k)[0];
        u(0, k) = cplx(std::cos(2 * kPi * y) + 0.2, 0.7 * std::sin(6 * kPi * y) - 0.1 * std::cos(4 * kPi * y));
    }
    const CMat du = spectral_derivative(u, grid, 0);
    CMat orig(1, grid.size()), rewritten(1, grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const auto y = grid.node(k);
        const double gy = g(y)(0, 0).real(), Ay = A(y)(0, 0).real();
        const cplx w = du(0, k) - Ay * u(0, k);
        orig(0, k) = gy * std::norm(w) + (v(y)(0, 0).real() + V(y)(0, 0).real()) * std::norm(u(0, k));
        const cplx a = c.a[0](y)(0, 0);
        rewritten(0, k) = c.g(y)(0, 0).real() * std::norm(du(0, k)) +
                          2.0 * (a * du(0, k) * std::conj(u(0, k))).real() + c.Q(y)(0, 0).real() * std::norm(u(0, k));
    }
    const double lhs = quad_mean(orig), rhs = quad_mean(rewritten);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(lhs));
}

TEST_CASE("magnetic builder rejects a potential with nonzero mean") {
    const PeriodicGrid grid(Lattice::unit(1), {32});
    CHECK_THROWS_AS(build_scalar_magnetic(grid, constant_function(CMat::Identity(1, 1)),
                                          {constant_function(CMat::Zero(1, 1))}, fn([](double) { return 1.0; }),
                                          constant_function(CMat::Zero(1, 1))),
                    Error);
}

TEST_CASE("ground state: residual, positivity and normalization") {
    const auto gcheck = fn([](double y) { return 1.0 + 0.3 * std::cos(2 * kPi * y); });
    const auto vcheck = fn([](double y) { return 4.0 * std::cos(2 * kPi * y); });
    for (CellScheme scheme : {CellScheme::Spectral, CellScheme::FiniteDifference}) {
        const PeriodicGrid grid(Lattice::unit(1), {64});
        const GroundState gs = ground_state_factorize(grid, gcheck, vcheck, scheme);
        CHECK(gs.residual <= 1e-8);
        double mean2 = 0.0, mn = 1e300;
        for (const auto& w : gs.omega.values) {
            mean2 += std::norm(w(0, 0));
            mn = std::min(mn, w(0, 0).real());
        }
        CHECK(mn > 0.0);
        CHECK(std::abs(mean2 / grid.size() - 1.0) <= 1e-10);
        CHECK(gs.shift < 0.0);
    }
}

TEST_CASE("ground state of a constant potential is flat") {
    const PeriodicGrid grid(Lattice::unit(1), {32});
    const GroundState gs = ground_state_factorize(grid, constant_function(CMat::Identity(1, 1)), fn([](double) { return 2.5; }));
    CHECK(gs.shift == doctest::Approx(2.5));
    for (const auto& w : gs.omega.values) CHECK(w(0, 0).real() == doctest::Approx(1.0));
}

TEST_CASE("strong-singular factorization matches the original form on the cell") {
    // omega^{-1} (D^* omega^2 gcheck D + (vhat - c) omega^2) omega^{-1} = D^* gcheck D + vcheck - shift + vhat - c.
    const int n = 32;
    const auto sb = build_strong_singular_fd(n, constant_function(CMat::Identity(1, 1)),
                                             fn([](double y) { return 4.0 * std::cos(2 * kPi * y); }),
                                             fn([](double y) { return std::sin(2 * kPi * y); }),
                                             constant_function(CMat::Zero(1, 1)));
    const CoefficientSet& c = sb.magnetic.coefficients;
    REQUIRE(c.original);
    const double h = 1.0 / n;
    RMat Dm = RMat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        Dm(k, k) = -1.0 / h;
        Dm(k, (k + 1) % n) = 1.0 / h;
    }
    RVec gf(n), gc(n), om(n), pot(n), orig(n);
    for (int k = 0; k < n; ++k) {
        const std::vector<double> y{k * h}, yh{(k + 0.5) * h};
        gf(k) = c.g(yh)(0, 0).real();
        gc(k) = c.original->gcheck(yh)(0, 0).real();
        om(k) = c.original->omega(y)(0, 0).real();
        pot(k) = c.singular_potential(y)(0, 0).real();
        orig(k) = c.original->vcheck(y)(0, 0).real() + c.original->vhat(y)(0, 0).real();
    }
    const RMat fact = Dm.transpose() * gf.asDiagonal() * Dm + RMat(pot.asDiagonal());
    const RMat back = om.cwiseInverse().asDiagonal() * fact * om.cwiseInverse().asDiagonal();
    const RMat ref = Dm.transpose() * gc.asDiagonal() * Dm + RMat(orig.asDiagonal());
    CHECK((back - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
}
