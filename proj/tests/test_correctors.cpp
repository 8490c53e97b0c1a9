#include "homlab/correctors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace homlab;

namespace {

CellData fd_cell(const std::string& name, int n_per = 16) {
    PresetOptions po;
    po.scheme = CellScheme::FiniteDifference;
    po.cell_points = n_per;
    CoefficientSet c = make_preset(name, po);
    c.lambda = 0.0;
    return assemble_cell_data(c, PeriodicGrid(Lattice::unit(1), {n_per}), CellScheme::FiniteDifference, 1.0);
}

}  // namespace

TEST_CASE("corrector fields are periodic lookups on the matching grid") {
    const CellData cd = fd_cell("sine_g");
    const DomainGrid g = make_domain_grid(1.0, 0.25, 16);
    const CorrectorFields f = sample_corrector_fields(cd, g);
    REQUIRE(static_cast<int>(f.Lambda.size()) == g.full_nodes());
    for (int i = 0; i < g.full_nodes(); ++i) CHECK((f.Lambda[i] - cd.Lambda[i % 16]).norm() == 0.0);
    // Discrete cell equation in 1d: g (D Lambda + 1) is the constant g0.
    for (const auto& gt : f.gtilde_mid) CHECK(std::abs(gt(0, 0) - cd.g0(0, 0)) < 1e-9);
}

TEST_CASE("plain flux approximation of a linear function is the effective flux") {
    const CellData cd = fd_cell("sine_g");
    const DomainGrid g = make_domain_grid(1.0, 0.125, 16);
    const CorrectorFields f = sample_corrector_fields(cd, g);
    CVec u(g.full_nodes());
    for (int i = 0; i <= g.N; ++i) u(i) = g.x(i);
    const CVec p = flux_approx_plain(cd, f, g) * u;
    for (int i = 0; i <= g.N; ++i) CHECK(std::abs(p(i) - (-kI) * cd.g0(0, 0)) < 1e-9);
    const CVec ps = flux_approx(cd, f, g) * u;
    // Away from the ends the smoothing window only sees the domain.
    for (int i = g.n_per; i <= g.N - g.n_per; ++i) CHECK(std::abs(ps(i) - (-kI) * cd.g0(0, 0)) < 1e-9);
}

TEST_CASE("first-order approximation recovers the oscillating flux") {
    // For u0 smooth, g^eps D(u0 + eps K u0) approaches the effective flux g0 D u0 at rate eps.
    const CellData cd = fd_cell("sine_g");
    std::vector<double> err;
    for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        const DomainGrid g = make_domain_grid(1.0, eps, 16);
        const CorrectorFields f = sample_corrector_fields(cd, g);
        CVec u(g.full_nodes());
        for (int i = 0; i <= g.N; ++i) u(i) = std::sin(kPi * g.x(i));
        const CVec v = u + eps * (corrector_KD0(cd, f, g) * u);
        const CVec p = flux_true(cd, f, g) * v;
        double e = 0.0;
        for (int i = g.N / 4; i <= 3 * g.N / 4; ++i)
            e = std::max(e, std::abs(p(i) - (-kI) * cd.g0(0, 0) * kPi * std::cos(kPi * g.x(i))));
        err.push_back(e);
    }
    CHECK(err[1] < 0.6 * err[0]);
    CHECK(err[2] < 0.6 * err[1]);
}

TEST_CASE("constant coefficients: correctors vanish and the flux is the derivative") {
    const CellData cd = fd_cell("constant");
    const DomainGrid g = make_domain_grid(1.0, 1.0 / 16, 16);
    const CorrectorFields f = sample_corrector_fields(cd, g);
    CHECK(corrector_KD(cd, f, g).norm() == 0.0);
    CHECK(corrector_KD0(cd, f, g).norm() == 0.0);
    CVec u(g.full_nodes());
    for (int i = 0; i <= g.N; ++i) u(i) = std::sin(kPi * g.x(i));
    const CVec p = flux_true(cd, f, g) * u;
    for (int i = 1; i < g.N; ++i) CHECK(std::abs(p(i) - (-kI) * kPi * std::cos(kPi * g.x(i))) < 1e-4);
}

TEST_CASE("interior norms need nodes inside the subdomain") {
    const DomainGrid g = make_domain_grid(1.0, 0.25, 16);
    const LinearMap I = LinearMap::dense(CMat::Identity(g.full_nodes(), g.full_nodes()));
    const auto n = interior_norm_pack(I, g, 0.25, 1);
    CHECK(n.l2 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(n.h1 > n.l2);
    CHECK_THROWS_AS(interior_norm_pack(I, g, 0.5, 1), Error);
}

TEST_CASE("bundle csv layout") {
    const DomainGrid g = make_domain_grid(1.0, 0.25, 16);
    const CVec z = CVec::Zero(g.full_nodes());
    const auto path = std::filesystem::temp_directory_path() / "homlab_bundle_test.csv";
    write_bundle_csv(path.string(), g, z, z, z, z, z, 1, 1, &z);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "x,u_eps_re,u_eps_im,u0_re,u0_im,v_eps_re,v_eps_im,p_eps_re,p_eps_im,flux_approx_re,flux_approx_im,"
          "u_eps_contour_re,u_eps_contour_im");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == g.full_nodes());
    std::filesystem::remove(path);
}
