#include "homlab/convergence_lab.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace homlab;

namespace {

SweepConfig small(const std::string& preset) {
    SweepConfig c;
    c.preset = preset;
    c.eps = {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32};
    c.max_eps = 0.25;
    c.discretization_guard = false;
    c.jobs = 1;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fit_rate recovers exact power laws") {
    std::vector<std::pair<double, double>> pts;
    for (double e : {0.5, 0.25, 0.125, 0.0625}) pts.emplace_back(e, 3.0 * std::pow(e, 1.5));
    const RateFit f = fit_rate(pts);
    CHECK(f.slope == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.rms_residual < 1e-12);
    pts[1].second = 0.0;
    CHECK_THROWS_AS(fit_rate(pts), Error);
    CHECK_THROWS_AS(fit_rate({{0.5, 1.0}, {0.25, 0.5}}), Error);
}

TEST_CASE("rate functions") {
    const double e = 0.01, L = std::abs(std::log(e)) + 1.0;
    CHECK(theta_rate(e, kInfinity) == doctest::Approx(e));
    CHECK(theta_rate(e, 2.0) == doctest::Approx(e * std::sqrt(L)));
    CHECK(theta_rate(e, 4.0) == doctest::Approx(e));
    CHECK(theta_rate(e, 1.5) == doctest::Approx(std::pow(e, 2.0 / 3.0)));
    CHECK_THROWS_AS(theta_rate(e, 1.0), Error);
    CHECK(omega_rate(e, kInfinity) == doctest::Approx(std::sqrt(e)));
    CHECK(omega_rate(e, 4.0) == doctest::Approx(std::sqrt(e) * std::pow(L, 0.75)));
    CHECK(omega_rate(e, 3.0) == doctest::Approx(std::pow(e, 1.0 / 3.0)));
    CHECK_THROWS_AS(omega_rate(e, 2.0), Error);
    CHECK(c_phi(kPi / 4) == doctest::Approx(std::sqrt(2.0)));
    CHECK(c_phi(kPi) == doctest::Approx(1.0));
    CHECK(c_phi(7 * kPi / 4) == doctest::Approx(std::sqrt(2.0)));
    CHECK(rho_flat(cplx(-5.0, 0.0), 1.0) == doctest::Approx(1.0));
    CHECK(rho_flat(cplx(1.0, 0.5), 1.0) == doctest::Approx(4.0));
}

TEST_CASE("sweep configuration validation") {
    SweepConfig c;
    CHECK_NOTHROW(validate_sweep_config(c));
    auto bad = [](auto mutate) {
        SweepConfig s;
        mutate(s);
        CHECK_THROWS_AS(validate_sweep_config(s), Error);
    };
    bad([](SweepConfig& s) { s.eps.pop_back(); });
    bad([](SweepConfig& s) { s.n_per = 2; });
    bad([](SweepConfig& s) { s.eps[0] = 0.5; });
    bad([](SweepConfig& s) { s.eps[1] = 1.0 / 30.5; });
    bad([](SweepConfig& s) { std::swap(s.eps[1], s.eps[2]); });
    bad([](SweepConfig& s) { s.norms.push_back("Linf"); });
    bad([](SweepConfig& s) { s.r_values = {3.0}; });
    bad([](SweepConfig& s) { s.delta0 = 0.5; });
    bad([](SweepConfig& s) { s.zetas = {cplx(2.0, 0.0)}; });
    bad([](SweepConfig& s) { s.times = {0.0}; });
    bad([](SweepConfig& s) { s.decay_times = {0.5}; });
}

TEST_CASE("constant preset: every difference vanishes and all gates pass") {
    SweepConfig c = small("constant");
    c.norms = {"L2", "H1", "H1_corrector", "interior_H1"};
    const ConvergenceReport r = run_parabolic_sweep(c);
    CHECK(r.passed());
    for (const auto& t : r.tables) {
        CAPTURE(t.norm);
        CHECK(t.status == "vanishing");
        for (double v : t.values) CHECK(v <= 1e-10);
    }
    const ConvergenceReport d = run_duhamel_sweep(c);
    CHECK(d.passed());
    for (const auto& t : d.tables) CHECK(t.status == "vanishing");
}

TEST_CASE("sine preset: report structure and decreasing errors") {
    SweepConfig c = small("sine_g");
    c.norms = {"L2", "H1_corrector", "flux"};
    c.contour_validation = true;
    const ConvergenceReport r = run_parabolic_sweep(c);
    for (const char* nm : {"L2", "H1_corrector", "flux"}) {
        const NormTable* t = r.table(nm, "0.25");
        REQUIRE(t != nullptr);
        REQUIRE(t->fit);
        CHECK(t->fit->slope > 0.4);
        CHECK(t->values.back() < t->values.front());
    }
    for (const char* ck : {"envelope_uniformity", "decay_monotone", "contour_vs_eigen"}) {
        CAPTURE(ck);
        REQUIRE(r.check(ck) != nullptr);
        CHECK(r.check(ck)->pass);
    }
    CHECK(r.check("discretization_guard") == nullptr);
    const auto j = r.to_json();
    CHECK(j.at("metadata").at("g0").at("re")[0][0].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(j.at("tables").size() == 3);
}

TEST_CASE("pre-asymptotic times fail the L2 gate") {
    SweepConfig c = small("sine_g");
    c.norms = {"L2"};
    c.times = {1e-5};
    c.envelope = false;
    const ConvergenceReport r = run_parabolic_sweep(c);
    CHECK(r.table("L2")->status == "fail");
    CHECK_FALSE(r.passed());
}

TEST_CASE("reports are byte-reproducible") {
    SweepConfig c = small("magnetic_sine");
    c.norms = {"L2", "H1_corrector"};
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "homlab_repro_test";
    fs::remove_all(base);
    write_report(run_parabolic_sweep(c), (base / "a").string(), "parabolic");
    c.jobs = 2;
    write_report(run_parabolic_sweep(c), (base / "b").string(), "parabolic");
    for (const char* f : {"parabolic.json", "parabolic_tables.csv", "parabolic_plot_L2_0.25.dat"}) {
        CAPTURE(f);
        const std::string a = slurp(base / "a" / f);
        CHECK(!a.empty());
        CHECK(a == slurp(base / "b" / f));
    }
    fs::remove_all(base);
}

TEST_CASE("elliptic sweep on the sine preset") {
    SweepConfig c = small("sine_g");
    c.norms = {};
    const ConvergenceReport r = run_elliptic_sweep(c);
    const NormTable* t = r.table("L2");
    REQUIRE(t != nullptr);
    CHECK(t->fit->slope > 0.7);
    REQUIRE(r.check("zeta_scaling") != nullptr);
}
