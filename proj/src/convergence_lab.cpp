#include "homlab/convergence_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

namespace homlab {

double theta_rate(double eps, double r) {
    if (!(r > 1.0)) fail_validation("InvalidArgument", "r must exceed 1");
    if (r < 2.0) return std::pow(eps, 2.0 - 2.0 / r);
    if (r == 2.0) return eps * std::sqrt(std::abs(std::log(eps)) + 1.0);
    return eps;
}

double omega_rate(double eps, double r) {
    if (!(r > 2.0)) fail_validation("InvalidArgument", "r must exceed 2");
    if (r < 4.0) return std::pow(eps, 1.0 - 2.0 / r);
    if (r == 4.0) return std::sqrt(eps) * std::pow(std::abs(std::log(eps)) + 1.0, 0.75);
    return std::sqrt(eps);
}

double c_phi(double phi) {
    double p = std::fmod(phi, 2.0 * kPi);
    if (p < 0.0) p += 2.0 * kPi;
    if ((p > 0.0 && p < 0.5 * kPi) || (p > 1.5 * kPi && p < 2.0 * kPi)) return 1.0 / std::abs(std::sin(p));
    return 1.0;
}

double rho_flat(cplx zeta, double c_flat) {
    const cplx z = zeta - c_flat;
    if (z.imag() == 0.0 && z.real() >= 0.0) fail_validation("InvalidArgument", "zeta lies on [c_flat, inf)");
    double psi = std::arg(z);
    if (psi < 0.0) psi += 2.0 * kPi;
    const double c2 = std::pow(c_phi(psi), 2);
    const double r = std::abs(z);
    return r < 1.0 ? c2 / (r * r) : c2;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) fail_validation("InvalidArgument", "need at least 3 points");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [e, v] : points) {
        if (!(e > 0.0) || !(v > 0.0)) fail_validation("NonPositiveValue", "rate fit needs positive eps and values");
        sx += std::log(e);
        sy += std::log(v);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [e, v] : points) {
        const double dx = std::log(e) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(v) - my);
    }
    if (sxx == 0.0) fail_validation("InvalidArgument", "eps values must differ");
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (const auto& [e, v] : points) {
        const double r = std::log(v) - (f.intercept + f.slope * std::log(e));
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / n);
    return f;
}

namespace {

const std::vector<std::string> kParabolicNorms{"L2",         "H1",         "H1_corrector", "H1_corrector_plain",
                                               "flux",       "flux_plain", "interior_L2",  "interior_H1",
                                               "L2_original"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

void validate_sweep_config(const SweepConfig& cfg) {
    if (cfg.eps.size() < 4) fail_validation("InvalidArgument", "a sweep needs at least 4 eps values");
    if (cfg.n_per < 8 || cfg.n_per % 2 != 0) fail_validation("InvalidArgument", "n_per must be even and >= 8");
    if (!(cfg.length > 0.0)) fail_validation("InvalidArgument", "length must be positive");
    for (size_t k = 0; k < cfg.eps.size(); ++k) {
        const double e = cfg.eps[k];
        if (!(e > 0.0) || e > cfg.max_eps * (1.0 + 1e-12))
            fail_validation("InvalidArgument", "eps values must lie in (0, max_eps]");
        if (k > 0 && !(e < cfg.eps[k - 1])) fail_validation("InvalidArgument", "eps values must strictly decrease");
        const double inv = 1.0 / e;
        if (std::abs(inv - std::round(inv)) > 1e-9 * inv) fail_validation("InvalidArgument", "1 / eps must be an integer");
        const DomainGrid g = make_domain_grid(cfg.length, e, cfg.n_per);
        if (cfg.n_per / 2 + 1 > g.margin)
            fail_validation("WindowExceedsMargin", "Steklov window exceeds the extension margin");
    }
    if (cfg.times.empty()) fail_validation("InvalidArgument", "need at least one time");
    for (double t : cfg.times)
        if (!(t > 0.0)) fail_validation("InvalidArgument", "times must be positive");
    for (double t : cfg.envelope_times)
        if (!(t > 0.0)) fail_validation("InvalidArgument", "envelope times must be positive");
    for (double t : cfg.decay_times)
        if (!(t >= 1.0)) fail_validation("InvalidArgument", "decay times must be >= 1");
    for (const auto& nm : cfg.norms)
        if (!contains(kParabolicNorms, nm)) fail_validation("InvalidArgument", "unknown norm '" + nm + "'");
    if (!(cfg.delta0 > 0.0) || !(2.0 * cfg.delta0 < cfg.length))
        fail_validation("InvalidArgument", "delta0 must lie in (0, length / 2)");
    if (cfg.jobs < 0) fail_validation("InvalidArgument", "jobs must be >= 0");
    for (const cplx& z : cfg.zetas)
        if ((z.imag() == 0.0 && z.real() >= 0.0) || std::abs(z) < 1.0)
            fail_validation("InvalidArgument", "zeta must be off [0, inf) with |zeta| >= 1");
    for (double r : cfg.r_values)
        if (!(r == 2.0 || r == 4.0 || r == kInfinity)) fail_validation("InvalidArgument", "r must be 2, 4 or inf");
    if (!(cfg.horizon > 0.0) || cfg.time_steps < 1) fail_validation("InvalidArgument", "bad Duhamel time grid");
}

std::string format_time_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

bool ConvergenceReport::passed() const {
    for (const auto& t : tables)
        if (t.status == "fail") return false;
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

const NormTable* ConvergenceReport::table(const std::string& norm, const std::string& time) const {
    for (const auto& t : tables)
        if (t.norm == norm && (time.empty() || t.time == time)) return &t;
    return nullptr;
}

const Check* ConvergenceReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

nlohmann::json ConvergenceReport::to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    j["metadata"] = metadata;
    j["tables"] = nlohmann::json::array();
    for (const auto& t : tables) {
        nlohmann::json e{{"norm", t.norm}, {"time", t.time}, {"eps", t.eps}, {"values", t.values}, {"status", t.status}};
        if (t.fit)
            e["fit"] = {{"slope", t.fit->slope}, {"intercept", t.fit->intercept}, {"rms_residual", t.fit->rms_residual}};
        else
            e["fit"] = nullptr;
        switch (t.gate.kind) {
            case Gate::Kind::None: e["gate"] = nullptr; break;
            case Gate::Kind::Range: e["gate"] = {{"type", "range"}, {"lo", t.gate.lo}, {"hi", t.gate.hi}}; break;
            case Gate::Kind::AtLeast: e["gate"] = {{"type", "at_least"}, {"lo", t.gate.lo}}; break;
        }
        j["tables"].push_back(e);
    }
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["pass"] = passed();
    return j;
}

namespace {

constexpr double kVanishing = 1e-10;

// Runs job(k) for k = 0..count-1 on up to `jobs` threads; results land in caller-owned slots.
void parallel_for(int count, int jobs, const std::function<void(int)>& job) {
    int workers = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<int> next{0};
    auto run = [&]() {
        for (int k = next++; k < count; k = next++) {
            try {
                job(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& th : pool) th.join();
    }
    for (int k = 0; k < count; ++k) {
        if (!errors[k]) continue;
        try {
            std::rethrow_exception(errors[k]);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail_solver("ReportIncomplete", std::string("sweep cell failed: ") + e.what());
        }
    }
}

void finish_table(NormTable& t) {
    bool vanishing = true, positive = true;
    for (double v : t.values) {
        vanishing = vanishing && v <= kVanishing;
        positive = positive && v > 0.0;
    }
    if (vanishing) {
        t.status = "vanishing";
        return;
    }
    if (positive && t.values.size() >= 3) {
        std::vector<std::pair<double, double>> pts;
        for (size_t k = 0; k < t.values.size(); ++k) pts.emplace_back(t.eps[k], t.values[k]);
        t.fit = fit_rate(pts);
    }
    if (t.gate.kind == Gate::Kind::None) {
        t.status = "reported";
        return;
    }
    if (!t.fit) {
        t.status = "fail";
        return;
    }
    const double s = t.fit->slope;
    const bool ok = t.gate.kind == Gate::Kind::Range ? (s >= t.gate.lo && s <= t.gate.hi) : s >= t.gate.lo;
    t.status = ok ? "pass" : "fail";
}

Gate range_gate(double lo, double hi) { return {Gate::Kind::Range, lo, hi}; }
Gate at_least(double lo) { return {Gate::Kind::AtLeast, lo, 0.0}; }

}  // namespace

LabSetup prepare_lab(const SweepConfig& cfg, int n_per, std::optional<double> lambda) {
    LabSetup s;
    s.n_per = n_per;
    PresetOptions po = cfg.preset_options;
    po.scheme = CellScheme::FiniteDifference;
    po.cell_points = n_per;
    s.coeffs = make_preset(cfg.preset, po);
    if (s.coeffs.d() != 1) fail_validation("InvalidArgument", "sweeps run on one-dimensional presets");
    for (double p : s.coeffs.lattice.periods)
        if (p != 1.0) fail_validation("InvalidArgument", "sweeps use the unit lattice");
    if (lambda) {
        s.lambda = *lambda;
    } else if (s.coeffs.lambda) {
        s.lambda = *s.coeffs.lambda;
    } else {
        for (double e : cfg.eps) s.lambda = std::max(s.lambda, calibrate_lambda(s.coeffs, make_domain_grid(cfg.length, e, n_per)));
    }
    s.coeffs.lambda = s.lambda;
    s.cd = assemble_cell_data(s.coeffs, PeriodicGrid(Lattice::unit(1), {n_per}), CellScheme::FiniteDifference, cfg.length);
    return s;
}

namespace {

nlohmann::json setup_metadata(const SweepConfig& cfg, const LabSetup& s) {
    nlohmann::json grids = nlohmann::json::array();
    for (double e : cfg.eps) {
        const DomainGrid g = make_domain_grid(cfg.length, e, cfg.n_per);
        grids.push_back({{"eps", e}, {"N", g.N}, {"h", g.h}, {"margin", g.margin}});
    }
    return {{"preset", cfg.preset},   {"n_per", cfg.n_per},      {"length", cfg.length},
            {"lambda", s.lambda},     {"c_flat", s.cd.c_flat},   {"g0", matrix_to_json(s.cd.g0)},
            {"grids", grids},         {"cell_scheme", "finite_difference"},
            {"zero_corrector", s.cd.zero_corrector}};
}

struct Operators {
    DomainGrid g;
    Factorization Fe, F0;
    std::optional<Factorization> Fo;
    SpMat omega_inv;
};

Operators build_operators(const LabSetup& s, double length, double eps) {
    Operators o;
    o.g = make_domain_grid(length, eps, s.n_per);
    const SpMat Be = assemble_Beps(s.coeffs, o.g, s.lambda);
    o.Fe = factorize(Be, sandwich_f(s.coeffs, o.g));
    const SpMat B0 = assemble_B0(s.cd, o.g);
    o.F0 = factorize(B0, kron_block(identity_sparse(o.g.interior_nodes()), inverse_sqrt_hpd(s.cd.Q0bar)));
    if (s.coeffs.original) {
        const SpMat Bo = assemble_original(*s.coeffs.original, o.g, s.lambda);
        o.Fo = factorize(Bo, identity_sparse(o.g.interior_nodes()));
        o.omega_inv = omega_diagonal(*s.coeffs.original, o.g);
        for (int k = 0; k < o.omega_inv.outerSize(); ++k)
            for (SpMat::InnerIterator it(o.omega_inv, k); it; ++it) it.valueRef() = 1.0 / it.value();
    }
    return o;
}

double op_norm(CMat&& m, const DomainGrid& g, NormKind kind, int comps,
               std::optional<std::pair<double, double>> sub = std::nullopt) {
    NormTarget t;
    t.kind = kind;
    t.comps = comps;
    t.subdomain = sub;
    return operator_norm(LinearMap::dense(std::move(m)), g, t);
}

// omega^{-1} e^{-B t} omega^{-1} for the original form, full layout.
CMat original_semigroup(const Operators& o, double t) {
    return embed_rows(o.omega_inv * (semigroup_matrix(*o.Fo, t) * o.omega_inv), o.g, 1);
}

struct ParabolicCell {
    std::map<std::string, std::vector<double>> values;  // norm -> per time
    std::vector<double> envelope, envelope_original;
    std::vector<double> decay;
    nlohmann::json contour;
    double seconds = 0.0;
};

ParabolicCell parabolic_cell(const SweepConfig& cfg, const LabSetup& s, double eps, bool extras, bool contour) {
    const auto t_start = std::chrono::steady_clock::now();
    ParabolicCell out;
    const Operators o = build_operators(s, cfg.length, eps);
    const DomainGrid& g = o.g;
    const int n = s.cd.n(), m = s.cd.m();
    const auto& want = cfg.norms;
    const auto fields = sample_corrector_fields(s.cd, g);
    SpMat K, K0, Ft, Fa, Fp;
    if (contains(want, "H1_corrector") || contains(want, "interior_L2") || contains(want, "interior_H1"))
        K = corrector_KD(s.cd, fields, g);
    if (contains(want, "H1_corrector_plain")) K0 = corrector_KD0(s.cd, fields, g);
    if (contains(want, "flux") || contains(want, "flux_plain")) Ft = flux_true(s.cd, fields, g);
    if (contains(want, "flux")) Fa = flux_approx(s.cd, fields, g);
    if (contains(want, "flux_plain")) Fp = flux_approx_plain(s.cd, fields, g);
    const auto sub = std::make_pair(cfg.delta0, cfg.length - cfg.delta0);

    for (double t : cfg.times) {
        const CMat Ee = embed_rows(semigroup_matrix(o.Fe, t), g, n);
        const CMat E0 = embed_rows(semigroup_matrix(o.F0, t), g, n);
        auto put = [&](const std::string& nm, double v) { out.values[nm].push_back(v); };
        if (contains(want, "flux")) put("flux", op_norm(Ft * Ee - Fa * E0, g, NormKind::L2, m));
        if (contains(want, "flux_plain")) put("flux_plain", op_norm(Ft * Ee - Fp * E0, g, NormKind::L2, m));
        const CMat D = Ee - E0;
        if (contains(want, "L2")) put("L2", op_norm(CMat(D), g, NormKind::L2, n));
        if (contains(want, "H1")) put("H1", op_norm(CMat(D), g, NormKind::H1, n));
        if (K.size() > 0) {
            const CMat H = D - eps * (K * E0);
            if (contains(want, "H1_corrector")) put("H1_corrector", op_norm(CMat(H), g, NormKind::H1, n));
            if (contains(want, "interior_L2")) put("interior_L2", op_norm(CMat(H), g, NormKind::L2, n, sub));
            if (contains(want, "interior_H1")) put("interior_H1", op_norm(CMat(H), g, NormKind::H1, n, sub));
        }
        if (K0.size() > 0) put("H1_corrector_plain", op_norm(D - eps * (K0 * E0), g, NormKind::H1, n));
        if (o.Fo && contains(want, "L2_original")) put("L2_original", op_norm(original_semigroup(o, t) - E0, g, NormKind::L2, 1));
    }

    if (extras && cfg.envelope) {
        std::vector<double> slots{eps * eps};
        slots.insert(slots.end(), cfg.envelope_times.begin(), cfg.envelope_times.end());
        for (double t : slots) {
            const CMat E0 = embed_rows(semigroup_matrix(o.F0, t), g, n);
            out.envelope.push_back(op_norm(embed_rows(semigroup_matrix(o.Fe, t), g, n) - E0, g, NormKind::L2, n));
            if (o.Fo && contains(want, "L2_original"))
                out.envelope_original.push_back(op_norm(original_semigroup(o, t) - E0, g, NormKind::L2, 1));
        }
    }
    if (extras)
        for (double t : cfg.decay_times)
            out.decay.push_back(op_norm(embed_rows(semigroup_matrix(o.Fe, t) - semigroup_matrix(o.F0, t), g, n), g,
                                        NormKind::L2, n));

    if (contour) {
        // Cross-check e^{-Bt} on a fixed block of random vectors.
        const SpMat Be = assemble_Beps(s.coeffs, g, s.lambda);
        const SpMat Q0 = assemble_Q0(s.coeffs, g);
        double f2 = 0.0;
        for (int i = 1; i < g.N; ++i)
            f2 = std::max(f2, inverse_sqrt_hpd(s.coeffs.Q0(cell_point(g, g.x(i)))).squaredNorm());
        std::mt19937_64 rng(cfg.preset_options.seed);
        std::normal_distribution<double> nd;
        CMat rhs(Be.rows(), 4);
        for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs.data()[i] = cplx(nd(rng), nd(rng));
        out.contour = nlohmann::json::array();
        for (double t : cfg.contour_times) {
            ContourOptions co;
            co.f_norm_sq = f2;
            const ContourResult cr = contour_semigroup(Be, Q0, rhs, t, s.cd.c_flat, co);
            const CMat ref = semigroup_matrix(o.Fe, t) * rhs;
            const double dev = (cr.value - ref).norm() / ref.norm();
            out.contour.push_back({{"t", t}, {"relative_deviation", dev}, {"T_max", cr.T_max}, {"tail_bound", cr.tail_bound}, {"resolvent_solves", cr.nodes}});
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

Gate parabolic_gate(const std::string& nm, const CellData& cd) {
    // Without correctors the L2 error drops faster than eps; the rate is then bounded from below only.
    if (nm == "L2" || nm == "L2_original") return cd.zero_corrector ? at_least(0.85) : range_gate(0.85, 1.15);
    if (nm == "H1") return cd.zero_corrector ? at_least(0.85) : Gate{};
    if (nm == "H1_corrector" || nm == "H1_corrector_plain" || nm == "flux" || nm == "flux_plain") return at_least(0.45);
    if (nm == "interior_H1") return at_least(0.85);
    return {};
}

Check envelope_check(const std::string& name, const SweepConfig& cfg, const std::vector<ParabolicCell>& cells,
                     double c_flat, bool original) {
    std::vector<std::string> labels{"eps^2"};
    for (double t : cfg.envelope_times) labels.push_back(format_time_label(t));
    nlohmann::json rho = nlohmann::json::array(), ratios = nlohmann::json::array();
    double worst = 0.0;
    for (size_t slot = 0; slot < labels.size(); ++slot) {
        std::vector<double> r;
        for (size_t k = 0; k < cells.size(); ++k) {
            const double e = cfg.eps[k];
            const double t = slot == 0 ? e * e : cfg.envelope_times[slot - 1];
            const double v = (original ? cells[k].envelope_original : cells[k].envelope)[slot];
            r.push_back(v * std::sqrt(t + e * e) * std::exp(0.45 * c_flat * t) / e);
        }
        std::vector<double> q;
        for (size_t k = 1; k < r.size(); ++k) {
            q.push_back(r[k - 1] > 0.0 ? r[k] / r[k - 1] : 0.0);
            worst = std::max(worst, q.back());
        }
        rho.push_back(r);
        ratios.push_back(q);
    }
    Check c;
    c.name = name;
    c.pass = worst <= 1.5;
    c.detail = {{"times", labels}, {"rho", rho}, {"successive_ratios", ratios}, {"max_ratio", worst}, {"limit", 1.5}};
    return c;
}

}  // namespace

ConvergenceReport run_parabolic_sweep(const SweepConfig& cfg) {
    validate_sweep_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const LabSetup s = prepare_lab(cfg, cfg.n_per, std::nullopt);
    const int count = static_cast<int>(cfg.eps.size());
    std::vector<ParabolicCell> cells(count);
    parallel_for(count, cfg.jobs, [&](int k) { cells[k] = parabolic_cell(cfg, s, cfg.eps[k], true, cfg.contour_validation && k == 0); });

    ConvergenceReport rep;
    rep.kind = "parabolic";
    rep.metadata = setup_metadata(cfg, s);
    std::vector<std::string> norms;
    for (const auto& nm : kParabolicNorms)
        if (contains(cfg.norms, nm) && cells[0].values.count(nm)) norms.push_back(nm);
    for (size_t ti = 0; ti < cfg.times.size(); ++ti)
        for (const auto& nm : norms) {
            NormTable t;
            t.norm = nm;
            t.time = format_time_label(cfg.times[ti]);
            t.eps = cfg.eps;
            for (const auto& c : cells) t.values.push_back(c.values.at(nm)[ti]);
            t.gate = parabolic_gate(nm, s.cd);
            finish_table(t);
            rep.tables.push_back(std::move(t));
        }

    if (cfg.envelope) {
        rep.checks.push_back(envelope_check("envelope_uniformity", cfg, cells, s.cd.c_flat, false));
        if (!cells[0].envelope_original.empty())
            rep.checks.push_back(envelope_check("envelope_uniformity_original", cfg, cells, s.cd.c_flat, true));
    }
    if (!cfg.decay_times.empty()) {
        Check c;
        c.name = "decay_monotone";
        nlohmann::json rows = nlohmann::json::array();
        for (int k = 0; k < count; ++k) {
            std::vector<double> w;
            for (size_t i = 0; i < cfg.decay_times.size(); ++i)
                w.push_back(cells[k].decay[i] * std::exp(0.45 * s.cd.c_flat * cfg.decay_times[i]));
            for (size_t i = 1; i < w.size(); ++i)
                if (w[i] > w[i - 1] * (1.0 + 1e-9) + 1e-13) c.pass = false;
            rows.push_back(w);
        }
        c.detail = {{"times", cfg.decay_times}, {"weighted_norms", rows}};
        rep.checks.push_back(c);
    }
    if (cfg.contour_validation) {
        Check c;
        c.name = "contour_vs_eigen";
        c.detail = {{"eps", cfg.eps[0]}, {"samples", cells[0].contour}, {"limit", 1e-6}};
        for (const auto& e : cells[0].contour) c.pass = c.pass && e["relative_deviation"].get<double>() <= 1e-6;
        rep.checks.push_back(c);
    }
    if (cfg.discretization_guard) {
        const auto tg = std::chrono::steady_clock::now();
        const LabSetup s2 = prepare_lab(cfg, 2 * cfg.n_per, s.lambda);
        const ParabolicCell fine = parabolic_cell(cfg, s2, cfg.eps.back(), false, false);
        Check c;
        c.name = "discretization_guard";
        nlohmann::json rows = nlohmann::json::array();
        for (size_t ti = 0; ti < cfg.times.size(); ++ti)
            for (const auto& nm : norms) {
                const double a = cells.back().values.at(nm)[ti], b = fine.values.at(nm)[ti];
                const bool skip = a <= kVanishing && b <= kVanishing;
                const double rel = skip ? 0.0 : std::abs(b - a) / std::max(a, kVanishing);
                if (rel > 0.1) c.pass = false;
                rows.push_back({{"norm", nm}, {"time", format_time_label(cfg.times[ti])}, {"n_per", a},
                                {"n_per_doubled", b}, {"relative_change", rel}});
            }
        c.detail = {{"eps", cfg.eps.back()}, {"n_per", cfg.n_per}, {"rows", rows}, {"limit", 0.1}};
        rep.checks.push_back(c);
        rep.runtimes["guard"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - tg).count();
    }
    for (int k = 0; k < count; ++k) rep.runtimes["eps=" + format_time_label(cfg.eps[k])] = cells[k].seconds;
    rep.runtimes["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

ConvergenceReport run_elliptic_sweep(const SweepConfig& cfg) {
    validate_sweep_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const LabSetup s = prepare_lab(cfg, cfg.n_per, std::nullopt);
    const int count = static_cast<int>(cfg.eps.size());
    const int n = s.cd.n();
    const bool want_h1 = contains(cfg.norms, "H1_corrector");
    struct Cell {
        std::vector<double> l2, h1;
        double scale_a = 0.0, scale_b = 0.0;
    };
    std::vector<Cell> cells(count);
    parallel_for(count, cfg.jobs, [&](int k) {
        const Operators o = build_operators(s, cfg.length, cfg.eps[k]);
        SpMat K;
        if (want_h1) K = corrector_KD(s.cd, sample_corrector_fields(s.cd, o.g), o.g);
        auto diff = [&](cplx z, bool h1) {
            const CMat R0 = embed_rows(resolvent_matrix(o.F0, z), o.g, n);
            CMat D = embed_rows(resolvent_matrix(o.Fe, z), o.g, n) - R0;
            const double l2 = op_norm(CMat(D), o.g, NormKind::L2, n);
            const double hv = h1 ? op_norm(D - cfg.eps[k] * (K * R0), o.g, NormKind::H1, n) : 0.0;
            return std::make_pair(l2, hv);
        };
        for (const cplx& z : cfg.zetas) {
            const auto [l2, hv] = diff(z, want_h1);
            cells[k].l2.push_back(l2);
            cells[k].h1.push_back(hv);
        }
        if (k == count - 1) {
            cells[k].scale_a = diff(cfg.zeta_scaling.first, false).first;
            cells[k].scale_b = diff(cfg.zeta_scaling.second, false).first;
        }
    });

    ConvergenceReport rep;
    rep.kind = "elliptic";
    rep.metadata = setup_metadata(cfg, s);
    auto zeta_label = [](cplx z) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "zeta=%g%+gi", z.real(), z.imag());
        return std::string(buf);
    };
    nlohmann::json trend = nlohmann::json::array();
    for (size_t zi = 0; zi < cfg.zetas.size(); ++zi) {
        NormTable t;
        t.norm = "L2";
        t.time = zeta_label(cfg.zetas[zi]);
        t.eps = cfg.eps;
        for (const auto& c : cells) t.values.push_back(c.l2[zi]);
        t.gate = s.cd.zero_corrector ? at_least(0.85) : range_gate(0.85, 1.15);
        finish_table(t);
        const double last = t.values.back();
        rep.tables.push_back(std::move(t));
        if (want_h1) {
            NormTable h;
            h.norm = "H1_corrector";
            h.time = zeta_label(cfg.zetas[zi]);
            h.eps = cfg.eps;
            for (const auto& c : cells) h.values.push_back(c.h1[zi]);
            h.gate = at_least(0.45);
            finish_table(h);
            rep.tables.push_back(std::move(h));
        }
        trend.push_back({{"zeta", {cfg.zetas[zi].real(), cfg.zetas[zi].imag()}},
                         {"value", last},
                         {"value_times_sqrt_abs_zeta", last * std::sqrt(std::abs(cfg.zetas[zi]))},
                         {"rho_flat", rho_flat(cfg.zetas[zi], s.cd.c_flat)},
                         {"c_phi", c_phi(std::arg(cfg.zetas[zi]))}});
    }
    rep.metadata["zeta_trend"] = {{"eps", cfg.eps.back()}, {"rows", trend}};

    Check c;
    c.name = "zeta_scaling";
    const Cell& f = cells.back();
    const bool vanishing = f.scale_a <= kVanishing && f.scale_b <= kVanishing;
    const double ratio = f.scale_b > 0.0 ? f.scale_a / f.scale_b : 0.0;
    const double target = std::sqrt(std::abs(cfg.zeta_scaling.second) / std::abs(cfg.zeta_scaling.first));
    c.pass = vanishing || (ratio >= 0.8 * target && ratio <= 1.3 * target);
    c.detail = {{"eps", cfg.eps.back()},
                {"zeta_a", {cfg.zeta_scaling.first.real(), cfg.zeta_scaling.first.imag()}},
                {"zeta_b", {cfg.zeta_scaling.second.real(), cfg.zeta_scaling.second.imag()}},
                {"norm_a", f.scale_a},
                {"norm_b", f.scale_b},
                {"ratio", ratio},
                {"target", target},
                {"window", {0.8 * target, 1.3 * target}}};
    rep.checks.push_back(c);
    rep.runtimes["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

namespace {

// F(x, t) = scale (1 + sin(pi x)) tau(t); tau = 1 for r = inf, 1 + cos(2 pi t) / 2 otherwise.
double forcing_profile(double x) { return 1.0 + std::sin(kPi * x); }
double forcing_time(double t, double r) { return r == kInfinity ? 1.0 : 1.0 + 0.5 * std::cos(2.0 * kPi * t); }

// ||F||_{L_r(0, T; L_2)} by the trapezoidal rule on the sample grid (sup for r = inf).
double forcing_norm(const SweepConfig& cfg, double r) {
    const int M = 4096;
    double s2 = 0.0;
    for (int i = 0; i <= M; ++i) {
        const double w = (i == 0 || i == M) ? 0.5 : 1.0;
        s2 += w * std::pow(forcing_profile(cfg.length * i / M), 2);
    }
    const double space = cfg.forcing_scale * std::sqrt(s2 * cfg.length / M);
    if (r == kInfinity) return space;
    const double dt = cfg.horizon / cfg.time_steps;
    double acc = 0.0;
    for (int j = 0; j <= cfg.time_steps; ++j) {
        const double w = (j == 0 || j == cfg.time_steps) ? 0.5 : 1.0;
        acc += w * std::pow(std::abs(forcing_time(j * dt, r)), r);
    }
    return space * std::pow(acc * dt, 1.0 / r);
}

}  // namespace

ConvergenceReport run_duhamel_sweep(const SweepConfig& cfg) {
    validate_sweep_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const LabSetup s = prepare_lab(cfg, cfg.n_per, std::nullopt);
    const int count = static_cast<int>(cfg.eps.size());
    const int n = s.cd.n();
    const double dt = cfg.horizon / cfg.time_steps;
    std::vector<std::vector<double>> sup(count, std::vector<double>(cfg.r_values.size()));
    parallel_for(count, cfg.jobs, [&](int k) {
        const Operators o = build_operators(s, cfg.length, cfg.eps[k]);
        const int NI = o.g.interior_nodes();
        CVec profile(static_cast<Eigen::Index>(NI) * n);
        for (int i = 1; i <= NI; ++i)
            for (int c = 0; c < n; ++c) profile((i - 1) * n + c) = cfg.forcing_scale * forcing_profile(o.g.x(i));
        const CVec phi = CVec::Zero(profile.size());
        NormTarget L2;
        L2.comps = n;
        for (size_t ri = 0; ri < cfg.r_values.size(); ++ri) {
            std::vector<CVec> F;
            for (int j = 0; j <= cfg.time_steps; ++j) F.push_back(forcing_time(j * dt, cfg.r_values[ri]) * profile);
            const auto ue = duhamel_solve(o.Fe, phi, F, dt, cfg.duhamel_times);
            const auto u0 = duhamel_solve(o.F0, phi, F, dt, cfg.duhamel_times);
            double m = 0.0;
            for (size_t q = 0; q < ue.size(); ++q) {
                const CVec d = embed_rows(ue[q] - u0[q], o.g, n);
                m = std::max(m, vector_norm(d, o.g, L2));
            }
            sup[k][ri] = m;
        }
    });

    ConvergenceReport rep;
    rep.kind = "duhamel";
    rep.metadata = setup_metadata(cfg, s);
    nlohmann::json norms = nlohmann::json::array();
    for (size_t ri = 0; ri < cfg.r_values.size(); ++ri) {
        const double r = cfg.r_values[ri];
        const std::string label = r == kInfinity ? "r=inf" : "r=" + format_time_label(r);
        NormTable raw;
        raw.norm = "sup_L2";
        raw.time = label;
        raw.eps = cfg.eps;
        for (int k = 0; k < count; ++k) raw.values.push_back(sup[k][ri]);
        NormTable scaled = raw;
        scaled.norm = "sup_L2_over_theta_factor";
        for (int k = 0; k < count; ++k) scaled.values[k] /= theta_rate(cfg.eps[k], r) / cfg.eps[k];
        scaled.gate = range_gate(0.85, 1.15);
        finish_table(raw);
        finish_table(scaled);
        rep.tables.push_back(std::move(raw));
        rep.tables.push_back(std::move(scaled));
        norms.push_back({{"r", label}, {"forcing_norm", forcing_norm(cfg, r)}});
    }
    rep.metadata["forcing"] = {{"profile", "1 + sin(pi x)"},
                               {"time_factor", "1 for r = inf, 1 + cos(2 pi t) / 2 otherwise"},
                               {"scale", cfg.forcing_scale},
                               {"dt", dt},
                               {"times", cfg.duhamel_times},
                               {"norms", norms}};
    rep.runtimes["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

void write_report(const ConvergenceReport& report, const std::string& dir, const std::string& stem) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail_validation("InvalidArgument", "cannot create output directory " + dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        if (!out) fail_validation("InvalidArgument", "cannot write " + name);
        return out;
    };
    {
        auto out = open(stem + ".json");
        out << report.to_json().dump(2) << '\n';
    }
    char buf[128];
    {
        auto out = open(stem + "_tables.csv");
        out << "norm,time,eps,value\n";
        for (const auto& t : report.tables)
            for (size_t k = 0; k < t.eps.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g", t.eps[k], t.values[k]);
                out << t.norm << ',' << t.time << ',' << buf << '\n';
            }
    }
    for (const auto& t : report.tables) {
        std::string tag = t.norm + "_" + t.time;
        for (char& ch : tag)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '.' && ch != '-') ch = '_';
        auto out = open(stem + "_plot_" + tag + ".dat");
        out << "# log10(eps) log10(value)\n";
        for (size_t k = 0; k < t.eps.size(); ++k) {
            if (!(t.values[k] > 0.0)) continue;
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", std::log10(t.eps[k]), std::log10(t.values[k]));
            out << buf;
        }
    }
    {
        auto out = open(stem + "_timings.json");
        out << nlohmann::json(report.runtimes).dump(2) << '\n';
    }
}

}  // namespace homlab
