#include "homlab/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace homlab {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
    fail_validation("InvalidArgument", "config key '" + key + "': " + what);
}

using Setter = std::function<void(const json&)>;

void apply_object(const json& j, const std::string& where, const std::map<std::string, Setter>& setters) {
    if (!j.is_object()) bad_key(where, "expected an object");
    for (const auto& [key, value] : j.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        const auto it = setters.find(key);
        if (it == setters.end()) bad_key(path, "unknown key");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            bad_key(path, e.what());
        }
    }
}

double as_double(const json& v) {
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity")) return kInfinity;
    if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
    return v.get<double>();
}

std::vector<double> as_doubles(const json& v) {
    if (!v.is_array()) throw json::type_error::create(302, "expected an array", &v);
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_double(x));
    return out;
}

cplx as_complex(const json& v) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2) return {as_double(v[0]), as_double(v[1])};
    throw json::type_error::create(302, "expected a number or [re, im]", &v);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    RunConfig rc;
    SweepConfig& s = rc.sweep;
    auto dbl = [](double& dst) { return [&dst](const json& v) { dst = as_double(v); }; };
    auto dbls = [](std::vector<double>& dst) { return [&dst](const json& v) { dst = as_doubles(v); }; };
    auto boolean = [](bool& dst) { return [&dst](const json& v) { dst = v.get<bool>(); }; };
    auto integer = [](int& dst) { return [&dst](const json& v) { dst = v.get<int>(); }; };

    std::map<std::string, Setter> top{
        {"preset", [&](const json& v) { s.preset = v.get<std::string>(); }},
        {"preset_options",
         [&](const json& v) {
             apply_object(v, "preset_options",
                          {{"cell_points", integer(s.preset_options.cell_points)},
                           {"seed", [&](const json& x) { s.preset_options.seed = x.get<std::uint64_t>(); }},
                           {"lambda", [&](const json& x) {
                                if (x.is_null())
                                    s.preset_options.lambda.reset();
                                else
                                    s.preset_options.lambda = as_double(x);
                            }}});
         }},
        {"length", dbl(s.length)},
        {"n_per", integer(s.n_per)},
        {"eps", dbls(s.eps)},
        {"max_eps", dbl(s.max_eps)},
        {"times", dbls(s.times)},
        {"norms", [&](const json& v) { s.norms = v.get<std::vector<std::string>>(); }},
        {"delta0", dbl(s.delta0)},
        {"envelope", boolean(s.envelope)},
        {"envelope_times", dbls(s.envelope_times)},
        {"decay_times", dbls(s.decay_times)},
        {"contour_validation", boolean(s.contour_validation)},
        {"contour_times", dbls(s.contour_times)},
        {"discretization_guard", boolean(s.discretization_guard)},
        {"jobs", integer(s.jobs)},
        {"zetas",
         [&](const json& v) {
             if (!v.is_array()) throw json::type_error::create(302, "expected an array", &v);
             s.zetas.clear();
             for (const auto& z : v) s.zetas.push_back(as_complex(z));
         }},
        {"zeta_scaling",
         [&](const json& v) {
             if (!v.is_array() || v.size() != 2) throw json::type_error::create(302, "expected two values", &v);
             s.zeta_scaling = {as_complex(v[0]), as_complex(v[1])};
         }},
        {"r_values", dbls(s.r_values)},
        {"horizon", dbl(s.horizon)},
        {"time_steps", integer(s.time_steps)},
        {"duhamel_times", dbls(s.duhamel_times)},
        {"forcing_scale", dbl(s.forcing_scale)},
        {"cell",
         [&](const json& v) {
             apply_object(v, "cell",
                          {{"scheme",
                            [&](const json& x) {
                                const auto name = x.get<std::string>();
                                if (name == "spectral")
                                    rc.cell_scheme = CellScheme::Spectral;
                                else if (name == "finite_difference")
                                    rc.cell_scheme = CellScheme::FiniteDifference;
                                else
                                    bad_key("cell.scheme", "expected spectral or finite_difference");
                            }},
                           {"points", [&](const json& x) { rc.cell_points = x.get<std::vector<int>>(); }}});
         }},
        {"evolve",
         [&](const json& v) {
             EvolveOptions& e = rc.evolve;
             apply_object(v, "evolve",
                          {{"eps", dbl(e.eps)},
                           {"t", dbl(e.t)},
                           {"contour", boolean(e.contour)},
                           {"initial", [&](const json& x) {
                                apply_object(x, "evolve.initial",
                                             {{"type", [&](const json& y) { e.initial.type = y.get<std::string>(); }},
                                              {"mode", integer(e.initial.mode)}});
                            }}});
         }},
        {"sweeps", [&](const json& v) { rc.sweeps = v.get<std::vector<std::string>>(); }},
        {"output", [&](const json& v) { rc.output = v.get<std::string>(); }},
    };
    apply_object(j, "", top);

    if (s.jobs < 0) bad_key("jobs", "must be >= 0");
    for (const auto& k : rc.sweeps)
        if (k != "parabolic" && k != "elliptic" && k != "duhamel") bad_key("sweeps", "unknown sweep '" + k + "'");
    for (int p : rc.cell_points)
        if (p < 4) bad_key("cell.points", "need at least 4 points per axis");
    if (rc.evolve.initial.type != "sine" && rc.evolve.initial.type != "bump")
        bad_key("evolve.initial.type", "expected sine or bump");
    if (rc.evolve.initial.mode < 1) bad_key("evolve.initial.mode", "must be >= 1");
    if (!(rc.evolve.t >= 0.0)) bad_key("evolve.t", "must be >= 0");
    if (rc.evolve.contour && !(rc.evolve.t > 0.0)) bad_key("evolve.contour", "needs t > 0");
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("InvalidArgument", "config not found: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail_validation("InvalidArgument", "config is not valid JSON: " + std::string(e.what()));
    }
    return parse_run_config(j);
}

namespace {

struct Context {
    RunConfig rc;
    fs::path out_dir;
    std::ostream& out;
};

std::ofstream open_file(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail_validation("InvalidArgument", "cannot write " + p.string());
    return f;
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail_validation("InvalidArgument", "cannot create output directory " + p.string());
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string fmt(const CMat& m) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) s += "; ";
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            if (k) s += ' ';
            const cplx v = m(i, k);
            s += fmt(v.real());
            if (v.imag() != 0.0) s += (v.imag() < 0 ? "-" : "+") + fmt(std::abs(v.imag())) + "i";
        }
    }
    return s + "]";
}

void write_field_csv(const fs::path& path, const PeriodicField& f, const std::string& label, double shift) {
    auto o = open_file(path);
    const int d = f.grid.dim();
    for (int a = 0; a < d; ++a) o << (a ? ",y" : "y") << a;
    for (int r = 0; r < f.rows; ++r)
        for (int c = 0; c < f.cols; ++c)
            o << ',' << label << '_' << r << '_' << c << "_re," << label << '_' << r << '_' << c << "_im";
    o << '\n';
    char buf[64];
    for (int k = 0; k < f.grid.size(); ++k) {
        const auto y = f.grid.node(k, shift);
        for (int a = 0; a < d; ++a) {
            std::snprintf(buf, sizeof buf, a ? ",%.17g" : "%.17g", y[a]);
            o << buf;
        }
        for (int r = 0; r < f.rows; ++r)
            for (int c = 0; c < f.cols; ++c) {
                std::snprintf(buf, sizeof buf, ",%.17g,%.17g", f[k](r, c).real(), f[k](r, c).imag());
                o << buf;
            }
        o << '\n';
    }
}

struct CellRun {
    CoefficientSet coeffs;
    CellData cd;
};

CellRun run_cell(const RunConfig& rc) {
    const SweepConfig& s = rc.sweep;
    PresetOptions po = s.preset_options;
    po.scheme = rc.cell_scheme;
    if (rc.cell_scheme == CellScheme::FiniteDifference && !rc.cell_points.empty()) po.cell_points = rc.cell_points[0];
    CellRun r;
    r.coeffs = make_preset(s.preset, po);
    const int d = r.coeffs.d();
    std::vector<int> points = rc.cell_points;
    if (points.empty()) points.assign(d, 64);
    if (static_cast<int>(points.size()) == 1 && d > 1) points.assign(d, points[0]);
    if (static_cast<int>(points.size()) != d) fail_validation("InvalidArgument", "cell.points must give one count per axis");
    if (!r.coeffs.lambda) {
        double lambda = 0.0;
        if (d == 1)
            for (double e : s.eps) lambda = std::max(lambda, calibrate_lambda(r.coeffs, make_domain_grid(s.length, e, s.n_per)));
        r.coeffs.lambda = lambda;
    }
    r.cd = assemble_cell_data(r.coeffs, PeriodicGrid(r.coeffs.lattice, points), rc.cell_scheme,
                              s.length * std::sqrt(static_cast<double>(d)));
    return r;
}

int cmd_cell(Context& ctx) {
    const CellRun r = run_cell(ctx.rc);
    const CellData& cd = r.cd;
    ensure_dir(ctx.out_dir);
    const double gshift = flux_shift(cd.scheme);
    write_field_csv(ctx.out_dir / "cell_Lambda.csv", cd.Lambda, "Lambda", 0.0);
    write_field_csv(ctx.out_dir / "cell_LambdaTilde.csv", cd.LambdaTilde, "LambdaTilde", 0.0);
    write_field_csv(ctx.out_dir / "cell_g.csv", cd.g_flux, "g", gshift);
    json j = cd.to_json(false);
    j["preset"] = ctx.rc.sweep.preset;
    j["fields"] = {{"Lambda", "cell_Lambda.csv"}, {"LambdaTilde", "cell_LambdaTilde.csv"}, {"g", "cell_g.csv"}};
    open_file(ctx.out_dir / "cell_data.json") << j.dump(2) << '\n';

    std::string summary;
    summary += "preset " + ctx.rc.sweep.preset + " (" +
               (cd.scheme == CellScheme::FiniteDifference ? "finite_difference" : "spectral") + ", " +
               std::to_string(cd.grid.size()) + " nodes)\n";
    summary += "g0 = " + fmt(cd.g0) + "\n";
    summary += "voigt_margin = " + fmt(cd.voigt_margin) + "\n";
    summary += "reuss_margin = " + fmt(cd.reuss_margin) + "\n";
    summary += "V = " + fmt(cd.V) + "\n";
    summary += "W = " + fmt(cd.W) + "\n";
    summary += "lambda = " + fmt(cd.lambda) + "\n";
    summary += "c_flat = " + fmt(cd.c_flat) + "\n";
    summary += std::string("zero_corrector = ") + (cd.zero_corrector ? "true" : "false") + "\n";
    open_file(ctx.out_dir / "cell_summary.txt") << summary;
    ctx.out << summary;
    return kExitOk;
}

int cmd_effective(Context& ctx) {
    const RunConfig& rc = ctx.rc;
    SweepConfig cfg = rc.sweep;
    const LabSetup lab = prepare_lab(cfg, cfg.n_per);
    const CellData& cd = lab.cd;
    const DomainGrid g = make_domain_grid(cfg.length, rc.evolve.eps, cfg.n_per);

    CMat first = CMat::Zero(cd.n(), cd.n());
    for (const auto& a : cd.abar) first += a + a.adjoint();
    first -= cd.b[0].adjoint() * cd.V + cd.V.adjoint() * cd.b[0];
    const CMat zeroth = cd.Qbar - cd.W + lab.lambda * cd.Q0bar;

    ensure_dir(ctx.out_dir);
    write_coo((ctx.out_dir / "B_eps.coo").string(), assemble_Beps(lab.coeffs, g, lab.lambda));
    write_coo((ctx.out_dir / "B0.coo").string(), assemble_B0(cd, g));
    json j{{"preset", cfg.preset},
           {"eps", g.eps},
           {"n_per", g.n_per},
           {"N", g.N},
           {"h", g.h},
           {"lambda", lab.lambda},
           {"c_flat", cd.c_flat},
           {"c_star", cd.c_star},
           {"g0", matrix_to_json(cd.g0)},
           {"first_order", matrix_to_json(first)},
           {"zeroth_order", matrix_to_json(zeroth)},
           {"Q0bar", matrix_to_json(cd.Q0bar)},
           {"cell", cd.to_json(false)},
           {"matrices", {{"B_eps", "B_eps.coo"}, {"B0", "B0.coo"}}}};
    open_file(ctx.out_dir / "effective.json") << j.dump(2) << '\n';
    ctx.out << "g0 = " << fmt(cd.g0) << "\nfirst_order = " << fmt(first) << "\nzeroth_order = " << fmt(zeroth)
            << "\nlambda = " << fmt(lab.lambda) << "\nc_flat = " << fmt(cd.c_flat) << '\n';
    return kExitOk;
}

CVec initial_data(const InitialData& init, const DomainGrid& g, int n) {
    CVec phi(static_cast<Eigen::Index>(g.interior_nodes()) * n);
    for (int i = 1; i < g.N; ++i) {
        const double x = g.x(i) / g.length;
        const double v = init.type == "sine" ? std::sin(init.mode * kPi * x) : 16.0 * x * x * (1 - x) * (1 - x);
        for (int c = 0; c < n; ++c) phi((i - 1) * n + c) = v;
    }
    return phi;
}

int cmd_evolve(Context& ctx) {
    const RunConfig& rc = ctx.rc;
    const EvolveOptions& ev = rc.evolve;
    SweepConfig cfg = rc.sweep;
    cfg.eps = {ev.eps};
    const LabSetup lab = prepare_lab(cfg, cfg.n_per);
    const CellData& cd = lab.cd;
    const int n = cd.n(), m = cd.m();
    const DomainGrid g = make_domain_grid(cfg.length, ev.eps, cfg.n_per);

    const SpMat Be = assemble_Beps(lab.coeffs, g, lab.lambda);
    const Factorization Fe = factorize(Be, sandwich_f(lab.coeffs, g));
    const Factorization F0 =
        factorize(assemble_B0(cd, g), kron_block(identity_sparse(g.interior_nodes()), inverse_sqrt_hpd(cd.Q0bar)));
    const CVec phi = initial_data(ev.initial, g, n);
    const SpMat P = embed_interior(g, n);
    const CVec u_eps = P * semigroup_apply(Fe, ev.t, phi);
    const CVec u0 = P * semigroup_apply(F0, ev.t, phi);

    const auto fields = sample_corrector_fields(cd, g);
    const CVec v_eps = u0 + ev.eps * (corrector_KD(cd, fields, g) * u0);
    const CVec p_eps = flux_true(cd, fields, g) * u_eps;
    const CVec flux = flux_approx(cd, fields, g) * u0;

    json summary{{"preset", cfg.preset}, {"eps", ev.eps}, {"t", ev.t},         {"N", g.N},
                 {"h", g.h},             {"lambda", lab.lambda}, {"c_flat", cd.c_flat}};
    std::optional<CVec> contour;
    if (ev.contour) {
        const ContourResult cr = contour_semigroup(Be, assemble_Q0(lab.coeffs, g), CMat(phi), ev.t, cd.c_flat);
        contour = P * cr.value.col(0);
        const double dev = (*contour - u_eps).cwiseAbs().maxCoeff() / std::max(u_eps.cwiseAbs().maxCoeff(), 1e-300);
        summary["contour"] = {{"max_relative_deviation", dev}, {"T_max", cr.T_max}, {"tail_bound", cr.tail_bound},
                              {"resolvent_solves", cr.nodes}};
        ctx.out << "contour max relative deviation = " << fmt(dev) << '\n';
    }
    ensure_dir(ctx.out_dir);
    write_bundle_csv((ctx.out_dir / "evolve.csv").string(), g, u_eps, u0, v_eps, p_eps, flux, n, m,
                     contour ? &*contour : nullptr);
    NormTarget l2;
    l2.comps = n;
    summary["L2_u_eps_minus_u0"] = vector_norm(u_eps - u0, g, l2);
    NormTarget h1 = l2;
    h1.kind = NormKind::H1;
    summary["H1_u_eps_minus_v_eps"] = vector_norm(u_eps - v_eps, g, h1);
    open_file(ctx.out_dir / "evolve_summary.json") << summary.dump(2) << '\n';
    ctx.out << "||u_eps - u0||_L2 = " << fmt(summary["L2_u_eps_minus_u0"].get<double>())
            << "\n||u_eps - v_eps||_H1 = " << fmt(summary["H1_u_eps_minus_v_eps"].get<double>()) << '\n';
    return kExitOk;
}

void print_report(std::ostream& out, const json& r) {
    for (const auto& t : r.at("tables")) {
        out << r.at("kind").get<std::string>() << ' ' << t.at("norm").get<std::string>() << " ["
            << t.at("time").get<std::string>() << "] slope=";
        out << (t.at("fit").is_null() ? std::string("-") : fmt(t.at("fit").at("slope").get<double>()));
        out << ' ' << t.at("status").get<std::string>() << '\n';
    }
    for (const auto& c : r.at("checks"))
        out << r.at("kind").get<std::string>() << " check " << c.at("name").get<std::string>() << ' '
            << (c.at("pass").get<bool>() ? "pass" : "fail") << '\n';
}

int cmd_sweep(Context& ctx) {
    const SweepConfig& cfg = ctx.rc.sweep;
    bool ok = true;
    for (const auto& kind : ctx.rc.sweeps) {
        const ConvergenceReport rep = kind == "parabolic" ? run_parabolic_sweep(cfg)
                                      : kind == "elliptic" ? run_elliptic_sweep(cfg)
                                                           : run_duhamel_sweep(cfg);
        write_report(rep, ctx.out_dir.string(), kind);
        print_report(ctx.out, rep.to_json());
        ok = ok && rep.passed();
    }
    ctx.out << (ok ? "all gates pass" : "gate failure") << '\n';
    return ok ? kExitOk : kExitGateFailed;
}

int cmd_report(Context& ctx) {
    std::string text;
    bool ok = true, any = false;
    json summary = json::array();
    for (const std::string kind : {"parabolic", "elliptic", "duhamel"}) {
        const fs::path p = ctx.out_dir / (kind + ".json");
        if (!fs::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        json r;
        try {
            r = json::parse(in);
            std::ostringstream os;
            print_report(os, r);
            text += os.str();
            ok = ok && r.at("pass").get<bool>();
        } catch (const json::exception& e) {
            fail_validation("InvalidArgument", "malformed report " + p.string() + ": " + e.what());
        }
        summary.push_back({{"kind", kind}, {"pass", r.at("pass")}});
        any = true;
    }
    if (!any) fail_validation("InvalidArgument", "no reports found in " + ctx.out_dir.string());
    text += ok ? "all gates pass\n" : "gate failure\n";
    open_file(ctx.out_dir / "summary.txt") << text;
    open_file(ctx.out_dir / "summary.json") << json{{"reports", summary}, {"pass", ok}}.dump(2) << '\n';
    ctx.out << text;
    return ok ? kExitOk : kExitGateFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Periodic homogenization lab", "homlab"};
    std::string config_path;
    std::string out_flag;
    int jobs = -1;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_flag, "output directory");
    auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads (0: all cores)");
    auto* seed_opt = app.add_option("--seed", seed, "seed for random presets");
    std::map<std::string, std::function<int(Context&)>> commands{
        {"cell", cmd_cell}, {"effective", cmd_effective}, {"evolve", cmd_evolve}, {"sweep", cmd_sweep}, {"report", cmd_report}};
    const std::map<std::string, std::string> help{{"cell", "solve the cell problems and write the effective constants"},
                                                  {"effective", "assemble B_eps and the effective operator"},
                                                  {"evolve", "evolve one (eps, t) pair and write snapshots"},
                                                  {"sweep", "run the configured eps sweeps and gate the rates"},
                                                  {"report", "summarize reports in the output directory"}};
    for (const auto& [name, text] : help) app.add_subcommand(name, text)->fallthrough();
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitValidation;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        RunConfig rc;
        if (!config_path.empty())
            rc = load_run_config(config_path);
        else if (cmd != "report")
            fail_validation("InvalidArgument", "config not found: --config is required");
        if (jobs_opt->count()) {
            if (jobs < 0) fail_validation("InvalidArgument", "--jobs must be >= 0");
            rc.sweep.jobs = jobs;
        }
        if (seed_opt->count()) rc.sweep.preset_options.seed = seed;
        if (cmd != "report") validate_sweep_config(rc.sweep);
        std::string dir = rc.output;
        if (const char* env = std::getenv("HOMLAB_OUT"); env && *env) dir = env;
        if (!out_flag.empty()) dir = out_flag;
        Context ctx{std::move(rc), fs::path(dir), out};
        return commands.at(cmd)(ctx);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::Validation ? kExitValidation : kExitSolver;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace homlab
