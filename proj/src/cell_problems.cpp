#include "homlab/cell_problems.hpp"

#include <cmath>

namespace homlab {

namespace {

// Column k of a field as an (rows x N) grid vector.
CMat field_column(const PeriodicField& f, int k) {
    CMat out(f.rows, f.grid.size());
    for (int p = 0; p < f.grid.size(); ++p) out.col(p) = f[p].col(k);
    return out;
}

void set_field_column(PeriodicField& f, int k, const CMat& u) {
    for (int p = 0; p < f.grid.size(); ++p) f[p].col(k) = u.col(p);
}

// Rows: -(sum_j D_j a_j^* + v) e_k for k = 0..n-1, stacked as n blocks of (n x N).
std::vector<CMat> tilde_rhs(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme) {
    const int n = c.n(), N = grid.size();
    std::vector<CMat> out(n, CMat::Zero(n, N));
    if (c.singular_potential) {
        const PeriodicField v = sample_field(c.singular_potential, grid);
        for (int k = 0; k < n; ++k)
            for (int p = 0; p < N; ++p) out[k].col(p) -= v[p].col(k);
    }
    for (int j = 0; j < c.d() && c.has_first_order(); ++j) {
        const PeriodicField aj = sample_field(c.a[j], grid);
        for (int k = 0; k < n; ++k) {
            CMat col(n, N);
            for (int p = 0; p < N; ++p) col.col(p) = aj[p].adjoint().col(k);
            const CMat deriv = scheme == CellScheme::FiniteDifference ? centered_derivative(col, grid)
                                                                      : spectral_derivative(col, grid, j);
            out[k] -= deriv;
        }
    }
    return out;
}

}  // namespace

PeriodicField solve_Lambda(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme,
                           const EllipticSolveOptions& opts) {
    const PeriodicField g = sample_field(c.g, grid, flux_shift(scheme));
    const int m = c.m(), n = c.n();
    PeriodicField out(grid, n, m);
    for (int k = 0; k < m; ++k) {
        CMat gk = field_column(g, k);
        const CMat rhs = -apply_bD_adjoint(c.symbol.b, gk, grid, scheme);
        set_field_column(out, k, periodic_elliptic_solve(g, c.symbol.b, rhs, scheme, opts).u);
    }
    return out;
}

PeriodicField solve_LambdaTilde(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme,
                                const EllipticSolveOptions& opts) {
    const PeriodicField g = sample_field(c.g, grid, flux_shift(scheme));
    const int n = c.n();
    PeriodicField out(grid, n, n);
    const auto rhs = tilde_rhs(c, grid, scheme);
    for (int k = 0; k < n; ++k)
        set_field_column(out, k, periodic_elliptic_solve(g, c.symbol.b, rhs[k], scheme, opts).u);
    return out;
}

PeriodicField apply_bD_field(const std::vector<CMat>& b, const PeriodicField& u, CellScheme scheme) {
    PeriodicField out(u.grid, static_cast<int>(b[0].rows()), u.cols);
    for (int k = 0; k < u.cols; ++k) set_field_column(out, k, apply_bD(b, field_column(u, k), u.grid, scheme));
    return out;
}

CMat effective_tensor(const PeriodicField& g_flux, const PeriodicField& bLambda) {
    CMat s = CMat::Zero(g_flux.rows, g_flux.cols);
    const CMat id = CMat::Identity(g_flux.rows, g_flux.cols);
    for (int p = 0; p < g_flux.grid.size(); ++p) s += g_flux[p] * (bLambda[p] + id);
    return hermitian_part(s / static_cast<double>(g_flux.grid.size()));
}

LowerOrderConstants lower_order_constants(const PeriodicField& g_flux, const PeriodicField& bLambda,
                                          const PeriodicField& bLambdaTilde, const PeriodicField& LambdaTilde,
                                          const CMat& tilde_rhs_rows) {
    const int N = g_flux.grid.size();
    LowerOrderConstants out;
    out.V = CMat::Zero(bLambda.cols, bLambdaTilde.cols);
    out.W = CMat::Zero(bLambdaTilde.cols, bLambdaTilde.cols);
    for (int p = 0; p < N; ++p) {
        const CMat gt = g_flux[p] * bLambdaTilde[p];
        out.V += bLambda[p].adjoint() * gt;
        out.W += bLambdaTilde[p].adjoint() * gt;
    }
    out.V /= static_cast<double>(N);
    out.W = hermitian_part(out.W / static_cast<double>(N));

    // W = <LambdaTilde, rhs> through Fourier coefficients.
    const int n = LambdaTilde.rows;
    out.W_parseval = CMat::Zero(n, n);
    std::vector<CMat> lt_hat(n), rhs_hat(n);
    for (int k = 0; k < n; ++k) {
        lt_hat[k] = fft_forward(field_column(LambdaTilde, k), g_flux.grid);
        rhs_hat[k] = fft_forward(tilde_rhs_rows.middleRows(k * n, n), g_flux.grid);
    }
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            out.W_parseval(k, l) = (lt_hat[k].conjugate().cwiseProduct(rhs_hat[l])).sum() / (double(N) * N);
    out.W_parseval = hermitian_part(out.W_parseval);
    return out;
}

CellData assemble_cell_data(const CoefficientSet& c, const PeriodicGrid& grid, CellScheme scheme,
                            double domain_diameter, const EllipticSolveOptions& opts) {
    validate_coefficients(c);
    CellData cd;
    cd.name = c.name;
    cd.scheme = scheme;
    cd.grid = grid;
    cd.b = c.symbol.b;
    cd.bounds = validate_symbol(c.symbol);

    const double sh = flux_shift(scheme);
    cd.g_flux = sample_field(c.g, grid, sh);
    cd.Lambda = solve_Lambda(c, grid, scheme, opts);
    cd.LambdaTilde = solve_LambdaTilde(c, grid, scheme, opts);
    cd.bLambda = apply_bD_field(cd.b, cd.Lambda, scheme);
    cd.bLambdaTilde = apply_bD_field(cd.b, cd.LambdaTilde, scheme);

    const int m = c.m(), n = c.n(), N = grid.size();
    cd.gtilde = PeriodicField(grid, m, m);
    for (int p = 0; p < N; ++p) cd.gtilde[p] = cd.g_flux[p] * (cd.bLambda[p] + CMat::Identity(m, m));
    cd.g0 = effective_tensor(cd.g_flux, cd.bLambda);
    cd.g_over = hermitian_part(mean_value(cd.g_flux));
    cd.g_under = hermitian_part(underline_mean(cd.g_flux));
    {
        Eigen::SelfAdjointEigenSolver<CMat> lo(hermitian_part(cd.g0 - cd.g_under));
        Eigen::SelfAdjointEigenSolver<CMat> hi(hermitian_part(cd.g_over - cd.g0));
        cd.reuss_margin = lo.eigenvalues().minCoeff();
        cd.voigt_margin = hi.eigenvalues().minCoeff();
    }

    const auto rhs = tilde_rhs(c, grid, scheme);
    CMat rhs_rows(n * n, N);
    for (int k = 0; k < n; ++k) rhs_rows.middleRows(k * n, n) = rhs[k];
    const auto lo = lower_order_constants(cd.g_flux, cd.bLambda, cd.bLambdaTilde, cd.LambdaTilde, rhs_rows);
    cd.V = lo.V;
    cd.W = lo.W;
    cd.W_parseval = lo.W_parseval;

    const PeriodicField Qs = sample_field(c.Q, grid);
    const PeriodicField Q0s = sample_field(c.Q0, grid);
    cd.Qbar = hermitian_part(mean_value(Qs));
    cd.Q0bar = hermitian_part(mean_value(Q0s));
    for (int j = 0; j < c.d() && c.has_first_order(); ++j) cd.abar.push_back(mean_value(sample_field(c.a[j], grid)));
    cd.lambda = c.lambda.value_or(0.0);

    cd.ginv_max = max_inverse_norm(cd.g_flux);
    if (sh != 0.0) cd.ginv_max = std::max(cd.ginv_max, max_inverse_norm(sample_field(c.g, grid)));
    cd.Q0_max = max_norm(Q0s);
    cd.diam = domain_diameter;
    cd.c_star = 0.25 * cd.bounds.alpha0 / cd.ginv_max;
    cd.c_flat = cd.c_star / (cd.Q0_max * domain_diameter * domain_diameter);
    cd.c3 = std::sqrt((1.0 + domain_diameter * domain_diameter) / cd.c_star);

    // b(D)^* g_k = 0 for every column means Lambda = 0 and g0 = mean g.
    double res = 0.0, gscale = 0.0;
    for (int k = 0; k < m; ++k) {
        const CMat gk = field_column(cd.g_flux, k);
        res = std::max(res, apply_bD_adjoint(cd.b, gk, grid, scheme).norm() / std::sqrt(double(N)));
        gscale = std::max(gscale, gk.norm() / std::sqrt(double(N)));
    }
    cd.zero_corrector_residual = res / std::max(1.0, gscale);
    // and the LambdaTilde right-hand side must vanish as well
    const double rhs_size = rhs_rows.norm() / std::sqrt(double(N));
    cd.zero_corrector = cd.zero_corrector_residual <= 1e-9 && rhs_size <= 1e-9;
    cd.g0_equals_under = (cd.g0 - cd.g_under).norm() <= 1e-8 * std::max(1.0, cd.g0.norm());
    return cd;
}

nlohmann::json matrix_to_json(const CMat& m) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r, c;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            r.push_back(m(i, j).real());
            c.push_back(m(i, j).imag());
        }
        re.push_back(r);
        im.push_back(c);
    }
    return {{"re", re}, {"im", im}};
}

CMat matrix_from_json(const nlohmann::json& j) {
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    const auto rows = re.size();
    const auto cols = rows ? re[0].size() : 0;
    CMat m(rows, cols);
    for (size_t i = 0; i < rows; ++i)
        for (size_t k = 0; k < cols; ++k) m(i, k) = cplx(re[i][k].get<double>(), im[i][k].get<double>());
    return m;
}

namespace {

nlohmann::json field_to_json(const PeriodicField& f) {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& v : f.values) vals.push_back(matrix_to_json(v));
    return {{"rows", f.rows}, {"cols", f.cols}, {"values", vals}};
}

}  // namespace

nlohmann::json CellData::to_json(bool include_fields) const {
    nlohmann::json j;
    j["name"] = name;
    j["scheme"] = scheme == CellScheme::FiniteDifference ? "finite_difference" : "spectral";
    j["grid"] = {{"periods", grid.lattice.periods}, {"n", grid.n}};
    nlohmann::json bj = nlohmann::json::array();
    for (const auto& x : b) bj.push_back(matrix_to_json(x));
    j["symbol"] = bj;
    j["g0"] = matrix_to_json(g0);
    j["g_under"] = matrix_to_json(g_under);
    j["g_over"] = matrix_to_json(g_over);
    j["V"] = matrix_to_json(V);
    j["W"] = matrix_to_json(W);
    j["W_parseval"] = matrix_to_json(W_parseval);
    nlohmann::json aj = nlohmann::json::array();
    for (const auto& x : abar) aj.push_back(matrix_to_json(x));
    j["abar"] = aj;
    j["Qbar"] = matrix_to_json(Qbar);
    j["Q0bar"] = matrix_to_json(Q0bar);
    j["lambda"] = lambda;
    j["alpha0"] = bounds.alpha0;
    j["alpha1"] = bounds.alpha1;
    j["ginv_max"] = ginv_max;
    j["Q0_max"] = Q0_max;
    j["diam"] = diam;
    j["c_star"] = c_star;
    j["c_flat"] = c_flat;
    j["c3"] = c3;
    j["voigt_margin"] = voigt_margin;
    j["reuss_margin"] = reuss_margin;
    j["zero_corrector_residual"] = zero_corrector_residual;
    j["zero_corrector"] = zero_corrector;
    j["g0_equals_under"] = g0_equals_under;
    if (include_fields) {
        j["Lambda"] = field_to_json(Lambda);
        j["LambdaTilde"] = field_to_json(LambdaTilde);
        j["gtilde"] = field_to_json(gtilde);
    }
    return j;
}

}  // namespace homlab
