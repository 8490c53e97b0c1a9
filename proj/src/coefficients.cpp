#include "homlab/coefficients.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace homlab {

CMat Symbol::at(const std::vector<double>& theta) const {
    CMat out = CMat::Zero(m(), n());
    for (int j = 0; j < d(); ++j) out += b[j] * theta[j];
    return out;
}

SymbolBounds validate_symbol(const Symbol& s) {
    if (s.b.empty()) fail_validation("InvalidArgument", "symbol has no blocks");
    if (s.m() < s.n()) fail_validation("RankDeficientSymbol", "symbol requires m >= n");
    for (const auto& bj : s.b)
        if (bj.rows() != s.m() || bj.cols() != s.n()) fail_validation("InvalidArgument", "symbol blocks differ in shape");

    std::vector<std::vector<double>> thetas;
    if (s.d() == 1) {
        thetas = {{1.0}, {-1.0}};
    } else if (s.d() == 2) {
        for (int k = 0; k < 720; ++k) {
            const double phi = 2.0 * kPi * k / 720.0;
            thetas.push_back({std::cos(phi), std::sin(phi)});
        }
    } else {
        fail_validation("InvalidArgument", "symbol dimension must be 1 or 2");
    }
    SymbolBounds out{std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& th : thetas) {
        const CMat bt = s.at(th);
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(bt.adjoint() * bt));
        out.alpha0 = std::min(out.alpha0, es.eigenvalues().minCoeff());
        out.alpha1 = std::max(out.alpha1, es.eigenvalues().maxCoeff());
    }
    if (out.alpha0 <= 1e-12) fail_validation("RankDeficientSymbol", "b(theta)^* b(theta) is singular on the sphere");
    return out;
}

CellFunction constant_function(const CMat& value) {
    return [value](const std::vector<double>&) { return value; };
}

CellFunction scalar_function(std::function<double(const std::vector<double>&)> f) {
    return [f = std::move(f)](const std::vector<double>& y) {
        CMat out(1, 1);
        out(0, 0) = f(y);
        return out;
    };
}

CMat inverse_sqrt_hpd(const CMat& q0) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(q0));
    if (es.eigenvalues().minCoeff() <= 0.0) fail_validation("InvalidArgument", "Q0 must be positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
           es.eigenvectors().adjoint();
}

void validate_coefficients(const CoefficientSet& c) {
    validate_symbol(c.symbol);
    if (c.lattice.dim() != c.d()) fail_validation("InvalidArgument", "lattice and symbol dimensions differ");
    if (!c.g || !c.Q || !c.Q0) fail_validation("InvalidArgument", "coefficient set is incomplete");
    if (!c.a.empty() && static_cast<int>(c.a.size()) != c.d())
        fail_validation("InvalidArgument", "need one first-order coefficient per axis");
    const std::vector<double> y(c.d(), 0.0);
    if (c.g(y).rows() != c.m() || c.g(y).cols() != c.m()) fail_validation("InvalidArgument", "g must be m x m");
    if (c.Q(y).rows() != c.n() || c.Q0(y).rows() != c.n()) fail_validation("InvalidArgument", "Q, Q0 must be n x n");
    if (c.singular_potential && c.singular_potential(y).rows() != c.n())
        fail_validation("InvalidArgument", "the eps^-1 potential must be n x n");
}

MagneticBuild build_scalar_magnetic(const PeriodicGrid& grid, const CellFunction& g, const std::vector<CellFunction>& A,
                                    const CellFunction& v, const CellFunction& V, const CellFunction& Q0) {
    const int d = grid.dim();
    if (static_cast<int>(A.size()) != d) fail_validation("InvalidArgument", "need one vector potential component per axis");

    const PeriodicField vs = sample_field(v, grid);
    double vmax = 0.0;
    for (const auto& x : vs.values) vmax = std::max(vmax, std::abs(x(0, 0)));
    if (std::abs(mean_value(vs)(0, 0)) > 1e-10 * std::max(1.0, vmax))
        fail_validation("NonZeroMeanPotential", "the eps^-1 potential must have zero mean");

    MagneticBuild out;
    const CMat phi = poisson_periodic(vs.entry_row(0, 0), grid);
    out.phi = PeriodicField(grid, 1, 1);
    for (int k = 0; k < grid.size(); ++k) out.phi[k](0, 0) = phi(0, k);

    std::vector<CellFunction> xi_fn;
    for (int j = 0; j < d; ++j) {
        const CMat xi = -kI * spectral_derivative(phi, grid, j);  // -d_j phi
        PeriodicField f(grid, 1, 1);
        for (int k = 0; k < grid.size(); ++k) f[k](0, 0) = cplx(xi(0, k).real(), 0.0);
        out.xi.push_back(f);
        xi_fn.push_back(fourier_interpolant(f));
    }

    CoefficientSet& c = out.coefficients;
    c.name = "scalar_magnetic";
    c.lattice = grid.lattice;
    for (int j = 0; j < d; ++j) {
        CMat e = CMat::Zero(d, 1);
        e(j, 0) = 1.0;
        c.symbol.b.push_back(e);
    }
    c.g = g;
    for (int j = 0; j < d; ++j) {
        c.a.push_back([g, A, xi = xi_fn[j], j, d](const std::vector<double>& y) {
            const CMat gy = g(y);
            cplx eta = 0.0;
            for (int k = 0; k < d; ++k) eta += gy(j, k) * A[k](y)(0, 0);
            CMat out(1, 1);
            out(0, 0) = -eta + kI * xi(y)(0, 0).real();
            return out;
        });
    }
    c.Q = [g, A, V, d](const std::vector<double>& y) {
        const CMat gy = g(y);
        cplx s = V(y)(0, 0);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) s += gy(j, k) * A[j](y)(0, 0) * A[k](y)(0, 0);
        CMat out(1, 1);
        out(0, 0) = s;
        return out;
    };
    c.Q0 = Q0 ? Q0 : constant_function(CMat::Identity(1, 1));
    return out;
}

GroundState ground_state_factorize(const PeriodicGrid& grid, const CellFunction& gcheck, const CellFunction& vcheck,
                                   CellScheme scheme) {
    const int N = grid.size();
    const int d = grid.dim();
    const bool fd = scheme == CellScheme::FiniteDifference;
    if (fd && d != 1) fail_validation("InvalidArgument", "finite-difference ground state needs d = 1");
    std::vector<RMat> partial(d);
    if (fd) {
        partial[0] = RMat::Zero(N, N);
        for (int k = 0; k < N; ++k) {
            partial[0](k, k) = -1.0 / grid.h(0);
            partial[0](k, (k + 1) % N) = 1.0 / grid.h(0);
        }
    } else {
        const CMat id = CMat::Identity(N, N);
        for (int j = 0; j < d; ++j) partial[j] = (kI * spectral_derivative(id, grid, j)).real().transpose();
    }

    const PeriodicField gs = sample_field(gcheck, grid, fd ? 0.5 : 0.0);
    const PeriodicField vs = sample_field(vcheck, grid);
    RMat H = RMat::Zero(N, N);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            RVec gjk(N);
            for (int p = 0; p < N; ++p) gjk(p) = (gs.rows == 1 ? gs[p](0, 0) : gs[p](j, k)).real();
            if (gs.rows == 1 && j != k) continue;
            H += partial[j].transpose() * gjk.asDiagonal() * partial[k];
        }
    for (int p = 0; p < N; ++p) H(p, p) += vs[p](0, 0).real();
    if (!fd) {
        // The spectral derivative drops the Nyquist mode; give it the energy of its symbol instead.
        for (int j = 0; j < d; ++j) {
            const int nj = grid.n[j];
            if (nj % 2 != 0) continue;
            double gmax = 0.0;
            for (int p = 0; p < N; ++p) gmax = std::max(gmax, (gs.rows == 1 ? gs[p](0, 0) : gs[p](j, j)).real());
            const double kn = kPi * nj / grid.lattice.periods[j];
            const double w = gmax * kn * kn / nj;
            for (int p = 0; p < N; ++p)
                for (int q = 0; q < N; ++q) {
                    bool line = true;
                    for (int a = 0; a < d && line; ++a)
                        if (a != j && grid.axis_index(p, a) != grid.axis_index(q, a)) line = false;
                    if (!line) continue;
                    const int sp = grid.axis_index(p, j) % 2 ? -1 : 1, sq = grid.axis_index(q, j) % 2 ? -1 : 1;
                    H(p, q) += w * sp * sq;
                }
        }
    }
    H = 0.5 * (H + H.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<RMat> es(H);
    const double mu0 = es.eigenvalues()(0);
    const double gap = es.eigenvalues()(1) - mu0;
    if (gap < 1e-8) fail_solver("DegenerateGroundState", "spectral gap below 1e-8");

    // inverse iteration with a shift below the ground state
    RVec x = es.eigenvectors().col(0);
    const double sigma = mu0 - 0.5 * gap;
    Eigen::PartialPivLU<RMat> lu(H - sigma * RMat::Identity(N, N));
    double mu = mu0;
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    for (int it = 0; it < 60; ++it) {
        x = lu.solve(x);
        x.normalize();
        mu = x.dot(H * x);
        if ((H * x - mu * x).cwiseAbs().maxCoeff() <= 1e-13 * scale) break;
    }
    if (x.sum() < 0.0) x = -x;
    if (x.minCoeff() <= 0.0) fail_solver("NonPositiveGroundState", "ground state changes sign");
    x /= std::sqrt(x.squaredNorm() / N);

    GroundState out;
    out.shift = mu;
    out.gap = gap;
    out.residual = (H * x - mu * x).cwiseAbs().maxCoeff();
    out.omega = PeriodicField(grid, 1, 1);
    for (int p = 0; p < N; ++p) out.omega[p](0, 0) = x(p);
    out.omega_fn = fd ? grid_lookup(out.omega) : fourier_interpolant(out.omega);
    return out;
}

StrongSingularBuild build_strong_singular(const PeriodicGrid& grid, const CellFunction& gcheck,
                                          const CellFunction& vcheck, const CellFunction& vhat,
                                          const CellFunction& Vcheck, const std::vector<CellFunction>& A) {
    StrongSingularBuild out;
    out.ground = ground_state_factorize(grid, gcheck, vcheck);
    const CellFunction omega = out.ground.omega_fn;
    auto omega2 = [omega](const std::vector<double>& y) { return std::pow(omega(y)(0, 0).real(), 2); };

    const PeriodicField vh = sample_field(vhat, grid);
    double c = 0.0;
    for (int k = 0; k < grid.size(); ++k)
        c += vh[k](0, 0).real() * std::pow(out.ground.omega[k](0, 0).real(), 2);
    c /= grid.size();
    out.vhat_mean = c;

    CellFunction g = [gcheck, omega2](const std::vector<double>& y) -> CMat { return gcheck(y) * omega2(y); };
    CellFunction v = [vhat, omega2, c](const std::vector<double>& y) -> CMat {
        return (vhat(y).array() - c).matrix() * omega2(y);
    };
    CellFunction V = [Vcheck, omega2](const std::vector<double>& y) -> CMat { return Vcheck(y) * omega2(y); };
    CellFunction Q0 = [omega2](const std::vector<double>& y) -> CMat { return CMat::Constant(1, 1, omega2(y)); };

    std::vector<CellFunction> Ause = A;
    if (Ause.empty()) Ause.assign(grid.dim(), constant_function(CMat::Zero(1, 1)));
    out.magnetic = build_scalar_magnetic(grid, g, Ause, v, V, Q0);
    out.magnetic.coefficients.name = "strong_singular";
    return out;
}

StrongSingularBuild build_strong_singular_fd(int n_per, const CellFunction& gcheck, const CellFunction& vcheck,
                                             const CellFunction& vhat, const CellFunction& Vcheck) {
    const PeriodicGrid grid(Lattice::unit(1), {n_per});
    StrongSingularBuild out;
    out.ground = ground_state_factorize(grid, gcheck, vcheck, CellScheme::FiniteDifference);
    const PeriodicField& om = out.ground.omega;

    const PeriodicField gc = sample_field(gcheck, grid, 0.5);
    const PeriodicField vc = sample_field(vcheck, grid);
    const PeriodicField vh = sample_field(vhat, grid);
    const PeriodicField Vc = sample_field(Vcheck, grid);
    double c = 0.0;
    for (int k = 0; k < n_per; ++k) c += vh[k](0, 0).real() * std::norm(om[k](0, 0));
    c /= n_per;
    out.vhat_mean = c;

    PeriodicField g(grid, 1, 1), v(grid, 1, 1), V(grid, 1, 1), q0(grid, 1, 1), vcs(grid, 1, 1), vhs(grid, 1, 1);
    for (int k = 0; k < n_per; ++k) {
        const double w = om[k](0, 0).real(), w2 = w * w;
        g[k](0, 0) = gc[k](0, 0) * w * om[(k + 1) % n_per](0, 0).real();
        v[k](0, 0) = (vh[k](0, 0).real() - c) * w2;
        V[k](0, 0) = Vc[k](0, 0) * w2;
        q0[k](0, 0) = w2;
        vcs[k](0, 0) = vc[k](0, 0).real() - out.ground.shift;
        vhs[k](0, 0) = vh[k](0, 0).real() - c;
    }

    CoefficientSet& cs = out.magnetic.coefficients;
    cs.name = "strong_singular";
    cs.lattice = grid.lattice;
    cs.symbol.b = {CMat::Identity(1, 1)};
    cs.g = grid_lookup(g, 0.5);
    cs.Q = grid_lookup(V);
    cs.Q0 = grid_lookup(q0);
    cs.singular_potential = grid_lookup(v);
    cs.original = OriginalForm{grid_lookup(gc, 0.5), grid_lookup(vcs), grid_lookup(vhs), grid_lookup(Vc),
                               out.ground.omega_fn};
    return out;
}

namespace {

CoefficientSet scalar_1d(const std::string& name, CellFunction g) {
    CoefficientSet c;
    c.name = name;
    c.lattice = Lattice::unit(1);
    c.symbol.b = {CMat::Identity(1, 1)};
    c.g = std::move(g);
    c.Q = constant_function(CMat::Zero(1, 1));
    c.Q0 = constant_function(CMat::Identity(1, 1));
    return c;
}

double two_pi_y(const std::vector<double>& y) { return 2.0 * kPi * y[0]; }

}  // namespace

std::vector<std::string> preset_names() {
    return {"constant", "sine_g", "zero_corrector", "magnetic_sine", "strong_singular_sine", "random_positive",
            "random_positive_2d"};
}

CoefficientSet make_preset(const std::string& name, const PresetOptions& opts) {
    CoefficientSet c;
    if (name == "constant") {
        c = scalar_1d(name, constant_function(CMat::Identity(1, 1)));
    } else if (name == "sine_g") {
        c = scalar_1d(name, scalar_function([](const auto& y) { return 1.0 / (2.0 + std::sin(two_pi_y(y))); }));
    } else if (name == "zero_corrector") {
        c = scalar_1d(name, constant_function(CMat::Identity(1, 1)));
        c.Q = scalar_function([](const auto& y) { return std::cos(two_pi_y(y)); });
        c.Q0 = scalar_function([](const auto& y) { return 1.0 + 0.5 * std::sin(two_pi_y(y)); });
    } else if (name == "magnetic_sine") {
        const PeriodicGrid grid(Lattice::unit(1), {opts.cell_points});
        auto b = build_scalar_magnetic(
            grid, scalar_function([](const auto& y) { return 1.0 / (2.0 + std::sin(two_pi_y(y))); }),
            {scalar_function([](const auto& y) { return 0.5 * std::cos(two_pi_y(y)); })},
            scalar_function([](const auto& y) { return std::sin(two_pi_y(y)); }),
            scalar_function([](const auto& y) { return 0.5 * std::cos(2.0 * two_pi_y(y)); }));
        c = b.coefficients;
        c.name = name;
    } else if (name == "strong_singular_sine" && opts.scheme == CellScheme::FiniteDifference) {
        auto b = build_strong_singular_fd(opts.cell_points, constant_function(CMat::Identity(1, 1)),
                                          scalar_function([](const auto& y) { return 4.0 * std::cos(two_pi_y(y)); }),
                                          scalar_function([](const auto& y) { return std::sin(two_pi_y(y)); }),
                                          constant_function(CMat::Zero(1, 1)));
        c = b.magnetic.coefficients;
        c.name = name;
    } else if (name == "strong_singular_sine") {
        const PeriodicGrid grid(Lattice::unit(1), {opts.cell_points});
        auto b = build_strong_singular(grid, constant_function(CMat::Identity(1, 1)),
                                       scalar_function([](const auto& y) { return 4.0 * std::cos(two_pi_y(y)); }),
                                       scalar_function([](const auto& y) { return std::sin(two_pi_y(y)); }),
                                       constant_function(CMat::Zero(1, 1)));
        c = b.magnetic.coefficients;
        c.name = name;
    } else if (name == "random_positive") {
        c = random_positive_preset(opts.seed, 1);
    } else if (name == "random_positive_2d") {
        c = random_positive_preset(opts.seed, 2);
    } else {
        fail_validation("InvalidArgument", "unknown preset '" + name + "'");
    }
    c.lambda = opts.lambda;
    return c;
}

CoefficientSet random_positive_preset(std::uint64_t seed, int d) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CoefficientSet c;
    c.name = d == 1 ? "random_positive" : "random_positive_2d";
    c.lattice = Lattice::unit(d);
    c.Q = constant_function(CMat::Zero(1, 1));
    c.Q0 = constant_function(CMat::Identity(1, 1));

    // g(y) = M(y) M(y)^* + 0.3 I with M a random trigonometric polynomial of degree 1 per axis.
    std::vector<CMat> modes;
    const int count = 1 + 2 * d;
    for (int k = 0; k < count; ++k) {
        CMat M(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) M(i, j) = d == 1 ? cplx(u(rng), u(rng)) : cplx(u(rng), 0.0);
        modes.push_back(M);
    }
    c.g = [modes, d](const std::vector<double>& y) -> CMat {
        CMat M = modes[0];
        for (int a = 0; a < d; ++a) {
            M += modes[1 + 2 * a] * std::cos(2.0 * kPi * y[a]) + modes[2 + 2 * a] * std::sin(2.0 * kPi * y[a]);
        }
        return M * M.adjoint() + 0.3 * CMat::Identity(2, 2);
    };
    if (d == 1) {
        CMat b(2, 1);
        b << 1.0, 2.0;
        c.symbol.b = {b};
    } else {
        CMat e0 = CMat::Zero(2, 1), e1 = CMat::Zero(2, 1);
        e0(0, 0) = 1.0;
        e1(1, 0) = 1.0;
        c.symbol.b = {e0, e1};
    }
    return c;
}

}  // namespace homlab
