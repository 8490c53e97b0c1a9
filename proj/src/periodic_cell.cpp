#include "homlab/periodic_cell.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>

namespace homlab {

double Lattice::measure() const {
    double m = 1.0;
    for (double p : periods) m *= p;
    return m;
}

double Lattice::r1() const {
    double s = 0.0;
    for (double p : periods) s += p * p;
    return 0.5 * std::sqrt(s);
}

Lattice Lattice::unit(int d) { return Lattice{std::vector<double>(d, 1.0)}; }

PeriodicGrid::PeriodicGrid(Lattice lat, std::vector<int> counts) : lattice(std::move(lat)), n(std::move(counts)) {
    if (lattice.dim() < 1 || lattice.dim() > 2)
        fail_validation("InvalidArgument", "lattice dimension must be 1 or 2");
    if (static_cast<int>(n.size()) != lattice.dim())
        fail_validation("InvalidArgument", "grid counts do not match lattice dimension");
    for (int c : n)
        if (c < 8 || c % 2 != 0) fail_validation("InvalidArgument", "grid counts must be even and >= 8");
    for (double p : lattice.periods)
        if (!(p > 0.0)) fail_validation("InvalidArgument", "lattice periods must be positive");
}

int PeriodicGrid::size() const {
    int s = 1;
    for (int c : n) s *= c;
    return s;
}

int PeriodicGrid::axis_index(int k, int axis) const {
    return axis == 0 ? k % n[0] : k / n[0];
}

std::vector<double> PeriodicGrid::node(int k, double shift) const {
    std::vector<double> y(dim());
    for (int a = 0; a < dim(); ++a) y[a] = (axis_index(k, a) + shift) * h(a);
    return y;
}

double PeriodicGrid::wavenumber(int axis, int k) const {
    const int N = n[axis];
    if (2 * k == N) return 0.0;
    const int ks = k < N / 2 ? k : k - N;
    return 2.0 * kPi * ks / lattice.periods[axis];
}

PeriodicField::PeriodicField(PeriodicGrid g, int r, int c)
    : grid(std::move(g)), rows(r), cols(c), values(grid.size(), CMat::Zero(r, c)) {}

CMat PeriodicField::entry_row(int r, int c) const {
    CMat out(1, grid.size());
    for (int k = 0; k < grid.size(); ++k) out(0, k) = values[k](r, c);
    return out;
}

PeriodicField sample_field(const CellFunction& f, const PeriodicGrid& grid, double shift) {
    CMat first = f(grid.node(0, shift));
    PeriodicField out(grid, static_cast<int>(first.rows()), static_cast<int>(first.cols()));
    out[0] = first;
    for (int k = 1; k < grid.size(); ++k) out[k] = f(grid.node(k, shift));
    return out;
}

namespace {

// Fourier coefficients c_k with the convention u(y_j) = sum_k c_k e^{i xi_k y_j}.
CMat field_coefficients(const PeriodicField& field) {
    const int N = field.grid.size();
    CMat flat(field.rows * field.cols, N);
    for (int k = 0; k < N; ++k)
        flat.col(k) = Eigen::Map<const CVec>(field[k].data(), field.rows * field.cols);
    return fft_forward(flat, field.grid) / static_cast<double>(N);
}

}  // namespace

CellFunction fourier_interpolant(const PeriodicField& field, double shift) {
    const PeriodicGrid grid = field.grid;
    const CMat coef = field_coefficients(field);
    const int rows = field.rows, cols = field.cols;
    return [grid, coef, rows, cols, shift](const std::vector<double>& y) -> CMat {
        CVec acc = CVec::Zero(rows * cols);
        const int N = grid.size();
        for (int k = 0; k < N; ++k) {
            cplx e = 1.0;
            for (int a = 0; a < grid.dim(); ++a) {
                const int ka = grid.axis_index(k, a);
                const int Na = grid.n[a];
                const double ya = y[a] - shift * grid.h(a);
                // Nyquist terms use the real cosine so real samples give real interpolants.
                if (2 * ka == Na) {
                    e *= std::cos(kPi * Na * ya / grid.lattice.periods[a]);
                } else {
                    const int ks = ka < Na / 2 ? ka : ka - Na;
                    e *= std::exp(kI * (2.0 * kPi * ks * ya / grid.lattice.periods[a]));
                }
            }
            acc += coef.col(k) * e;
        }
        return Eigen::Map<CMat>(acc.data(), rows, cols);
    };
}

CellFunction grid_lookup(const PeriodicField& field, double shift) {
    return [field, shift](const std::vector<double>& y) -> CMat {
        const PeriodicGrid& grid = field.grid;
        int k = 0, stride = 1;
        for (int a = 0; a < grid.dim(); ++a) {
            const int Na = grid.n[a];
            long i = std::lround(y[a] / grid.h(a) - shift) % Na;
            if (i < 0) i += Na;
            k += static_cast<int>(i) * stride;
            stride *= Na;
        }
        return field[k];
    };
}

CMat mean_value(const PeriodicField& f) {
    CMat s = CMat::Zero(f.rows, f.cols);
    for (const auto& v : f.values) s += v;
    return s / static_cast<double>(f.values.size());
}

CMat underline_mean(const PeriodicField& f) {
    CMat s = CMat::Zero(f.rows, f.cols);
    for (const auto& v : f.values) {
        Eigen::JacobiSVD<CMat> svd(v);
        const auto& sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        if (!(smin > 0.0) || sv(0) / smin > 1e12) fail_solver("SingularSample", "nodal matrix is singular");
        s += v.inverse();
    }
    s /= static_cast<double>(f.values.size());
    return s.inverse();
}

double max_norm(const PeriodicField& f) {
    double m = 0.0;
    for (const auto& v : f.values) m = std::max(m, Eigen::JacobiSVD<CMat>(v).singularValues()(0));
    return m;
}

double max_inverse_norm(const PeriodicField& f) {
    double m = 0.0;
    for (const auto& v : f.values) {
        const auto sv = Eigen::JacobiSVD<CMat>(v).singularValues();
        const double smin = sv(sv.size() - 1);
        if (!(smin > 0.0)) fail_solver("SingularSample", "nodal matrix is singular");
        m = std::max(m, 1.0 / smin);
    }
    return m;
}

namespace {

void fft_rows_inplace(CMat& u, const PeriodicGrid& grid, bool inverse) {
    Eigen::FFT<double> fft;
    const int N0 = grid.n[0];
    const int N1 = grid.dim() == 2 ? grid.n[1] : 1;
    std::vector<cplx> in, out;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        CVec row = u.row(r).transpose();
        // axis 0
        in.resize(N0);
        for (int j = 0; j < N1; ++j) {
            for (int i = 0; i < N0; ++i) in[i] = row(i + N0 * j);
            if (inverse) fft.inv(out, in); else fft.fwd(out, in);
            for (int i = 0; i < N0; ++i) row(i + N0 * j) = out[i];
        }
        if (N1 > 1) {
            in.resize(N1);
            for (int i = 0; i < N0; ++i) {
                for (int j = 0; j < N1; ++j) in[j] = row(i + N0 * j);
                if (inverse) fft.inv(out, in); else fft.fwd(out, in);
                for (int j = 0; j < N1; ++j) row(i + N0 * j) = out[j];
            }
        }
        u.row(r) = row.transpose();
    }
}

}  // namespace

CMat fft_forward(const CMat& u, const PeriodicGrid& grid) {
    CMat out = u;
    fft_rows_inplace(out, grid, false);
    return out;
}

CMat fft_inverse(const CMat& u, const PeriodicGrid& grid) {
    CMat out = u;
    fft_rows_inplace(out, grid, true);
    return out;
}

CMat spectral_derivative(const CMat& u, const PeriodicGrid& grid, int axis) {
    CMat hat = fft_forward(u, grid);
    for (int k = 0; k < grid.size(); ++k) hat.col(k) *= grid.wavenumber(axis, grid.axis_index(k, axis));
    return fft_inverse(hat, grid);
}

CMat poisson_periodic(const CMat& rhs, const PeriodicGrid& grid) {
    CMat hat = fft_forward(rhs, grid);
    for (int k = 0; k < grid.size(); ++k) {
        double xi2 = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
            const int ka = grid.axis_index(k, a);
            const int Na = grid.n[a];
            const int ks = ka <= Na / 2 ? ka : ka - Na;
            const double xi = 2.0 * kPi * ks / grid.lattice.periods[a];
            xi2 += xi * xi;
        }
        hat.col(k) = xi2 > 0.0 ? CVec(-hat.col(k) / xi2) : CVec(CVec::Zero(hat.rows()));
    }
    return fft_inverse(hat, grid);
}

namespace {

void require_fd(const PeriodicGrid& grid) {
    if (grid.dim() != 1) fail_validation("InvalidArgument", "finite-difference cell scheme requires d = 1");
}

}  // namespace

CMat apply_bD(const std::vector<CMat>& b, const CMat& u, const PeriodicGrid& grid, CellScheme scheme) {
    const Eigen::Index m = b[0].rows();
    const int N = grid.size();
    if (scheme == CellScheme::FiniteDifference) {
        require_fd(grid);
        const double h = grid.h(0);
        CMat du(u.rows(), N);
        for (int k = 0; k < N; ++k) du.col(k) = -kI * (u.col((k + 1) % N) - u.col(k)) / h;
        return b[0] * du;
    }
    CMat out = CMat::Zero(m, N);
    for (int j = 0; j < grid.dim(); ++j) out += b[j] * spectral_derivative(u, grid, j);
    return out;
}

CMat apply_bD_adjoint(const std::vector<CMat>& b, const CMat& w, const PeriodicGrid& grid, CellScheme scheme) {
    const Eigen::Index n = b[0].cols();
    const int N = grid.size();
    if (scheme == CellScheme::FiniteDifference) {
        require_fd(grid);
        const double h = grid.h(0);
        CMat bw = b[0].adjoint() * w;
        CMat out(n, N);
        for (int k = 0; k < N; ++k) out.col(k) = kI * (bw.col((k + N - 1) % N) - bw.col(k)) / h;
        return out;
    }
    CMat out = CMat::Zero(n, N);
    for (int j = 0; j < grid.dim(); ++j) out += spectral_derivative(b[j].adjoint() * w, grid, j);
    return out;
}

CMat centered_derivative(const CMat& u, const PeriodicGrid& grid) {
    require_fd(grid);
    const int N = grid.size();
    const double h = grid.h(0);
    CMat out(u.rows(), N);
    for (int k = 0; k < N; ++k) out.col(k) = -kI * (u.col((k + 1) % N) - u.col((k + N - 1) % N)) / (2.0 * h);
    return out;
}

CMat apply_cell_operator(const PeriodicField& g, const std::vector<CMat>& b, const CMat& u, CellScheme scheme) {
    CMat w = apply_bD(b, u, g.grid, scheme);
    for (int k = 0; k < g.grid.size(); ++k) w.col(k) = g[k] * w.col(k);
    return apply_bD_adjoint(b, w, g.grid, scheme);
}

namespace {

// Per-mode inverse of the constant-coefficient symbol; zero on its null space.
std::vector<CMat> preconditioner_blocks(const CMat& gbar, const std::vector<CMat>& b, const PeriodicGrid& grid,
                                        CellScheme scheme) {
    const int N = grid.size();
    const Eigen::Index n = b[0].cols();
    std::vector<CMat> blocks(N);
    double scale = 0.0;
    std::vector<CMat> symbols(N);
    for (int k = 0; k < N; ++k) {
        CMat bs = CMat::Zero(b[0].rows(), n);
        if (scheme == CellScheme::FiniteDifference) {
            const double h = grid.h(0);
            const cplx mult = -kI * (std::exp(kI * (2.0 * kPi * k / static_cast<double>(N))) - 1.0) / h;
            bs = b[0] * mult;
        } else {
            for (int j = 0; j < grid.dim(); ++j) bs += b[j] * grid.wavenumber(j, grid.axis_index(k, j));
        }
        symbols[k] = bs.adjoint() * gbar * bs;
        scale = std::max(scale, symbols[k].norm());
    }
    for (int k = 0; k < N; ++k) {
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(symbols[k]));
        if (k == 0 || es.eigenvalues().minCoeff() <= 1e-13 * scale)
            blocks[k] = CMat::Zero(n, n);
        else
            blocks[k] = symbols[k].inverse();
    }
    return blocks;
}

CMat apply_preconditioner(const std::vector<CMat>& blocks, const CMat& r, const PeriodicGrid& grid) {
    CMat hat = fft_forward(r, grid);
    for (int k = 0; k < grid.size(); ++k) hat.col(k) = blocks[k] * hat.col(k);
    return fft_inverse(hat, grid);
}

}  // namespace

EllipticSolveResult periodic_elliptic_solve(const PeriodicField& g, const std::vector<CMat>& b, const CMat& rhs,
                                            CellScheme scheme, const EllipticSolveOptions& opts) {
    const PeriodicGrid& grid = g.grid;
    const int N = grid.size();
    const double rhs_norm = rhs.norm();
    const CVec rhs_mean = rhs.rowwise().mean();
    if (rhs_mean.norm() * std::sqrt(static_cast<double>(N)) > 1e-12 * std::max(rhs_norm, 1e-300) && rhs_norm > 0.0)
        fail_validation("NonZeroMeanRHS", "right-hand side must have zero mean");

    EllipticSolveResult res;
    res.u = CMat::Zero(b[0].cols(), N);
    if (rhs_norm == 0.0) return res;

    const auto blocks = preconditioner_blocks(hermitian_part(mean_value(g)), b, grid, scheme);
    const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * N * static_cast<int>(b[0].cols());

    // Components on the null space of the discrete operator (spectral Nyquist modes) are dropped.
    CMat r = rhs;
    {
        CMat hat = fft_forward(r, grid);
        for (int k = 1; k < N; ++k)
            if (blocks[k].norm() == 0.0) hat.col(k).setZero();
        r = fft_inverse(hat, grid);
    }
    CMat z = apply_preconditioner(blocks, r, grid);
    CMat p = z;
    double rz = grid_inner_real(r, z);
    for (int it = 1; it <= max_iter; ++it) {
        const CMat Ap = apply_cell_operator(g, b, p, scheme);
        const double pAp = grid_inner_real(p, Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        res.u += alpha * p;
        r -= alpha * Ap;
        res.iterations = it;
        res.residual = r.norm() / rhs_norm;
        if (res.residual <= opts.rel_tol) {
            for (Eigen::Index c = 0; c < res.u.rows(); ++c) res.u.row(c).array() -= res.u.row(c).mean();
            return res;
        }
        z = apply_preconditioner(blocks, r, grid);
        const double rz_new = grid_inner_real(r, z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    fail_solver("NoConvergence", "periodic CG stalled at relative residual " + std::to_string(res.residual));
}

}  // namespace homlab
