#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace homlab {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx>;
using Triplet = Eigen::Triplet<cplx>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

/// Validation errors map to CLI exit code 2, solver errors to 3.
enum class ErrorKind { Validation, Solver };

class Error : public std::runtime_error {
public:
    Error(std::string code, ErrorKind kind, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)), kind_(kind) {}
    const std::string& code() const { return code_; }
    ErrorKind kind() const { return kind_; }

private:
    std::string code_;
    ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& code, const std::string& what) {
    throw Error(code, ErrorKind::Validation, what);
}

[[noreturn]] inline void fail_solver(const std::string& code, const std::string& what) {
    throw Error(code, ErrorKind::Solver, what);
}

inline CMat hermitian_part(const CMat& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace homlab
