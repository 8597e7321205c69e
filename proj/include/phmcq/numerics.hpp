#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

// Dense linear-algebra kernel shared by the solver modules. Decompositions are
// delegated to Eigen; the matrix exponential is implemented here.
namespace phmcq::numerics {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using CRowVector = Eigen::RowVectorXcd;

enum class SpectrumOrder {
    unsorted,
    // decreasing modulus; ties by decreasing real part, then decreasing
    // imaginary part (so a conjugate pair lists +i first)
    modulus_desc,
};

struct Spectrum {
    CVector values;
    CMatrix left;   // row k: left eigenvector for values(k), unit 2-norm
    CMatrix right;  // column k: right eigenvector for values(k), unit 2-norm
    SpectrumOrder order = SpectrumOrder::unsorted;

    std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
};

/// Full complex eigen-decomposition of a real square matrix, with left and
/// right eigenvectors. Throws Error(numerical) if the iteration does not
/// converge or the eigenvectors fail the residual bound (defective input).
Spectrum eig_general(const Matrix& M);

/// Eigenvalues only; valid for defective matrices too.
CVector eigenvalues(const Matrix& M);

/// Largest left/right eigen-residual relative to ||M||.
double spectrum_residual(const Matrix& M, const Spectrum& s);

Spectrum sort_spectrum(Spectrum s);

/// Moduli closer than this (relative) are treated as equal when sorting.
inline constexpr double kModulusTieTol = 1e-12;

struct RankReport {
    bool ok = false;
    Vector singular_values;   // descending
    double ratio_min = 0.0;   // sigma_min / reference
    double ratio_next = 0.0;  // sigma_{m-1} / sigma_max (infinity when m == 1)
};

/// True iff sigma_min/ref <= tol_zero and sigma_{m-1}/sigma_max >= tol_nonzero.
/// `scale` > 0 supplies a reference magnitude for the "numerically zero" test
/// (ref = max(scale, sigma_max)); it matters when M is a cancellation of
/// larger terms, e.g. a 1x1 matrix that should be exactly zero.
RankReport rank_is_m_minus_1(const CMatrix& M, double tol_zero, double tol_nonzero, double scale = 0.0);

/// Row vector v with v M ~ 0, taken from the smallest singular direction and
/// normalised so v(0) == 1. Throws when the rank deficiency is not exactly
/// one or v(0) is numerically zero.
CRowVector left_nullvector(const CMatrix& M, double tol, double scale = 0.0);

/// Least-squares solution of the (m+1) x m system A x = b via column-pivoted
/// Householder QR. Throws when the numerical rank of A is below m.
CVector qr_solve_stacked(const CMatrix& A, const CVector& b, double rank_tol = 1e-10);

/// e^M by scaling and squaring with a diagonal Pade approximant of degree
/// 3..13 (Higham 2005). Throws on overflow.
Matrix matrix_exp(const Matrix& M);

/// Reciprocal condition number estimate (1-norm) from an LU factorization.
double reciprocal_condition(const Matrix& M);
double reciprocal_condition(const CMatrix& M);

/// Inverse / solve with a conditioning guard; throw Error(numerical) when
/// rcond < min_rcond.
CMatrix inverse(const CMatrix& M, double min_rcond = 1e-14);
Matrix inverse(const Matrix& M, double min_rcond = 1e-14);
Vector solve(const Matrix& A, const Vector& b, double min_rcond = 1e-14);

/// Singular values, descending.
Vector singular_values(const CMatrix& M);

}  // namespace phmcq::numerics
