#include "phmcq/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <vector>

#include "phmcq/error.hpp"

namespace phmcq::numerics {

namespace {

constexpr double kEigResidualTol = 1e-10;

double matrix_norm(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().rowwise().sum().maxCoeff(); }

double left_residual(const CMatrix& M, Complex lambda, const CRowVector& w) {
    return (w * M - lambda * w).norm() / w.norm();
}

// One step of inverse iteration on (M - lambda I)^H starting from w^H, kept
// only if it lowers the residual: next to a near-double eigenvalue the step
// mixes the two neighbouring eigenvectors. The shift is nudged off lambda
// when the LU factor is exactly singular.
CRowVector refine_left(const Matrix& M, Complex lambda, const CRowVector& w) {
    const double scale = std::max(matrix_norm(M), std::numeric_limits<double>::min());
    CMatrix shifted = M.cast<Complex>();
    shifted.diagonal().array() -= lambda;
    CMatrix adj = shifted.adjoint();
    Eigen::PartialPivLU<CMatrix> lu(adj);
    if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0)) {
        adj.diagonal().array() -= Complex(scale * 1e-14, 0.0);
        lu.compute(adj);
    }
    CVector z = lu.solve(w.adjoint());
    if (!z.allFinite() || z.norm() == 0.0) return w;
    CRowVector out = z.adjoint();
    out /= out.norm();
    const CMatrix Mc = M.cast<Complex>();
    return left_residual(Mc, lambda, out) < left_residual(Mc, lambda, w) ? out : w;
}

}  // namespace

Spectrum eig_general(const Matrix& M) {
    if (M.rows() != M.cols()) fail_input("eig_general: matrix is not square");
    if (!M.allFinite()) fail_input("eig_general: non-finite entry");
    const Eigen::Index n = M.rows();

    Eigen::EigenSolver<Matrix> es(M, true);
    if (es.info() != Eigen::Success) fail_numerical("eig_general: eigenvalue iteration did not converge");

    Spectrum s;
    s.values = es.eigenvalues();
    s.right = es.eigenvectors();
    for (Eigen::Index k = 0; k < n; ++k) s.right.col(k).normalize();

    if (reciprocal_condition(s.right) < 1e-14) {
        fail_numerical("eig_general: eigenvector matrix is singular (defective matrix)");
    }
    const CMatrix left = s.right.inverse();
    s.left.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        CRowVector w = left.row(k);
        w /= w.norm();
        s.left.row(k) = refine_left(M, s.values(k), w);
    }

    const double res = spectrum_residual(M, s);
    if (!(res <= kEigResidualTol)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "eig_general: eigenvector residual %.3e exceeds tolerance", res);
        fail_numerical(buf);
    }
    return s;
}

CVector eigenvalues(const Matrix& M) {
    if (M.rows() != M.cols()) fail_input("eigenvalues: matrix is not square");
    Eigen::EigenSolver<Matrix> es(M, false);
    if (es.info() != Eigen::Success) fail_numerical("eigenvalues: iteration did not converge");
    return es.eigenvalues();
}

double spectrum_residual(const Matrix& M, const Spectrum& s) {
    const CMatrix Mc = M.cast<Complex>();
    const double scale = std::max(matrix_norm(M), std::numeric_limits<double>::min());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < s.values.size(); ++k) {
        const Complex lambda = s.values(k);
        const double r_left = (s.left.row(k) * Mc - lambda * s.left.row(k)).norm() / s.left.row(k).norm();
        const double r_right = (Mc * s.right.col(k) - lambda * s.right.col(k)).norm() / s.right.col(k).norm();
        worst = std::max({worst, r_left, r_right});
    }
    return worst / scale;
}

Spectrum sort_spectrum(Spectrum s) {
    const auto n = static_cast<std::size_t>(s.values.size());
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    const auto& v = s.values;

    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(v(a)) > std::abs(v(b)); });

    auto close = [](double a, double b) {
        return std::abs(a - b) <= kModulusTieTol * std::max({std::abs(a), std::abs(b), 1e-300});
    };
    auto before = [&](Eigen::Index a, Eigen::Index b) {
        if (!close(v(a).real(), v(b).real())) return v(a).real() > v(b).real();
        return v(a).imag() > v(b).imag();
    };

    // re-order runs of (numerically) equal modulus by the tie-break
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start + 1;
        while (end < n && close(std::abs(v(idx[end - 1])), std::abs(v(idx[end])))) ++end;
        for (std::size_t i = start + 1; i < end; ++i) {
            for (std::size_t j = i; j > start && before(idx[j], idx[j - 1]); --j) std::swap(idx[j], idx[j - 1]);
        }
        start = end;
    }

    Spectrum out;
    out.values.resize(v.size());
    out.left.resize(s.left.rows(), s.left.cols());
    out.right.resize(s.right.rows(), s.right.cols());
    for (std::size_t k = 0; k < n; ++k) {
        const auto dst = static_cast<Eigen::Index>(k);
        out.values(dst) = v(idx[k]);
        if (s.left.size() > 0) out.left.row(dst) = s.left.row(idx[k]);
        if (s.right.size() > 0) out.right.col(dst) = s.right.col(idx[k]);
    }
    out.order = SpectrumOrder::modulus_desc;
    return out;
}

Vector singular_values(const CMatrix& M) {
    Eigen::JacobiSVD<CMatrix> svd(M);
    return svd.singularValues();
}

RankReport rank_is_m_minus_1(const CMatrix& M, double tol_zero, double tol_nonzero, double scale) {
    RankReport r;
    r.singular_values = singular_values(M);
    const Eigen::Index m = r.singular_values.size();
    if (m == 0) return r;
    const double smax = r.singular_values(0);
    const double ref = std::max(scale, smax);
    r.ratio_min = ref > 0.0 ? r.singular_values(m - 1) / ref : 0.0;
    if (m == 1) {
        r.ratio_next = std::numeric_limits<double>::infinity();
    } else {
        r.ratio_next = smax > 0.0 ? r.singular_values(m - 2) / smax : 0.0;
    }
    r.ok = r.ratio_min <= tol_zero && r.ratio_next >= tol_nonzero;
    return r;
}

CRowVector left_nullvector(const CMatrix& M, double tol, double scale) {
    if (M.rows() != M.cols() || M.rows() == 0) fail_input("left_nullvector: matrix must be square and non-empty");
    const Eigen::Index m = M.rows();
    Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeFullU);
    const Vector& sv = svd.singularValues();
    const double smax = sv(0);
    const double ref = std::max(scale, smax);
    const double ratio_min = ref > 0.0 ? sv(m - 1) / ref : 0.0;
    const double ratio_next = m == 1 ? std::numeric_limits<double>::infinity() : (smax > 0.0 ? sv(m - 2) / smax : 0.0);
    if (ratio_min > tol) {
        fail_numerical("left_nullvector: matrix has full numerical rank (sigma_min ratio " + std::to_string(ratio_min) + ")");
    }
    if (!(ratio_next > tol)) {
        fail_numerical("left_nullvector: rank deficiency exceeds one (sigma ratio " + std::to_string(ratio_next) + ")");
    }
    CRowVector v = svd.matrixU().col(m - 1).adjoint();
    if (std::abs(v(0)) <= 1e-12 * v.norm()) {
        fail_numerical("left_nullvector: first component of the null vector is numerically zero; cannot normalise");
    }
    v /= v(0);
    v(0) = Complex(1.0, 0.0);
    return v;
}

CVector qr_solve_stacked(const CMatrix& A, const CVector& b, double rank_tol) {
    if (A.rows() != b.size()) fail_input("qr_solve_stacked: dimension mismatch");
    Eigen::ColPivHouseholderQR<CMatrix> qr(A);
    qr.setThreshold(rank_tol);
    if (qr.rank() < A.cols()) {
        fail_numerical("qr_solve_stacked: stacked system has rank " + std::to_string(qr.rank()) + " < " +
                       std::to_string(A.cols()));
    }
    return qr.solve(b);
}

namespace {

// Pade numerator coefficients b_0..b_p for p = 3, 5, 7, 9, 13.
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                           2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kPade13 = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                            1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                            670442572800.0,      33522128640.0,       1323241920.0,
                                            40840800.0,          960960.0,            16380.0,
                                            182.0,               1.0};
// Largest 1-norm for which each degree meets double precision.
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                          2.097847961257068e0, 5.371920351148152e0};

template <std::size_t N>
Matrix pade_low(const Matrix& A, const std::array<double, N>& b) {
    const Eigen::Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    Matrix U_even = b[1] * I;
    Matrix V = b[0] * I;
    Matrix power = I;
    for (std::size_t k = 2; k < N; k += 2) {
        power = power * A2;
        U_even += b[k + 1] * power;
        V += b[k] * power;
    }
    const Matrix U = A * U_even;
    return (V - U).partialPivLu().solve(V + U);
}

Matrix pade13(const Matrix& A) {
    const auto& b = kPade13;
    const Eigen::Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A4 * A2;
    const Matrix U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    const Matrix V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    return (V - U).partialPivLu().solve(V + U);
}

}  // namespace

Matrix matrix_exp(const Matrix& M) {
    if (M.rows() != M.cols()) fail_input("matrix_exp: matrix is not square");
    if (!M.allFinite()) fail_input("matrix_exp: non-finite entry");
    if (M.size() == 0) return M;

    const double norm = M.cwiseAbs().colwise().sum().maxCoeff();
    Matrix result;
    if (norm <= kTheta[0]) {
        result = pade_low(M, kPade3);
    } else if (norm <= kTheta[1]) {
        result = pade_low(M, kPade5);
    } else if (norm <= kTheta[2]) {
        result = pade_low(M, kPade7);
    } else if (norm <= kTheta[3]) {
        result = pade_low(M, kPade9);
    } else {
        const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta[4]))));
        result = pade13(M / std::ldexp(1.0, squarings));
        for (int i = 0; i < squarings; ++i) result = result * result;
    }
    if (!result.allFinite()) fail_numerical("matrix_exp: overflow");
    return result;
}

double reciprocal_condition(const Matrix& M) {
    if (M.size() == 0) return 1.0;
    Eigen::PartialPivLU<Matrix> lu(M);
    if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0)) return 0.0;
    return lu.rcond();
}

double reciprocal_condition(const CMatrix& M) {
    if (M.size() == 0) return 1.0;
    Eigen::PartialPivLU<CMatrix> lu(M);
    if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0)) return 0.0;
    return lu.rcond();
}

CMatrix inverse(const CMatrix& M, double min_rcond) {
    Eigen::PartialPivLU<CMatrix> lu(M);
    if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0) || lu.rcond() < min_rcond) {
        fail_numerical("inverse: matrix is numerically singular");
    }
    return lu.inverse();
}

Matrix inverse(const Matrix& M, double min_rcond) {
    Eigen::PartialPivLU<Matrix> lu(M);
    if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0) || lu.rcond() < min_rcond) {
        fail_numerical("inverse: matrix is numerically singular");
    }
    return lu.inverse();
}

Vector solve(const Matrix& A, const Vector& b, double min_rcond) {
    Eigen::PartialPivLU<Matrix> lu(A);
    if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0) || lu.rcond() < min_rcond) {
        fail_numerical("solve: matrix is numerically singular");
    }
    return lu.solve(b);
}

}  // namespace phmcq::numerics
