#pragma once

#include <cstddef>
#include <vector>

#include "phmcq/diagnostics.hpp"
#include "phmcq/model.hpp"
#include "phmcq/numerics.hpp"

namespace phmcq {

using numerics::CMatrix;
using numerics::Complex;
using numerics::CRowVector;
using numerics::CVector;

/// How the real boundary vector phi relates to delta. The boundary condition
/// reads delta * E * Y_{c-1}; the alternative product delta * Y_{c-1} * E is
/// kept for investigation only and does not solve the boundary condition.
enum class PhiOrder { delta_E_Y, delta_Y_E };

struct SolverOptions {
    double tol_zero = 1e-10;     // sigma ratio regarded as numerically zero
    double tol_nonzero = 1e-6;   // sigma ratio below this is suspiciously small
    double margin_fail = 1e-8;   // relative eigenvalue separation: hard failure
    double margin_warn = 1e-6;   // relative eigenvalue separation: warning
    double tol_identity = 1e-9;  // algebraic identity residuals
    double tol_root = 1e-10;     // root identity and R_k eigenvector residuals
    double tol_route = 1e-8;     // relative gap between the two delta routes
    double tol_real = 1e-10;     // imaginary residue of quantities that must be real
    PhiOrder phi_order = PhiOrder::delta_E_Y;
};

struct SpectralData {
    CVector eta;    // roots of det[c mu e gamma + T - c eta I] = 0, sorted
    CVector kappa;  // eigenvalues of T + t gamma, kappa(0) == 0
    CMatrix B;      // rows: unit-norm left eigenvectors of T + t gamma
    CMatrix D;      // diag 1 / (c mu - kappa_l)
    CMatrix E;      // diag exp(-tau c eta_k)
    CMatrix F;      // columns: right eigenvectors of c mu e gamma + T, same order as eta
    CMatrix Finv;
    double kappa1_raw = 0.0;  // |kappa_1| before snapping, relative to ||T + t gamma||

    std::size_t size() const noexcept { return static_cast<std::size_t>(eta.size()); }
};

/// Spectral data without assumption gating. Throws Error(assumption) only
/// when a matrix is not diagonalizable.
SpectralData build_spectral(const QueueModel& model);

/// build_spectral followed by check_assumptions; throws Error(assumption)
/// naming the first violated clause.
SpectralData compute_spectral(const QueueModel& model, const SolverOptions& opts = {});

/// Margins for the distinct-root, root/eig(T) separation, irreducibility and
/// distinct-kappa conditions, plus the kappa sign checks.
Diagnostics check_assumptions(const QueueModel& model, const SpectralData& s, const SolverOptions& opts = {});

/// t gamma (c eta_k I - T)^{-1}
CMatrix compute_R(const QueueModel& model, const SpectralData& s, std::size_t k);

double binomial_coefficient(int n, int k);

/// (1 - exp(-c eta tau)) / eta, with a series for |eta| < 1e-6.
Complex continuous_factor(Complex eta, int servers, double tau);

/// y_i^k for i = 0..c and k = 0..m-1.
class YVectors {
public:
    YVectors() = default;
    YVectors(int servers, std::size_t phases);

    int servers() const noexcept { return servers_; }
    std::size_t phases() const noexcept { return phases_; }

    CRowVector& at(int i, std::size_t k) { return rows_[k][static_cast<std::size_t>(i)]; }
    const CRowVector& at(int i, std::size_t k) const { return rows_[k][static_cast<std::size_t>(i)]; }

    /// m x m matrix whose row k is y_i^k.
    CMatrix stack(int i) const;

private:
    int servers_ = 0;
    std::size_t phases_ = 0;
    std::vector<std::vector<CRowVector>> rows_;
};

struct YSolution {
    std::vector<CMatrix> R;
    YVectors Y;
    Diagnostics diagnostics;
};

YSolution solve_y(const QueueModel& model, const SpectralData& s, const SolverOptions& opts = {});

/// Real m x m matrix of the boundary condition, built from B^{-1} D B.
CMatrix boundary_matrix(const QueueModel& model, const SpectralData& s);

/// Coefficients n_k of the normalisation sum_k delta_k n_k = 1.
CVector normalization_vector(const QueueModel& model, const SpectralData& s, const YVectors& Y);

struct DeltaSolution {
    CVector delta;
    double balance_residual = 0.0;        // ||delta E Y M|| relative to the size of the terms
    double normalization_residual = 0.0;  // |sum delta_k n_k - 1|
};

/// Stacks the m homogeneous boundary equations with the normalisation row and
/// solves the (m+1) x m system by QR.
DeltaSolution solve_delta_direct(const QueueModel& model, const SpectralData& s, const YVectors& Y,
                                 const SolverOptions& opts = {});

struct PhiDeltaSolution : DeltaSolution {
    CRowVector phi;
    double phi_imag = 0.0;  // max |Im phi_j| / max(1, ||phi||_inf)
    numerics::RankReport boundary_rank;
    double y_rank_ratio = 0.0;  // sigma_min / sigma_max of Y_{c-1}
};

/// Solves the real boundary system for phi, then recovers delta through
/// Y_{c-1}^{-1} and E^{-1} and rescales it to the normalisation.
PhiDeltaSolution solve_delta_phi(const QueueModel& model, const SpectralData& s, const YVectors& Y,
                                 const SolverOptions& opts = {});

struct LoadSolution {
    QueueModel model;
    SpectralData spectral;
    std::vector<CMatrix> R;
    YVectors Y;
    CVector delta;      // from the stacked QR route (authoritative)
    CVector delta_phi;  // from the phi route
    CRowVector phi;
    Diagnostics diagnostics;

    const CRowVector& y(int i, std::size_t k) const { return Y.at(i, k); }
};

/// Full pipeline. Throws Error(assumption) if the model fails the structural
/// checks and Error(numerical) if a decomposition breaks down; residual
/// checks are recorded in `diagnostics` and do not throw.
LoadSolution solve_loads(const QueueModel& model, const SolverOptions& opts = {});

}  // namespace phmcq
