#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "phmcq/load_solver.hpp"

namespace phmcq {

/// Stationary virtual waiting time V = min_i V_i: an atom at zero, a density
/// f(v) = sum_k coeff_k c exp(-rates_k v) on (0, tau), and the mass of
/// {V >= tau}.
struct VirtualWaitDistribution {
    double atom0 = 0.0;
    double continuous = 0.0;
    double tail = 0.0;
    double tau = 0.0;
    int servers = 1;
    CVector coeff;  // delta_k (y_c^k e)
    CVector rates;  // c eta_k
    std::vector<Complex> eta;

    /// Density on (0, tau); real part, imaginary residue checked.
    double density(double v) const;
    /// Integral of the density over (0, x], 0 <= x <= tau.
    double mass_below(double x) const;
    /// P(V <= x | 0 < V < tau).
    double conditional_cdf(double x) const;
};

/// Thrown-away imaginary parts and clamped negatives larger than these raise
/// Error(numerical).
inline constexpr double kImagTol = 1e-10;
inline constexpr double kNegativeTol = 1e-12;

VirtualWaitDistribution virtual_wait(const LoadSolution& sol);

/// Joint density of the remaining loads at v (all v_i > 0, size c).
double loads_density(const LoadSolution& sol, std::span<const double> v);

/// Virtual-wait density at 0 < v < tau.
double virtual_density(const LoadSolution& sol, double v);

struct WaitDecomposition {
    double atom0 = 0.0;
    double continuous = 0.0;
    double tail = 0.0;

    double total() const noexcept { return atom0 + continuous + tail; }
};

WaitDecomposition wait_decomposition(const LoadSolution& sol);

/// Matrix-exponential form of the virtual-wait density:
/// p v_hat exp[(c mu e gamma + T)(tau - v)] e.
struct MatrixExpForm {
    numerics::Vector v_hat;  // gamma (c mu I - T)^{-1}, normalised to sum 1
    double p = 0.0;
};

MatrixExpForm matrix_exp_form(const QueueModel& model, double p);

double matrix_exp_form_density(const QueueModel& model, const MatrixExpForm& rep, double v);

struct BridgeReport {
    double p = 0.0;
    CVector predicted;         // p e^{c eta_k tau} sum_{j,l} v_hat_j F_jk Finv_kl / c
    CVector actual;            // delta_k (y_c^k e)
    double max_residual = 0.0; // max_k |predicted - actual| / max_k |actual|
    bool ok = false;
};

/// Normalising constant of the matrix-exponential form from the spectral
/// coefficients, and the per-coefficient agreement between the two forms.
BridgeReport coefficient_bridge(const QueueModel& model, const LoadSolution& sol, const SpectralData& s,
                                double tol = 1e-8);

struct DensityGrid {
    std::vector<double> v;
    std::vector<double> f_spectral;
    std::vector<double> f_matrix_exp;
};

/// n interior points tau (i + 1) / (n + 1), i = 0..n-1.
std::vector<double> interior_grid(double tau, std::size_t n);

DensityGrid density_grid(const LoadSolution& sol, std::size_t n);

/// Realness and total mass of the decomposition, the coefficient bridge and
/// the pointwise relative gap of the two density forms on an n-point grid.
Diagnostics wait_checks(const LoadSolution& sol, std::size_t n = 1000, const SolverOptions& opts = {});

/// Header `v,f_spectral,f_matrix_exp`, 17 significant digits.
void write_density_csv(const DensityGrid& grid, std::ostream& out);

}  // namespace phmcq
