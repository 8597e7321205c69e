#include "phmcq/waiting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "phmcq/error.hpp"

namespace phmcq {

namespace {

using numerics::Matrix;
using numerics::Vector;

// Real part of a quantity that must be real; `scale` is the size of the
// terms it was summed from.
double checked_real(Complex z, double scale, const char* what) {
    if (std::abs(z.imag()) > kImagTol * std::max(1.0, scale)) {
        fail_numerical(std::string(what) + ": imaginary residue " + std::to_string(z.imag()) + " exceeds tolerance");
    }
    return z.real();
}

double clamp_density(double value, const char* what) {
    if (value < -kNegativeTol) fail_numerical(std::string(what) + ": negative density " + std::to_string(value));
    return std::max(value, 0.0);
}

}  // namespace

double VirtualWaitDistribution::density(double v) const {
    Complex sum = 0.0;
    double scale = 0.0;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) {
        const Complex term = coeff(k) * static_cast<double>(servers) * std::exp(-rates(k) * v);
        sum += term;
        scale += std::abs(term);
    }
    return clamp_density(checked_real(sum, scale, "virtual density"), "virtual density");
}

double VirtualWaitDistribution::mass_below(double x) const {
    x = std::clamp(x, 0.0, tau);
    Complex sum = 0.0;
    double scale = 0.0;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) {
        const Complex term = coeff(k) * continuous_factor(eta[static_cast<std::size_t>(k)], servers, x);
        sum += term;
        scale += std::abs(term);
    }
    return checked_real(sum, scale, "virtual-wait mass");
}

double VirtualWaitDistribution::conditional_cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= tau) return 1.0;
    return std::clamp(mass_below(x) / continuous, 0.0, 1.0);
}

VirtualWaitDistribution virtual_wait(const LoadSolution& sol) {
    const QueueModel& q = sol.model;
    const int c = q.servers;
    const std::size_t m = q.phases();
    VirtualWaitDistribution w;
    w.tau = q.tau;
    w.servers = c;
    w.coeff.resize(static_cast<Eigen::Index>(m));
    w.rates.resize(static_cast<Eigen::Index>(m));

    Complex atom = 0.0, cont = 0.0, tail = 0.0;
    double atom_scale = 0.0, cont_scale = 0.0, tail_scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Complex delta = sol.delta(kk);
        const Complex eta = sol.spectral.eta(kk);
        w.eta.push_back(eta);
        w.coeff(kk) = delta * sol.y(c, k).sum();
        w.rates(kk) = static_cast<double>(c) * eta;

        Complex idle = 0.0;
        for (int i = 0; i <= c - 1; ++i) idle += binomial_coefficient(c, i) * sol.y(i, k).sum();
        const Complex a = delta * idle;
        const Complex b = w.coeff(kk) * continuous_factor(eta, c, q.tau);
        const Complex t = w.coeff(kk) * std::exp(-static_cast<double>(c) * eta * q.tau) / q.mu;
        atom += a;
        cont += b;
        tail += t;
        atom_scale += std::abs(a);
        cont_scale += std::abs(b);
        tail_scale += std::abs(t);
    }
    w.atom0 = checked_real(atom, atom_scale, "idle mass");
    w.continuous = checked_real(cont, cont_scale, "continuous mass");
    w.tail = checked_real(tail, tail_scale, "tail mass");
    return w;
}

double loads_density(const LoadSolution& sol, std::span<const double> v) {
    const QueueModel& q = sol.model;
    const int c = q.servers;
    if (v.size() != static_cast<std::size_t>(c)) fail_input("loads_density: expected " + std::to_string(c) + " coordinates");
    double total = 0.0;
    double vmin = v[0];
    for (const double x : v) {
        if (!(x > 0.0)) fail_input("loads_density: coordinates must be positive");
        total += x;
        vmin = std::min(vmin, x);
    }
    const double s = std::min(q.tau, vmin);
    const double base = (c - 1) * std::log(q.mu) - q.mu * total + c * q.mu * s;

    Complex sum = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < q.phases(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Complex coeff = sol.delta(kk) * sol.y(c, k).sum();
        const Complex term = coeff * std::exp(base - static_cast<double>(c) * sol.spectral.eta(kk) * s);
        sum += term;
        scale += std::abs(term);
    }
    return clamp_density(checked_real(sum, scale, "loads density"), "loads density");
}

double virtual_density(const LoadSolution& sol, double v) {
    if (!(v > 0.0 && v < sol.model.tau)) fail_input("virtual_density: v must lie in (0, tau)");
    return virtual_wait(sol).density(v);
}

WaitDecomposition wait_decomposition(const LoadSolution& sol) {
    const VirtualWaitDistribution w = virtual_wait(sol);
    return {w.atom0, w.continuous, w.tail};
}

MatrixExpForm matrix_exp_form(const QueueModel& q, double p) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const Matrix shifted = q.servers * q.mu * Matrix::Identity(m, m) - q.ph.generator();
    // row vector gamma (c mu I - T)^{-1} via the transposed system
    Vector z = numerics::solve(shifted.transpose(), q.ph.gamma());
    MatrixExpForm rep;
    rep.v_hat = z / z.sum();
    rep.p = p;
    return rep;
}

double matrix_exp_form_density(const QueueModel& q, const MatrixExpForm& rep, double v) {
    if (!(v > 0.0 && v < q.tau)) fail_input("matrix_exp_form_density: v must lie in (0, tau)");
    const auto m = static_cast<Eigen::Index>(q.phases());
    const Matrix A = q.servers * q.mu * Vector::Ones(m) * q.ph.gamma().transpose() + q.ph.generator();
    const Matrix expA = numerics::matrix_exp(A * (q.tau - v));
    const double value = rep.p * rep.v_hat.dot(expA * Vector::Ones(m));
    return clamp_density(value, "matrix-exponential density");
}

BridgeReport coefficient_bridge(const QueueModel& q, const LoadSolution& sol, const SpectralData& s, double tol) {
    const int c = q.servers;
    const auto m = static_cast<Eigen::Index>(q.phases());
    BridgeReport r;
    r.actual.resize(m);
    Complex p = 0.0;
    double scale = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
        r.actual(k) = sol.delta(k) * sol.y(c, static_cast<std::size_t>(k)).sum();
        const Complex term = static_cast<double>(c) * r.actual(k) * std::exp(-static_cast<double>(c) * s.eta(k) * q.tau);
        p += term;
        scale += std::abs(term);
    }
    r.p = checked_real(p, scale, "normalising constant p");

    const MatrixExpForm rep = matrix_exp_form(q, r.p);
    const numerics::CRowVector vF = rep.v_hat.transpose().cast<Complex>() * s.F;
    const numerics::CVector Finv_e = s.Finv * numerics::CVector::Ones(m);
    r.predicted.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        r.predicted(k) = r.p * std::exp(static_cast<double>(c) * s.eta(k) * q.tau) * vF(k) * Finv_e(k) / static_cast<double>(c);
    }
    const double ref = std::max(r.actual.cwiseAbs().maxCoeff(), 1e-300);
    r.max_residual = (r.predicted - r.actual).cwiseAbs().maxCoeff() / ref;
    r.ok = r.max_residual <= tol;
    return r;
}

std::vector<double> interior_grid(double tau, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = tau * static_cast<double>(i + 1) / static_cast<double>(n + 1);
    return v;
}

DensityGrid density_grid(const LoadSolution& sol, std::size_t n) {
    const VirtualWaitDistribution w = virtual_wait(sol);
    const BridgeReport bridge = coefficient_bridge(sol.model, sol, sol.spectral);
    const MatrixExpForm rep = matrix_exp_form(sol.model, bridge.p);
    DensityGrid g;
    g.v = interior_grid(sol.model.tau, n);
    g.f_spectral.reserve(n);
    g.f_matrix_exp.reserve(n);
    for (const double v : g.v) {
        g.f_spectral.push_back(w.density(v));
        g.f_matrix_exp.push_back(matrix_exp_form_density(sol.model, rep, v));
    }
    return g;
}

Diagnostics wait_checks(const LoadSolution& sol, std::size_t n, const SolverOptions& opts) {
    Diagnostics diag;
    const WaitDecomposition d = wait_decomposition(sol);
    diag.upper("mass total", std::abs(d.total() - 1.0), opts.tol_real, "|atom0 + continuous + tail - 1|");
    const BridgeReport bridge = coefficient_bridge(sol.model, sol, sol.spectral, opts.tol_route);
    diag.upper("representation bridge", bridge.max_residual, opts.tol_route, "per-coefficient, relative to max |delta_k y_c e|");
    const DensityGrid g = density_grid(sol, n);
    double gap = 0.0;
    double lowest = HUGE_VAL;
    for (std::size_t i = 0; i < g.v.size(); ++i) {
        gap = std::max(gap, std::abs(g.f_spectral[i] - g.f_matrix_exp[i]) / std::max(std::abs(g.f_matrix_exp[i]), 1e-300));
        lowest = std::min({lowest, g.f_spectral[i], g.f_matrix_exp[i]});
    }
    diag.upper("density form gap", gap, opts.tol_route, "max pointwise relative gap, spectral vs matrix exponential");
    diag.info("density minimum", lowest, "smallest density value on the grid");
    return diag;
}

void write_density_csv(const DensityGrid& grid, std::ostream& out) {
    out << "v,f_spectral,f_matrix_exp\n";
    char buf[96];
    for (std::size_t i = 0; i < grid.v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid.v[i], grid.f_spectral[i], grid.f_matrix_exp[i]);
        out << buf;
    }
}

}  // namespace phmcq
