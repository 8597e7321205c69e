#include "phmcq/load_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "phmcq/error.hpp"

namespace phmcq {

namespace {

using numerics::Matrix;
using numerics::Vector;

Matrix arrival_generator(const PhaseType& ph) { return ph.generator() + ph.exit() * ph.gamma().transpose(); }

Matrix boundary_eig_matrix(const QueueModel& q) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const double cmu = q.servers * q.mu;
    return cmu * Vector::Ones(m) * q.ph.gamma().transpose() + q.ph.generator();
}

double max_abs(const CVector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Smallest pairwise distance, relative to the largest modulus.
double separation(const CVector& v) {
    const Eigen::Index n = v.size();
    if (n < 2) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) best = std::min(best, std::abs(v(i) - v(j)));
    const double scale = max_abs(v);
    return scale > 0.0 ? best / scale : 0.0;
}

bool strongly_connected(const Matrix& G) {
    const Eigen::Index n = G.rows();
    auto reach = [&](bool forward) {
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        std::queue<Eigen::Index> todo;
        todo.push(0);
        seen[0] = true;
        while (!todo.empty()) {
            const Eigen::Index u = todo.front();
            todo.pop();
            for (Eigen::Index v = 0; v < n; ++v) {
                const double w = forward ? G(u, v) : G(v, u);
                if (v != u && w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = true;
                    todo.push(v);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };
    return reach(true) && reach(false);
}

CMatrix as_complex(const Matrix& M) { return M.cast<Complex>(); }

// Frobenius norms of the terms that make up the boundary matrix; used as the
// reference magnitude when deciding whether it is numerically singular.
double boundary_scale(const QueueModel& q, const CMatrix& t_gamma_BDB) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const double c1mu = (q.servers - 1) * q.mu;
    const Matrix egamma = Vector::Ones(m) * q.ph.gamma().transpose();
    return (q.servers * q.mu * t_gamma_BDB).norm() + c1mu * std::sqrt(static_cast<double>(m)) + c1mu * egamma.norm() +
           q.ph.generator().norm();
}

}  // namespace

double binomial_coefficient(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

Complex continuous_factor(Complex eta, int servers, double tau) {
    const Complex x = static_cast<double>(servers) * eta * tau;
    if (std::abs(eta) < 1e-6) {
        const double ct = servers * tau;
        return ct * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0);
    }
    return (1.0 - std::exp(-x)) / eta;
}

SpectralData build_spectral(const QueueModel& q) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const double cmu = q.servers * q.mu;
    SpectralData s;

    numerics::Spectrum sa;
    try {
        sa = numerics::sort_spectrum(numerics::eig_general(boundary_eig_matrix(q)));
    } catch (const Error& e) {
        fail_assumption(std::string("Assumption 1 i violated: c mu e gamma + T is not diagonalizable (") + e.what() + ")");
    }
    s.eta = sa.values / static_cast<double>(q.servers);
    s.F = sa.right;
    try {
        s.Finv = numerics::inverse(s.F, 1e-14);
    } catch (const Error&) {
        fail_assumption("Assumption 1 i violated: right eigenvectors of c mu e gamma + T are dependent");
    }
    s.E = CMatrix::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) s.E(k, k) = std::exp(-q.tau * static_cast<double>(q.servers) * s.eta(k));

    const Matrix G = arrival_generator(q.ph);
    numerics::Spectrum sg;
    try {
        sg = numerics::sort_spectrum(numerics::eig_general(G));
    } catch (const Error& e) {
        fail_assumption(std::string("Assumption 1 ii violated: T + t gamma is not diagonalizable (") + e.what() + ")");
    }
    // the zero eigenvalue of the generator goes first, the rest keep the sorted order
    Eigen::Index zero = 0;
    for (Eigen::Index k = 1; k < m; ++k)
        if (std::abs(sg.values(k)) < std::abs(sg.values(zero))) zero = k;
    const double gnorm = std::max(G.cwiseAbs().rowwise().sum().maxCoeff(), std::numeric_limits<double>::min());
    s.kappa1_raw = std::abs(sg.values(zero)) / gnorm;

    s.kappa.resize(m);
    s.B.resize(m, m);
    s.kappa(0) = Complex(0.0, 0.0);
    s.B.row(0) = sg.left.row(zero);
    for (Eigen::Index k = 0, dst = 1; k < m; ++k) {
        if (k == zero) continue;
        s.kappa(dst) = sg.values(k);
        s.B.row(dst) = sg.left.row(k);
        ++dst;
    }
    s.D = CMatrix::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) s.D(k, k) = 1.0 / (cmu - s.kappa(k));
    return s;
}

Diagnostics check_assumptions(const QueueModel& q, const SpectralData& s, const SolverOptions& opts) {
    Diagnostics d;
    const auto m = static_cast<Eigen::Index>(q.phases());

    d.lower("Assumption 1 i: distinct eta", separation(s.eta), opts.margin_warn, opts.margin_fail,
            "min |eta_k - eta_l| / max |eta|");

    const CVector tc = numerics::eigenvalues(q.ph.generator()) / static_cast<double>(q.servers);
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index j = 0; j < m; ++j) gap = std::min(gap, std::abs(s.eta(k) - tc(j)));
    const double gscale = std::max(max_abs(s.eta), max_abs(tc));
    d.lower("Assumption 1 i: eta vs eig(T)/c", gscale > 0.0 ? gap / gscale : 0.0, opts.margin_warn, opts.margin_fail,
            "min |eta_k - lambda_j(T)/c| / max modulus");

    const bool irreducible = m == 1 || strongly_connected(arrival_generator(q.ph));
    d.add({"Assumption 1 ii: irreducible", irreducible ? 1.0 : 0.0, 1.0, irreducible ? Status::pass : Status::fail,
           irreducible ? "T + t gamma is irreducible" : "T + t gamma is reducible"});

    d.lower("Assumption 1 ii: distinct kappa", separation(s.kappa), opts.margin_warn, opts.margin_fail,
            "min |kappa_k - kappa_l| / max |kappa|");

    d.upper("kappa_1 zero", s.kappa1_raw, opts.tol_zero, "|kappa_1| / ||T + t gamma||");

    double worst_re = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k < m; ++k) worst_re = std::max(worst_re, s.kappa(k).real());
    if (m > 1) {
        d.add({"kappa real parts negative", worst_re, 0.0, worst_re < 0.0 ? Status::pass : Status::fail,
               "max Re kappa_l, l >= 2"});
    }
    return d;
}

SpectralData compute_spectral(const QueueModel& q, const SolverOptions& opts) {
    SpectralData s = build_spectral(q);
    const Diagnostics d = check_assumptions(q, s, opts);
    if (d.first_failure()) fail_assumption("violated: " + d.failure_summary());
    return s;
}

CMatrix compute_R(const QueueModel& q, const SpectralData& s, std::size_t k) {
    CMatrix shifted = -as_complex(q.ph.generator());
    shifted.diagonal().array() += static_cast<double>(q.servers) * s.eta(static_cast<Eigen::Index>(k));
    const CMatrix inv = numerics::inverse(shifted, 1e-14);
    const CVector t = q.ph.exit().cast<Complex>();
    const CRowVector g = q.ph.gamma().transpose().cast<Complex>();
    return t * (g * inv);
}

YVectors::YVectors(int servers, std::size_t phases)
    : servers_(servers), phases_(phases),
      rows_(phases, std::vector<CRowVector>(static_cast<std::size_t>(servers) + 1, CRowVector::Zero(static_cast<Eigen::Index>(phases)))) {}

CMatrix YVectors::stack(int i) const {
    const auto m = static_cast<Eigen::Index>(phases_);
    CMatrix out(m, m);
    for (std::size_t k = 0; k < phases_; ++k) out.row(static_cast<Eigen::Index>(k)) = at(i, k);
    return out;
}

YSolution solve_y(const QueueModel& q, const SpectralData& s, const SolverOptions& opts) {
    const std::size_t m = q.phases();
    const auto mi = static_cast<Eigen::Index>(m);
    const int c = q.servers;
    const double mu = q.mu;
    const Matrix& T = q.ph.generator();
    const Matrix egamma = Vector::Ones(mi) * q.ph.gamma().transpose();
    const CMatrix I = CMatrix::Identity(mi, mi);

    YSolution out;
    out.Y = YVectors(c, m);
    out.R.reserve(m);

    double worst_min = 0.0;
    double worst_next = std::numeric_limits<double>::infinity();

    // (i mu I - i mu e gamma - T)^{-1}, i = 1..c-2, shared by every k
    std::vector<CMatrix> level_inv(static_cast<std::size_t>(std::max(c - 1, 1)));
    for (int i = 1; i <= c - 2; ++i) {
        const Matrix N = i * mu * Matrix::Identity(mi, mi) - i * mu * egamma - T;
        try {
            level_inv[static_cast<std::size_t>(i)] = as_complex(numerics::inverse(N, 1e-14));
        } catch (const Error&) {
            fail_numerical("internal inconsistency: level matrix " + std::to_string(i) + " is singular");
        }
    }
    const CMatrix T_inv = as_complex(numerics::inverse(T, 1e-14));

    for (std::size_t k = 0; k < m; ++k) {
        CMatrix R = compute_R(q, s, k);
        const CMatrix L = (c - 1) * mu * I - as_complex((c - 1) * mu * egamma + T) - c * mu * R;
        const double scale = (c - 1) * mu * std::sqrt(static_cast<double>(m)) + (c - 1) * mu * egamma.norm() + T.norm() +
                             (c * mu * R).norm();

        const numerics::RankReport rank = numerics::rank_is_m_minus_1(L, opts.tol_zero, opts.tol_nonzero, scale);
        worst_min = std::max(worst_min, rank.ratio_min);
        worst_next = std::min(worst_next, rank.ratio_next);

        CRowVector top;
        try {
            top = numerics::left_nullvector(L, opts.tol_zero, scale);
        } catch (const Error& e) {
            fail_numerical("y_{c-1} system for root " + std::to_string(k + 1) + ": " + e.what());
        }

        YVectors& Y = out.Y;
        Y.at(c - 1, k) = top;
        Y.at(c, k) = c * mu * top * R;
        if (c > 1) {
            for (int i = c - 2; i >= 1; --i) {
                Y.at(i, k) = (c - i) * mu * Y.at(i + 1, k) * level_inv[static_cast<std::size_t>(i)];
            }
            Y.at(0, k) = -c * mu * Y.at(1, k) * T_inv;
        }
        out.R.push_back(std::move(R));
    }

    out.diagnostics.upper("y_{c-1} system sigma_min", worst_min, opts.tol_zero, "max_k sigma_min / scale, rank m-1 expected");
    out.diagnostics.lower("y_{c-1} system sigma_next", worst_next, opts.tol_nonzero, opts.tol_zero,
                          "min_k sigma_{m-1} / sigma_max");
    if (c == 1) {
        out.diagnostics.info("single-server reading", 1.0, "y_0 taken as the null vector y_{c-1}; y_1 = c mu y_0 R_k");
    }
    return out;
}

CMatrix boundary_matrix(const QueueModel& q, const SpectralData& s) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const int c = q.servers;
    const double mu = q.mu;
    const CMatrix BDB = numerics::inverse(s.B, 1e-14) * s.D * s.B;
    const CVector t = q.ph.exit().cast<Complex>();
    const CRowVector g = q.ph.gamma().transpose().cast<Complex>();
    const Matrix egamma = Vector::Ones(m) * q.ph.gamma().transpose();
    return c * mu * t * (g * BDB) - (c - 1) * mu * CMatrix::Identity(m, m) + as_complex((c - 1) * mu * egamma + q.ph.generator());
}

CVector normalization_vector(const QueueModel& q, const SpectralData& s, const YVectors& Y) {
    const std::size_t m = q.phases();
    const int c = q.servers;
    CVector n(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        Complex idle = 0.0;
        for (int i = 0; i <= c - 1; ++i) idle += binomial_coefficient(c, i) * Y.at(i, k).sum();
        const Complex eta = s.eta(kk);
        const Complex tail = std::exp(-static_cast<double>(c) * eta * q.tau) / q.mu;
        n(kk) = idle + Y.at(c, k).sum() * (tail + continuous_factor(eta, c, q.tau));
    }
    return n;
}

namespace {

double balance_residual(const QueueModel& q, const SpectralData& s, const YVectors& Y, const CVector& delta) {
    const CMatrix M = boundary_matrix(q, s);
    const CMatrix BDB = numerics::inverse(s.B, 1e-14) * s.D * s.B;
    const CVector t = q.ph.exit().cast<Complex>();
    const CRowVector g = q.ph.gamma().transpose().cast<Complex>();
    const CMatrix EY = s.E * Y.stack(q.servers - 1);
    const double scale = delta.norm() * EY.norm() * boundary_scale(q, t * (g * BDB));
    const double r = (delta.transpose() * EY * M).norm();
    return scale > 0.0 ? r / scale : r;
}

}  // namespace

DeltaSolution solve_delta_direct(const QueueModel& q, const SpectralData& s, const YVectors& Y, const SolverOptions& opts) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const CMatrix W = s.E * Y.stack(q.servers - 1) * boundary_matrix(q, s);
    const CVector n = normalization_vector(q, s, Y);

    CMatrix A(m + 1, m);
    A.topRows(m) = W.transpose();
    A.row(m) = n.transpose();
    CVector rhs = CVector::Zero(m + 1);
    rhs(m) = 1.0;

    DeltaSolution out;
    try {
        out.delta = numerics::qr_solve_stacked(A, rhs, opts.tol_zero);
    } catch (const Error& e) {
        fail_numerical(std::string("delta system: ") + e.what());
    }
    out.balance_residual = balance_residual(q, s, Y, out.delta);
    out.normalization_residual = std::abs((out.delta.transpose() * n)(0) - 1.0);
    return out;
}

PhiDeltaSolution solve_delta_phi(const QueueModel& q, const SpectralData& s, const YVectors& Y, const SolverOptions& opts) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    const CMatrix M = boundary_matrix(q, s);
    const CMatrix BDB = numerics::inverse(s.B, 1e-14) * s.D * s.B;
    const CVector t = q.ph.exit().cast<Complex>();
    const CRowVector g = q.ph.gamma().transpose().cast<Complex>();
    const double scale = boundary_scale(q, t * (g * BDB));

    PhiDeltaSolution out;
    out.boundary_rank = numerics::rank_is_m_minus_1(M, opts.tol_zero, opts.tol_nonzero, scale);
    try {
        out.phi = numerics::left_nullvector(M, opts.tol_zero, scale);
    } catch (const Error& e) {
        fail_numerical(std::string("phi system: ") + e.what());
    }
    const double phi_size = std::max(1.0, out.phi.cwiseAbs().maxCoeff());
    out.phi_imag = out.phi.imag().cwiseAbs().maxCoeff() / phi_size;

    const CMatrix Ytop = Y.stack(q.servers - 1);
    const numerics::Vector sv = numerics::singular_values(Ytop);
    out.y_rank_ratio = sv(0) > 0.0 ? sv(m - 1) / sv(0) : 0.0;
    CMatrix Yinv;
    try {
        Yinv = numerics::inverse(Ytop, 1e-14);
    } catch (const Error&) {
        fail_numerical("phi route: Y_{c-1} is numerically singular");
    }
    CMatrix Einv = CMatrix::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) Einv(k, k) = 1.0 / s.E(k, k);

    CRowVector d = opts.phi_order == PhiOrder::delta_E_Y ? CRowVector(out.phi * Yinv * Einv) : CRowVector(out.phi * Einv * Yinv);
    const CVector n = normalization_vector(q, s, Y);
    const Complex norm = (d * n)(0);
    if (std::abs(norm) == 0.0) fail_numerical("phi route: normalisation sum vanishes");
    out.delta = (d / norm).transpose();
    out.balance_residual = balance_residual(q, s, Y, out.delta);
    out.normalization_residual = std::abs((out.delta.transpose() * n)(0) - 1.0);
    return out;
}

LoadSolution solve_loads(const QueueModel& q, const SolverOptions& opts) {
    LoadSolution sol{q, compute_spectral(q, opts), {}, {}, {}, {}, {}, {}};
    const SpectralData& s = sol.spectral;
    const auto m = static_cast<Eigen::Index>(q.phases());
    const int c = q.servers;
    const double mu = q.mu;
    Diagnostics& diag = sol.diagnostics;
    diag = check_assumptions(q, s, opts);

    // roots satisfy (mu - eta)/mu = gamma (c eta I - T)^{-1} t
    {
        double worst = 0.0;
        const CVector t = q.ph.exit().cast<Complex>();
        const CRowVector g = q.ph.gamma().transpose().cast<Complex>();
        for (Eigen::Index k = 0; k < m; ++k) {
            CMatrix shifted = -as_complex(q.ph.generator());
            shifted.diagonal().array() += static_cast<double>(c) * s.eta(k);
            const Complex rhs = (g * numerics::inverse(shifted, 1e-14) * t)(0);
            worst = std::max(worst, std::abs((mu - s.eta(k)) / mu - rhs));
        }
        diag.upper("eta root identity", worst, opts.tol_root, "max_k |(mu - eta_k)/mu - gamma (c eta_k I - T)^{-1} t|");
    }

    YSolution ys = solve_y(q, s, opts);
    sol.R = std::move(ys.R);
    sol.Y = std::move(ys.Y);
    diag.append(ys.diagnostics);

    // t is a right eigenvector of R_k with eigenvalue (mu - eta_k)/mu, and the
    // exit-rate balance identities hold for y_c and y_{c-1}
    {
        const CVector t = q.ph.exit().cast<Complex>();
        const CRowVector g = q.ph.gamma().transpose().cast<Complex>();
        double r_eig = 0.0, bal = 0.0, bal_r = 0.0, gen = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const Complex eta = s.eta(k);
            const CMatrix& R = sol.R[ku];
            const double tn = std::max(1.0, t.norm());
            r_eig = std::max(r_eig, (R * t - ((mu - eta) / mu) * t).norm() / tn);

            const CRowVector& yc = sol.Y.at(c, ku);
            const CRowVector& ytop = sol.Y.at(c - 1, ku);
            const Complex yc_t = (yc * t)(0);
            const Complex ytop_t = (ytop * t)(0);

            const Complex lhs17 = mu / (mu - eta) * yc_t;
            const Complex rhs17 = static_cast<double>(c) * mu * ytop_t;
            bal = std::max(bal, std::abs(lhs17 - rhs17) / std::max(1.0, std::abs(rhs17)));

            const Complex rhs19 = static_cast<double>(c) * mu * (ytop * R * t)(0);
            bal_r = std::max(bal_r, std::abs(yc_t - rhs19) / std::max(1.0, std::abs(rhs19)));

            CMatrix shifted = -as_complex(q.ph.generator());
            shifted.diagonal().array() += static_cast<double>(c) * eta;
            const CRowVector lhs18 = yc * shifted;
            const CRowVector rhs18 = mu * yc_t / (mu - eta) * g;
            gen = std::max(gen, (lhs18 - rhs18).norm() / std::max(1.0, rhs18.norm()));
        }
        diag.upper("R_k exit eigenvector", r_eig, opts.tol_root, "max_k ||R_k t - (mu - eta_k)/mu t|| / max(1, ||t||)");
        diag.upper("exit balance identity", bal, opts.tol_identity, "mu/(mu - eta_k) y_c t = c mu y_{c-1} t");
        diag.upper("exit balance via R_k", bal_r, opts.tol_identity, "y_c t = c mu y_{c-1} R_k t");
        diag.upper("y_c generator identity", gen, opts.tol_identity, "y_c (c eta_k I - T) = mu (y_c t) gamma / (mu - eta_k)");
    }

    // B^{-1} D B equals (c mu I - T - t gamma)^{-1} whatever the scaling of B
    {
        const CMatrix BDB = numerics::inverse(s.B, 1e-14) * s.D * s.B;
        const Matrix direct = numerics::inverse(Matrix(c * mu * Matrix::Identity(m, m) - arrival_generator(q.ph)), 1e-14);
        const double r = (BDB - as_complex(direct)).norm() / std::max(direct.norm(), 1e-300);
        diag.upper("B^{-1} D B resolvent", r, opts.tol_root, "relative to (c mu I - T - t gamma)^{-1}");
    }

    DeltaSolution direct = solve_delta_direct(q, s, sol.Y, opts);
    sol.delta = direct.delta;
    diag.upper("balance residual", direct.balance_residual, opts.tol_identity, "||delta E Y_{c-1} M|| relative");
    diag.upper("normalization residual", direct.normalization_residual, opts.tol_real, "|sum delta_k n_k - 1|");

    PhiDeltaSolution viaphi = solve_delta_phi(q, s, sol.Y, opts);
    sol.delta_phi = viaphi.delta;
    sol.phi = viaphi.phi;
    diag.upper("boundary system sigma_min", viaphi.boundary_rank.ratio_min, opts.tol_zero, "rank m-1 expected");
    diag.lower("boundary system sigma_next", viaphi.boundary_rank.ratio_next, opts.tol_nonzero, opts.tol_zero,
               "sigma_{m-1} / sigma_max");
    diag.lower("Y_{c-1} rank", viaphi.y_rank_ratio, opts.tol_nonzero, opts.tol_zero, "sigma_min / sigma_max of Y_{c-1}");
    diag.upper("phi imaginary part", viaphi.phi_imag, opts.tol_real, "max |Im phi_j| / max(1, ||phi||)");
    {
        const double gap = (sol.delta - sol.delta_phi).norm() / std::max(sol.delta.norm(), 1e-300);
        diag.upper("route agreement", gap, opts.tol_route,
                   opts.phi_order == PhiOrder::delta_E_Y ? "phi = delta E Y_{c-1}" : "phi = delta Y_{c-1} E");
    }

    // complex delta_k come in conjugate pairs that follow the pairing of eta
    {
        double worst = 0.0;
        const double dscale = std::max(sol.delta.cwiseAbs().maxCoeff(), 1e-300);
        for (Eigen::Index k = 0; k < m; ++k) {
            const Complex eta = s.eta(k);
            if (std::abs(eta.imag()) <= 1e-12 * std::max(std::abs(eta), 1.0)) {
                worst = std::max(worst, std::abs(sol.delta(k).imag()) / dscale);
                continue;
            }
            Eigen::Index partner = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index l = 0; l < m; ++l) {
                const double dist = std::abs(s.eta(l) - std::conj(eta));
                if (l != k && dist < best) {
                    best = dist;
                    partner = l;
                }
            }
            if (partner < 0) {
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            worst = std::max(worst, std::abs(sol.delta(partner) - std::conj(sol.delta(k))) / dscale);
        }
        diag.upper("delta conjugate pairing", worst, opts.tol_identity, "relative to max |delta_k|");
    }
    return sol;
}

}  // namespace phmcq
