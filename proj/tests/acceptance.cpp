// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "fixtures.hpp"
#include "phmcq/numerics.hpp"
#include "phmcq/rng.hpp"
#include "phmcq/simulator.hpp"
#include "phmcq/waiting.hpp"

using namespace phmcq;
using numerics::Matrix;
using numerics::Vector;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Named {
    const char* name;
    QueueModel q;
};

std::vector<Named> test_models() {
    return {{"m=1", fixtures::mm1d()}, {"Erlang-2", fixtures::erlang2()}, {"hyperexponential", fixtures::hyperexp()}};
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects the worst value of each quantity and its verdict.
class Verdict {
public:
    void check(bool ok, const std::string& what) {
        ok_ = ok_ && ok;
        if (!ok) failures_ += (failures_.empty() ? "" : "; ") + what;
    }
    void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }
    bool ok() const { return ok_; }
    std::string detail() const { return failures_.empty() ? notes_ : failures_ + " | " + notes_; }

private:
    bool ok_ = true;
    std::string failures_, notes_;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Matrix ones_gamma(const QueueModel& q) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    return Vector::Ones(m) * q.ph.gamma().transpose();
}

Verdict criterion_1() {
    Verdict v;
    const QueueModel q = fixtures::mm1d();
    const LoadSolution sol = solve_loads(q);
    const WaitDecomposition d = wait_decomposition(sol);
    const double delta = sol.delta(0).real();
    v.check(std::abs(delta - 0.550643) <= 1e-5, "delta " + fmt("%.8f", delta));
    v.check(std::abs(d.atom0 - 0.550643) <= 1e-5, "atom0 " + fmt("%.8f", d.atom0));
    v.check(std::abs(d.continuous - 0.348071) <= 1e-5, "continuous " + fmt("%.8f", d.continuous));
    v.check(std::abs(d.tail - 0.101286) <= 1e-5, "tail " + fmt("%.8f", d.tail));
    v.check(std::abs(d.total() - 1.0) <= 1e-10, "sum " + fmt("%.3e", d.total() - 1.0));

    std::vector<double> times;
    for (int i = 0; i < 201; ++i) {
        const auto t0 = Clock::now();
        const WaitDecomposition w = wait_decomposition(solve_loads(q));
        times.push_back(seconds_since(t0));
        if (w.atom0 != d.atom0) v.check(false, "nondeterministic solve");
    }
    std::nth_element(times.begin(), times.begin() + 100, times.end());
    v.check(times[100] < 1e-3, "runtime " + fmt("%.3g s", times[100]));
    v.note("delta " + fmt("%.6f", delta) + " atom0 " + fmt("%.6f", d.atom0) + " continuous " +
           fmt("%.6f", d.continuous) + " tail " + fmt("%.6f", d.tail));
    v.note("median runtime " + fmt("%.1f us", times[100] * 1e6));
    return v;
}

Verdict criterion_2() {
    Verdict v;
    Rng rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int c = 1 + static_cast<int>(rng() % 6);
        const double mu = 0.1 + 5.0 * rng.uniform();
        const double lambda = c * mu * (0.05 + 2.0 * rng.uniform());
        const double tau = 0.1 + 5.0 * rng.uniform();
        const SpectralData s = compute_spectral(fixtures::poisson(lambda, c, mu, tau));
        const double err = std::abs(s.eta(0) - Complex(mu - lambda / c, 0.0));
        worst = std::max(worst, err);
    }
    v.check(worst <= 1e-12, "max |eta - (mu - lambda/c)| " + fmt("%.3e", worst));
    v.note("500 random m=1 models, max error " + fmt("%.2e", worst));
    return v;
}

Verdict criterion_3() {
    Verdict v;
    for (const auto& [name, q] : test_models()) {
        if (q.phases() < 2) continue;
        const auto t0 = Clock::now();
        const LoadSolution sol = solve_loads(q);
        const BridgeReport bridge = coefficient_bridge(q, sol, sol.spectral);
        const DensityGrid g = density_grid(sol, 1000);
        const double elapsed = seconds_since(t0);
        double fmax = 0.0, gap = 0.0, pointwise = 0.0;
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            fmax = std::max(fmax, g.f_spectral[i]);
            const double diff = std::abs(g.f_spectral[i] - g.f_matrix_exp[i]);
            gap = std::max(gap, diff);
            pointwise = std::max(pointwise, diff / g.f_matrix_exp[i]);
        }
        const std::string n = name;
        v.check(gap / fmax <= 1e-8, n + " density gap " + fmt("%.3e", gap / fmax));
        v.check(pointwise <= 1e-8, n + " pointwise gap " + fmt("%.3e", pointwise));
        v.check(bridge.max_residual <= 1e-8, n + " coefficient residual " + fmt("%.3e", bridge.max_residual));
        v.check(elapsed < 0.1, n + " runtime " + fmt("%.3g s", elapsed));
        v.note(n + ": gap " + fmt("%.1e", gap / fmax) + ", coefficients " + fmt("%.1e", bridge.max_residual) + ", " +
               fmt("%.2f ms", elapsed * 1e3));
    }
    return v;
}

Verdict criterion_4() {
    Verdict v;
    for (const auto& [name, q] : test_models()) {
        const LoadSolution sol = solve_loads(q);
        const double rel = (sol.delta - sol.delta_phi).norm() / sol.delta.norm();
        const double imag = sol.phi.imag().cwiseAbs().maxCoeff();
        const std::string n = name;
        v.check(rel <= 1e-8, n + " route gap " + fmt("%.3e", rel));
        v.check(imag <= 1e-10, n + " Im phi " + fmt("%.3e", imag));
        v.note(n + ": " + fmt("%.1e", rel) + ", Im phi " + fmt("%.1e", imag));
    }
    return v;
}

Verdict criterion_5() {
    Verdict v;
    for (const auto& [name, q] : test_models()) {
        const LoadSolution sol = solve_loads(q);
        const auto m = static_cast<Eigen::Index>(q.phases());
        const int c = q.servers;
        const double mu = q.mu;
        const Matrix T = q.ph.generator();
        const Vector t = q.ph.exit();
        const Matrix I = Matrix::Identity(m, m);
        const std::string n = name;

        double root = 0.0;
        bool b2 = true;
        for (Eigen::Index k = 0; k < m; ++k) {
            const Complex eta = sol.spectral.eta(k);
            const CMatrix shifted = static_cast<double>(c) * eta * I.cast<Complex>() - T.cast<Complex>();
            const Complex g = q.ph.gamma().transpose().cast<Complex>() * shifted.inverse() * t.cast<Complex>();
            root = std::max(root, std::abs((mu - eta) / mu - g));

            const CMatrix R = t.cast<Complex>() * q.ph.gamma().transpose().cast<Complex>() * shifted.inverse();
            const CMatrix L2 = ((c - 1) * mu * I - (c - 1) * mu * ones_gamma(q) - T).cast<Complex>() - c * mu * R;
            const double scale = (c - 1) * mu * (1.0 + ones_gamma(q).norm()) + T.norm() + c * mu * R.norm();
            b2 = b2 && numerics::rank_is_m_minus_1(L2, 1e-10, 1e-6, scale).ok;
        }
        v.check(root <= 1e-10, n + " root identity " + fmt("%.3e", root));
        v.check(b2, n + " bracket rank");

        // B^{-1} D B = (c mu I - T - t gamma)^{-1}
        const Matrix resolvent = (c * mu * I - T - t * q.ph.gamma().transpose()).inverse();
        const CMatrix L3 = (c * mu * t * q.ph.gamma().transpose() * resolvent - (c - 1) * mu * I +
                            (c - 1) * mu * ones_gamma(q) + T)
                               .cast<Complex>();
        const double scale3 = c * mu * t.norm() * q.ph.gamma().norm() * resolvent.norm() + (c - 1) * mu * (1.0 + ones_gamma(q).norm()) + T.norm();
        v.check(numerics::rank_is_m_minus_1(L3, 1e-10, 1e-6, scale3).ok, n + " boundary rank");

        const Eigen::JacobiSVD<CMatrix> svd(sol.Y.stack(c - 1));
        const Vector sv = svd.singularValues();
        const double ratio = sv(m - 1) / sv(0);
        v.check(ratio > 1e-10, n + " Y_{c-1} rank ratio " + fmt("%.3e", ratio));
        v.note(n + ": root " + fmt("%.1e", root) + ", Y ratio " + fmt("%.2e", ratio));
    }
    return v;
}

Verdict criterion_6() {
    Verdict v;
    for (const auto& [name, q] : test_models()) {
        const LoadSolution sol = solve_loads(q);
        const auto m = static_cast<Eigen::Index>(q.phases());
        const int c = q.servers;
        const double mu = q.mu;
        const CMatrix T = q.ph.generator().cast<Complex>();
        const numerics::CVector t = q.ph.exit().cast<Complex>();
        const numerics::CRowVector gamma = q.ph.gamma().transpose().cast<Complex>();
        double exit_balance = 0.0, generator = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            const Complex eta = sol.spectral.eta(k);
            const numerics::CRowVector yc = sol.y(c, kk), ym = sol.y(c - 1, kk);
            const Complex lhs = mu / (mu - eta) * (yc * t)(0);
            const Complex rhs = c * mu * (ym * t)(0);
            exit_balance = std::max(exit_balance, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
            const numerics::CRowVector left = yc * (static_cast<double>(c) * eta * CMatrix::Identity(m, m) - T);
            const numerics::CRowVector right = c * mu * (ym * t)(0) * gamma;
            generator = std::max(generator, (left - right).norm() / std::max(1.0, left.norm()));
        }
        const std::string n = name;
        v.check(exit_balance <= 1e-9, n + " exit balance " + fmt("%.3e", exit_balance));
        v.check(generator <= 1e-9, n + " generator identity " + fmt("%.3e", generator));
        v.note(n + ": " + fmt("%.1e", exit_balance) + ", " + fmt("%.1e", generator));
    }
    return v;
}

Verdict criterion_7() {
    Verdict v;
    const auto t0 = Clock::now();
    for (const auto& [name, q] : test_models()) {
        SimConfig cfg;
        cfg.seed = 1;
        cfg.measured_arrivals = 1'000'000;
        cfg.threads = 1;
        const SimEstimate e = run_sim(q, cfg);
        const CompareReport r = compare(virtual_wait(solve_loads(q)), e);
        const std::string n = name;
        v.check(r.ks <= 0.005, n + " KS " + fmt("%.4f", r.ks));
        v.check(std::abs(r.z_atom_binomial) <= 4.0, n + " atom z " + fmt("%.2f", r.z_atom_binomial));
        v.check(std::abs(r.z_loss_binomial) <= 4.0, n + " loss z " + fmt("%.2f", r.z_loss_binomial));
        v.check(std::abs(r.z_atom) <= 4.0, n + " atom batch z " + fmt("%.2f", r.z_atom));
        v.check(std::abs(r.z_loss) <= 4.0, n + " loss batch z " + fmt("%.2f", r.z_loss));
        v.note(n + ": KS " + fmt("%.4f", r.ks) + " z " + fmt("%.2f", r.z_atom_binomial) + "/" +
               fmt("%.2f", r.z_loss_binomial));
    }
    const double elapsed = seconds_since(t0);
    v.check(elapsed <= 60.0, "runtime " + fmt("%.1f s", elapsed));
    v.note(fmt("%.2f s on one core", elapsed));
    return v;
}

Verdict criterion_8() {
    Verdict v;
    double imag = 0.0, lowest = HUGE_VAL, jump = 0.0;
    Rng rng(8);
    for (const auto& [name, q] : test_models()) {
        const LoadSolution sol = solve_loads(q);
        const VirtualWaitDistribution w = virtual_wait(sol);
        const int c = q.servers;
        for (const double x : interior_grid(q.tau, 1000)) {
            Complex f = 0.0;
            for (Eigen::Index k = 0; k < w.coeff.size(); ++k) f += w.coeff(k) * static_cast<double>(c) * std::exp(-w.rates(k) * x);
            imag = std::max(imag, std::abs(f.imag()));
            lowest = std::min(lowest, f.real());
        }
        const DensityGrid g = density_grid(sol, 1000);
        for (std::size_t i = 0; i < g.v.size(); ++i) lowest = std::min({lowest, g.f_spectral[i], g.f_matrix_exp[i]});

        // raw loads density on random points, and across min v_i = tau along random rays
        const auto raw = [&](const std::vector<double>& pt) {
            double sum = 0.0, vmin = pt[0];
            for (double x : pt) {
                sum += x;
                vmin = std::min(vmin, x);
            }
            const double s = std::min(q.tau, vmin);
            Complex acc = 0.0;
            for (Eigen::Index k = 0; k < w.coeff.size(); ++k) acc += w.coeff(k) * std::exp(-w.rates(k) * s);
            return acc * std::pow(q.mu, c - 1) * std::exp(-q.mu * sum + c * q.mu * s);
        };
        for (int ray = 0; ray < 100; ++ray) {
            std::vector<double> u(static_cast<std::size_t>(c));
            for (double& x : u) x = 0.1 + rng.uniform();
            const double umin = *std::min_element(u.begin(), u.end());
            std::vector<double> left(u.size()), right(u.size());
            for (std::size_t i = 0; i < u.size(); ++i) {
                left[i] = q.tau * u[i] / umin * (1.0 - 1e-14);
                right[i] = q.tau * u[i] / umin * (1.0 + 1e-14);
            }
            jump = std::max(jump, std::abs(loads_density(sol, left) - loads_density(sol, right)));
            std::vector<double> inside(u.size());
            for (std::size_t i = 0; i < u.size(); ++i) inside[i] = 3.0 * q.tau * rng.uniform() + 1e-3;
            const Complex z = raw(inside);
            imag = std::max(imag, std::abs(z.imag()));
            lowest = std::min(lowest, z.real());
        }
    }
    v.check(imag <= 1e-10, "imaginary residue " + fmt("%.3e", imag));
    v.check(lowest >= -1e-12, "lowest density " + fmt("%.3e", lowest));
    v.check(jump <= 1e-12, "continuity " + fmt("%.3e", jump));
    v.note("Im " + fmt("%.1e", imag) + ", min f " + fmt("%.3g", lowest) + ", jump " + fmt("%.1e", jump));
    return v;
}

int shell(const std::string& cmd) {
    const int st = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict criterion_9() {
    Verdict v;
    const fs::path root = fs::temp_directory_path() / ("phmcq_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string cli = PHMCQ_CLI;
    const std::vector<std::string> files = {"solution.json", "density.csv", "summary.json", "simulation.csv", "compare.json"};
    int compared = 0;
    for (const char* model : {"mm1d.json", "erlang2.json", "hyperexp.json"}) {
        const std::string path = std::string(PHMCQ_TEST_DATA) + "/" + model;
        std::vector<fs::path> runs;
        for (const char* threads : {"1", "1", "4"}) {
            const fs::path out = root / (std::string(model) + "_" + std::to_string(runs.size()));
            runs.push_back(out);
            const int a = shell(cli + " analyze --model " + path + " --out " + out.string());
            const int c = shell(cli + " compare --model " + path + " --out " + out.string() +
                                " --arrivals 200000 --replications 4 --seed 9 --threads " + threads);
            v.check(a == 0 && c <= 1, std::string(model) + " CLI exit codes");
        }
        for (const std::string& f : files) {
            const std::string ref = slurp(runs[0] / f);
            v.check(!ref.empty(), std::string(model) + " missing " + f);
            for (std::size_t r = 1; r < runs.size(); ++r) {
                v.check(slurp(runs[r] / f) == ref, std::string(model) + " " + f + " differs in run " + std::to_string(r));
                ++compared;
            }
        }
    }
    fs::remove_all(root);
    v.note(std::to_string(compared) + " file pairs compared, runs with 1 and 4 threads");
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"m=1 closed case", criterion_1},
        {"scalar eigenvalue law", criterion_2},
        {"representation equivalence", criterion_3},
        {"route equivalence", criterion_4},
        {"rank and root structure", criterion_5},
        {"boundary identities", criterion_6},
        {"simulation concordance", criterion_7},
        {"realness and positivity", criterion_8},
        {"determinism", criterion_9},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        std::printf("criterion %zu %-28s %s  %s\n", i + 1, criteria[i].first, v.ok() ? "PASS" : "FAIL", v.detail().c_str());
        failed += v.ok() ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
