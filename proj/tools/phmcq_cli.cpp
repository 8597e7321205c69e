// Batch front end over the C API.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "phmcq/phmcq.h"

namespace fs = std::filesystem;

namespace {

struct RunSpec {
    std::string model;
    std::string out;  // empty: current directory; check writes nothing
    std::size_t grid = 1000;
    std::uint64_t seed = 1;
    std::uint64_t arrivals = 1'000'000;
    std::uint32_t replications = 1;
    std::uint32_t threads = 0;
    std::optional<std::uint64_t> warmup;
    std::optional<double> tol_residual;
    double tol_ks = 0.005;
    double z_max = 4.0;
};

int report(phmcq_status st) {
    if (st != PHMCQ_OK) std::fprintf(stderr, "error: %s\n", phmcq_last_error());
    return static_cast<int>(st);
}

std::string out_path(const RunSpec& rs, const char* name) {
    return (fs::path(rs.out.empty() ? "." : rs.out) / name).string();
}

int prepare_out(const RunSpec& rs) {
    if (rs.out.empty()) return PHMCQ_OK;
    std::error_code ec;
    fs::create_directories(rs.out, ec);
    if (ec) {
        std::fprintf(stderr, "error: cannot create %s: %s\n", rs.out.c_str(), ec.message().c_str());
        return PHMCQ_INPUT;
    }
    return PHMCQ_OK;
}

phmcq_options solver_options(const RunSpec& rs) {
    phmcq_options o;
    phmcq_options_default(&o);
    if (rs.tol_residual) {
        o.tol_identity = *rs.tol_residual;
        o.tol_root = *rs.tol_residual;
        o.tol_route = *rs.tol_residual;
    }
    o.check_grid = rs.grid;
    return o;
}

phmcq_sim_config sim_config(const RunSpec& rs) {
    phmcq_sim_config c;
    phmcq_sim_config_default(&c);
    c.seed = rs.seed;
    c.measured_arrivals = rs.arrivals;
    c.replications = rs.replications;
    c.threads = rs.threads;
    c.grid_size = rs.grid;
    if (rs.warmup) {
        c.default_warmup = 0;
        c.warmup_arrivals = *rs.warmup;
    }
    return c;
}

struct Model {
    phmcq_model* p = nullptr;
    ~Model() { phmcq_model_free(p); }
};
struct Solution {
    phmcq_solution* p = nullptr;
    ~Solution() { phmcq_solution_free(p); }
};
struct Sim {
    phmcq_sim* p = nullptr;
    ~Sim() { phmcq_sim_free(p); }
};
struct Report {
    phmcq_report* p = nullptr;
    ~Report() { phmcq_report_free(p); }
};

void print_failures(const phmcq_solution* sol) {
    Report r;
    if (phmcq_solution_report(sol, &r.p) != PHMCQ_OK) return;
    for (std::size_t i = 0; i < phmcq_report_size(r.p); ++i) {
        const char* name = nullptr;
        double value = 0.0, threshold = 0.0;
        phmcq_check_status st = PHMCQ_PASS;
        phmcq_report_entry(r.p, i, &name, &value, &threshold, &st);
        if (st != PHMCQ_PASS) {
            std::fprintf(stderr, "%s: %s = %.3e (threshold %.3e)\n", st == PHMCQ_WARN ? "warn" : "fail", name, value,
                         threshold);
        }
    }
}

int analyze(const RunSpec& rs, Solution& sol) {
    Model model;
    if (int st = report(phmcq_model_load(rs.model.c_str(), &model.p))) return st;
    const phmcq_options opts = solver_options(rs);
    return report(phmcq_solve(model.p, &opts, &sol.p));
}

int cmd_analyze(const RunSpec& rs) {
    if (int st = prepare_out(rs)) return st;
    Solution sol;
    if (int st = analyze(rs, sol)) return st;
    for (auto st : {phmcq_solution_write_json(sol.p, out_path(rs, "solution.json").c_str()),
                    phmcq_solution_write_density_csv(sol.p, rs.grid, out_path(rs, "density.csv").c_str()),
                    phmcq_solution_write_summary(sol.p, out_path(rs, "summary.json").c_str())}) {
        if (st != PHMCQ_OK) return report(st);
    }
    phmcq_decomposition d;
    phmcq_solution_decomposition(sol.p, &d);
    std::printf("atom0 %.17g\ncontinuous %.17g\ntail %.17g\n", d.atom0, d.continuous, d.tail);
    print_failures(sol.p);
    return phmcq_solution_check_status(sol.p) == PHMCQ_FAIL ? PHMCQ_THRESHOLD : PHMCQ_OK;
}

int cmd_simulate(const RunSpec& rs) {
    if (int st = prepare_out(rs)) return st;
    Model model;
    if (int st = report(phmcq_model_load(rs.model.c_str(), &model.p))) return st;
    const phmcq_sim_config cfg = sim_config(rs);
    Sim sim;
    if (int st = report(phmcq_simulate(model.p, &cfg, &sim.p))) return st;
    if (int st = report(phmcq_sim_write_csv(sim.p, out_path(rs, "simulation.csv").c_str()))) return st;
    phmcq_sim_summary s;
    phmcq_sim_summary_get(sim.p, &s);
    std::printf("atom0 %.17g +- %.3g\nloss %.17g +- %.3g\ncustomer_loss %.17g +- %.3g\n", s.atom0, s.atom0_se, s.loss,
                s.loss_se, s.customer_loss, s.customer_loss_se);
    return PHMCQ_OK;
}

int cmd_compare(const RunSpec& rs) {
    if (int st = prepare_out(rs)) return st;
    Solution sol;
    if (int st = analyze(rs, sol)) return st;
    Model model;
    if (int st = report(phmcq_model_load(rs.model.c_str(), &model.p))) return st;
    const phmcq_sim_config cfg = sim_config(rs);
    Sim sim;
    if (int st = report(phmcq_simulate(model.p, &cfg, &sim.p))) return st;
    if (int st = report(phmcq_sim_write_csv(sim.p, out_path(rs, "simulation.csv").c_str()))) return st;
    phmcq_compare_result r;
    const phmcq_status st =
        phmcq_compare(sol.p, sim.p, rs.tol_ks, rs.z_max, out_path(rs, "compare.json").c_str(), &r);
    if (st != PHMCQ_OK && st != PHMCQ_THRESHOLD) return report(st);
    std::printf("ks %.6g (tol %.6g)\nz_atom %.4g (binomial %.4g)\nz_loss %.4g (binomial %.4g)\nz limit %.4g\n%s\n", r.ks,
                r.tol_ks, r.z_atom, r.z_atom_binomial, r.z_loss, r.z_loss_binomial, r.z_max, r.pass ? "PASS" : "FAIL");
    return st;
}

int cmd_check(const RunSpec& rs) {
    Model model;
    if (int st = report(phmcq_model_load(rs.model.c_str(), &model.p))) return st;
    const phmcq_options opts = solver_options(rs);
    Report r;
    const phmcq_status st = phmcq_check(model.p, &opts, &r.p);
    if (!r.p) return report(st);
    std::fputs(phmcq_report_text(r.p), stdout);
    if (!rs.out.empty()) {
        if (int pst = prepare_out(rs)) return pst;
        if (int wst = report(phmcq_report_write_json(r.p, out_path(rs, "check.json").c_str()))) return wst;
    }
    return report(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PH/M/c+D remaining-loads solver"};
    app.require_subcommand(1);
    RunSpec rs;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--model", rs.model, "model JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", rs.out, "output directory");
        sub->add_option("--grid", rs.grid, "grid size")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{10'000'000}));
    };
    auto analytic = [&](CLI::App* sub) {
        sub->add_option("--tol-residual", rs.tol_residual, "threshold for identity, root and route residuals")
            ->check(CLI::PositiveNumber);
    };
    auto simulation = [&](CLI::App* sub) {
        sub->add_option("--seed", rs.seed, "random seed")->capture_default_str();
        sub->add_option("--arrivals", rs.arrivals, "measured arrivals over all replications")
            ->capture_default_str()
            ->check(CLI::Range(std::uint64_t{10'000}, UINT64_MAX));
        sub->add_option("--replications", rs.replications, "independent replications")
            ->capture_default_str()
            ->check(CLI::Range(1u, 1'000'000u));
        sub->add_option("--threads", rs.threads, "worker threads, 0 = all cores")->capture_default_str();
        sub->add_option("--warmup", rs.warmup, "warmup arrivals per replication");
    };

    auto* a = app.add_subcommand("analyze", "solve the model and write solution, density grid and summary");
    common(a);
    analytic(a);
    auto* s = app.add_subcommand("simulate", "simulate the queue and write the estimates");
    common(s);
    simulation(s);
    auto* c = app.add_subcommand("compare", "solve, simulate and test agreement");
    common(c);
    analytic(c);
    simulation(c);
    c->add_option("--tol-ks", rs.tol_ks, "KS threshold on the conditional CDF")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    c->add_option("--z-max", rs.z_max, "z-score limit for atom and loss")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    auto* k = app.add_subcommand("check", "print every assumption margin and residual");
    common(k);
    analytic(k);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : PHMCQ_INPUT;
    }

    if (a->parsed()) return cmd_analyze(rs);
    if (s->parsed()) return cmd_simulate(rs);
    if (c->parsed()) return cmd_compare(rs);
    return cmd_check(rs);
}
