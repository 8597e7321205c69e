#include "phmcq/phmcq.h"

#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "phmcq/error.hpp"
#include "phmcq/export.hpp"
#include "phmcq/load_solver.hpp"
#include "phmcq/model.hpp"
#include "phmcq/simulator.hpp"
#include "phmcq/waiting.hpp"

struct phmcq_model {
    phmcq::QueueModel q;
};

struct phmcq_solution {
    phmcq::LoadSolution sol;
    phmcq::VirtualWaitDistribution wait;
    phmcq::MatrixExpForm mexp;
    phmcq::Diagnostics diagnostics;
};

struct phmcq_report {
    phmcq::Diagnostics diagnostics;
    std::string text;
};

struct phmcq_sim {
    phmcq::SimEstimate est;
};

namespace {

thread_local std::string last_error;

phmcq_status status_of(phmcq::ErrorKind kind) {
    switch (kind) {
        case phmcq::ErrorKind::input: return PHMCQ_INPUT;
        case phmcq::ErrorKind::assumption: return PHMCQ_ASSUMPTION;
        case phmcq::ErrorKind::numerical: return PHMCQ_NUMERICAL;
    }
    return PHMCQ_NUMERICAL;
}

phmcq_status set_error(phmcq_status code, std::string msg) {
    last_error = std::move(msg);
    return code;
}

template <typename F>
phmcq_status guarded(F&& f) {
    try {
        last_error.clear();
        return f();
    } catch (const phmcq::Error& e) {
        return set_error(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(PHMCQ_NUMERICAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(PHMCQ_NUMERICAL, e.what());
    }
}

#define PHMCQ_REQUIRE(cond, what) \
    if (!(cond)) return set_error(PHMCQ_INPUT, what)

phmcq_check_status check_status(phmcq::Status s) {
    switch (s) {
        case phmcq::Status::pass: return PHMCQ_PASS;
        case phmcq::Status::warn: return PHMCQ_WARN;
        case phmcq::Status::fail: return PHMCQ_FAIL;
    }
    return PHMCQ_FAIL;
}

phmcq::SolverOptions to_options(const phmcq_options* o) {
    phmcq::SolverOptions s;
    if (!o) return s;
    s.tol_zero = o->tol_zero;
    s.tol_nonzero = o->tol_nonzero;
    s.margin_fail = o->margin_fail;
    s.margin_warn = o->margin_warn;
    s.tol_identity = o->tol_identity;
    s.tol_root = o->tol_root;
    s.tol_route = o->tol_route;
    s.tol_real = o->tol_real;
    s.phi_order = o->phi_order == 1 ? phmcq::PhiOrder::delta_Y_E : phmcq::PhiOrder::delta_E_Y;
    return s;
}

// Renders into memory first so a failed write never leaves a partial file
// behind a success code.
template <typename W>
phmcq_status write_file(const char* path, W&& writer) {
    PHMCQ_REQUIRE(path, "null path");
    std::ostringstream buf;
    writer(buf);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return set_error(PHMCQ_INPUT, std::string("cannot open ") + path + " for writing");
    out << buf.str();
    out.close();
    if (!out) return set_error(PHMCQ_INPUT, std::string("write failed: ") + path);
    return PHMCQ_OK;
}

phmcq_status complex_out(const phmcq::CVector& v, size_t k, double* re, double* im) {
    PHMCQ_REQUIRE(re && im, "null output pointer");
    PHMCQ_REQUIRE(k < static_cast<size_t>(v.size()), "index out of range");
    *re = v(static_cast<Eigen::Index>(k)).real();
    *im = v(static_cast<Eigen::Index>(k)).imag();
    return PHMCQ_OK;
}

}  // namespace

extern "C" {

const char* phmcq_last_error(void) { return last_error.c_str(); }

phmcq_status phmcq_model_parse(const char* json, phmcq_model** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(json && out, "null argument");
        *out = new phmcq_model{phmcq::parse_model_json(json)};
        return PHMCQ_OK;
    });
}

phmcq_status phmcq_model_load(const char* path, phmcq_model** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(path && out, "null argument");
        *out = new phmcq_model{phmcq::load_model_json(path)};
        return PHMCQ_OK;
    });
}

phmcq_status phmcq_model_create(size_t m, const double* gamma, const double* T, int c, double mu, double tau,
                                phmcq_model** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(gamma && T && out, "null argument");
        PHMCQ_REQUIRE(m >= 1, "model needs at least one phase");
        const auto n = static_cast<Eigen::Index>(m);
        Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(gamma, n);
        Eigen::MatrixXd G = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(T, n, n);
        *out = new phmcq_model{phmcq::make_queue_model(phmcq::make_phase_type(std::move(g), std::move(G)), c, mu, tau)};
        return PHMCQ_OK;
    });
}

void phmcq_model_free(phmcq_model* model) { delete model; }

size_t phmcq_model_phases(const phmcq_model* model) { return model ? model->q.phases() : 0; }
int phmcq_model_servers(const phmcq_model* model) { return model ? model->q.servers : 0; }
double phmcq_model_tau(const phmcq_model* model) { return model ? model->q.tau : 0.0; }

void phmcq_options_default(phmcq_options* opts) {
    if (!opts) return;
    const phmcq::SolverOptions s;
    opts->tol_zero = s.tol_zero;
    opts->tol_nonzero = s.tol_nonzero;
    opts->margin_fail = s.margin_fail;
    opts->margin_warn = s.margin_warn;
    opts->tol_identity = s.tol_identity;
    opts->tol_root = s.tol_root;
    opts->tol_route = s.tol_route;
    opts->tol_real = s.tol_real;
    opts->phi_order = 0;
    opts->check_grid = 1000;
}

phmcq_status phmcq_solve(const phmcq_model* model, const phmcq_options* opts, phmcq_solution** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(model && out, "null argument");
        const phmcq::SolverOptions so = to_options(opts);
        const size_t grid = opts ? opts->check_grid : 1000;
        phmcq::LoadSolution sol = phmcq::solve_loads(model->q, so);
        phmcq::VirtualWaitDistribution wait = phmcq::virtual_wait(sol);
        phmcq::MatrixExpForm mexp = phmcq::matrix_exp_form(model->q, phmcq::coefficient_bridge(model->q, sol, sol.spectral).p);
        phmcq::Diagnostics diag = sol.diagnostics;
        if (grid > 0) diag.append(phmcq::wait_checks(sol, grid, so));
        *out = new phmcq_solution{std::move(sol), std::move(wait), std::move(mexp), std::move(diag)};
        return PHMCQ_OK;
    });
}

void phmcq_solution_free(phmcq_solution* sol) { delete sol; }

size_t phmcq_solution_phases(const phmcq_solution* sol) { return sol ? sol->sol.model.phases() : 0; }

phmcq_status phmcq_solution_eta(const phmcq_solution* sol, size_t k, double* re, double* im) {
    PHMCQ_REQUIRE(sol, "null solution");
    return complex_out(sol->sol.spectral.eta, k, re, im);
}

phmcq_status phmcq_solution_kappa(const phmcq_solution* sol, size_t k, double* re, double* im) {
    PHMCQ_REQUIRE(sol, "null solution");
    return complex_out(sol->sol.spectral.kappa, k, re, im);
}

phmcq_status phmcq_solution_delta(const phmcq_solution* sol, size_t k, double* re, double* im) {
    PHMCQ_REQUIRE(sol, "null solution");
    return complex_out(sol->sol.delta, k, re, im);
}

phmcq_status phmcq_solution_delta_phi(const phmcq_solution* sol, size_t k, double* re, double* im) {
    PHMCQ_REQUIRE(sol, "null solution");
    return complex_out(sol->sol.delta_phi, k, re, im);
}

phmcq_status phmcq_solution_y(const phmcq_solution* sol, int i, size_t k, size_t j, double* re, double* im) {
    PHMCQ_REQUIRE(sol, "null solution");
    PHMCQ_REQUIRE(i >= 0 && i <= sol->sol.model.servers, "server index out of range");
    PHMCQ_REQUIRE(k < sol->sol.model.phases(), "root index out of range");
    return complex_out(sol->sol.y(i, k).transpose(), j, re, im);
}

phmcq_status phmcq_solution_decomposition(const phmcq_solution* sol, phmcq_decomposition* out) {
    PHMCQ_REQUIRE(sol && out, "null argument");
    out->atom0 = sol->wait.atom0;
    out->continuous = sol->wait.continuous;
    out->tail = sol->wait.tail;
    return PHMCQ_OK;
}

phmcq_status phmcq_virtual_density(const phmcq_solution* sol, double v, double* out) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol && out, "null argument");
        PHMCQ_REQUIRE(v > 0.0 && v < sol->wait.tau, "v must lie in (0, tau)");
        *out = sol->wait.density(v);
        return PHMCQ_OK;
    });
}

phmcq_status phmcq_matrix_exp_density(const phmcq_solution* sol, double v, double* out) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol && out, "null argument");
        *out = phmcq::matrix_exp_form_density(sol->sol.model, sol->mexp, v);
        return PHMCQ_OK;
    });
}

phmcq_status phmcq_conditional_cdf(const phmcq_solution* sol, double x, double* out) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol && out, "null argument");
        *out = sol->wait.conditional_cdf(x);
        return PHMCQ_OK;
    });
}

phmcq_status phmcq_loads_density(const phmcq_solution* sol, const double* v, size_t n, double* out) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol && v && out, "null argument");
        *out = phmcq::loads_density(sol->sol, std::span<const double>(v, n));
        return PHMCQ_OK;
    });
}

phmcq_check_status phmcq_solution_check_status(const phmcq_solution* sol) {
    return sol ? check_status(sol->diagnostics.overall()) : PHMCQ_FAIL;
}

phmcq_status phmcq_solution_write_json(const phmcq_solution* sol, const char* path) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol, "null solution");
        return write_file(path, [&](std::ostream& o) { phmcq::write_solution_json(sol->sol, sol->diagnostics, o); });
    });
}

phmcq_status phmcq_solution_write_summary(const phmcq_solution* sol, const char* path) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol, "null solution");
        return write_file(path, [&](std::ostream& o) { phmcq::write_summary_json(sol->sol, o); });
    });
}

phmcq_status phmcq_solution_write_density_csv(const phmcq_solution* sol, size_t n, const char* path) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol, "null solution");
        PHMCQ_REQUIRE(n >= 2, "grid size must be at least 2");
        const phmcq::DensityGrid g = phmcq::density_grid(sol->sol, n);
        return write_file(path, [&](std::ostream& o) { phmcq::write_density_csv(g, o); });
    });
}

phmcq_status phmcq_check(const phmcq_model* model, const phmcq_options* opts, phmcq_report** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(model && out, "null argument");
        const phmcq::SolverOptions so = to_options(opts);
        const size_t grid = opts ? opts->check_grid : 1000;
        auto r = std::make_unique<phmcq_report>();
        const phmcq::SpectralData spectral = phmcq::build_spectral(model->q);
        r->diagnostics = phmcq::check_assumptions(model->q, spectral, so);
        phmcq_status code = PHMCQ_OK;
        if (r->diagnostics.overall() == phmcq::Status::fail) {
            code = set_error(PHMCQ_ASSUMPTION, "violated: " + r->diagnostics.failure_summary());
        } else {
            const phmcq::LoadSolution sol = phmcq::solve_loads(model->q, so);
            r->diagnostics = sol.diagnostics;
            if (grid > 0) r->diagnostics.append(phmcq::wait_checks(sol, grid, so));
            if (r->diagnostics.overall() == phmcq::Status::fail) {
                code = set_error(PHMCQ_THRESHOLD, "threshold exceeded: " + r->diagnostics.failure_summary());
            }
        }
        r->text = r->diagnostics.to_text();
        *out = r.release();
        return code;
    });
}

phmcq_status phmcq_solution_report(const phmcq_solution* sol, phmcq_report** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol && out, "null argument");
        *out = new phmcq_report{sol->diagnostics, sol->diagnostics.to_text()};
        return PHMCQ_OK;
    });
}

void phmcq_report_free(phmcq_report* report) { delete report; }

size_t phmcq_report_size(const phmcq_report* report) { return report ? report->diagnostics.checks().size() : 0; }

phmcq_status phmcq_report_entry(const phmcq_report* report, size_t idx, const char** name, double* value,
                                double* threshold, phmcq_check_status* status) {
    PHMCQ_REQUIRE(report, "null report");
    PHMCQ_REQUIRE(idx < report->diagnostics.checks().size(), "index out of range");
    const phmcq::Check& c = report->diagnostics.checks()[idx];
    if (name) *name = c.name.c_str();
    if (value) *value = c.value;
    if (threshold) *threshold = c.threshold;
    if (status) *status = check_status(c.status);
    return PHMCQ_OK;
}

phmcq_check_status phmcq_report_status(const phmcq_report* report) {
    return report ? check_status(report->diagnostics.overall()) : PHMCQ_FAIL;
}

const char* phmcq_report_text(const phmcq_report* report) { return report ? report->text.c_str() : ""; }

phmcq_status phmcq_report_write_json(const phmcq_report* report, const char* path) {
    return guarded([&] {
        PHMCQ_REQUIRE(report, "null report");
        return write_file(path, [&](std::ostream& o) { phmcq::write_diagnostics_json(report->diagnostics, o); });
    });
}

void phmcq_sim_config_default(phmcq_sim_config* cfg) {
    if (!cfg) return;
    const phmcq::SimConfig s;
    cfg->seed = s.seed;
    cfg->measured_arrivals = s.measured_arrivals;
    cfg->replications = s.replications;
    cfg->threads = s.threads;
    cfg->batches = s.batches;
    cfg->default_warmup = 1;
    cfg->warmup_arrivals = 0;
    cfg->grid_size = 1000;
}

phmcq_status phmcq_simulate(const phmcq_model* model, const phmcq_sim_config* cfg, phmcq_sim** out) {
    return guarded([&] {
        PHMCQ_REQUIRE(model && cfg && out, "null argument");
        PHMCQ_REQUIRE(cfg->grid_size >= 2, "grid size must be at least 2");
        PHMCQ_REQUIRE(cfg->batches >= 2, "at least two batches are needed for a standard error");
        phmcq::SimConfig sc;
        sc.seed = cfg->seed;
        sc.measured_arrivals = cfg->measured_arrivals;
        sc.replications = cfg->replications;
        sc.threads = cfg->threads;
        sc.batches = cfg->batches;
        if (!cfg->default_warmup) sc.warmup_arrivals = cfg->warmup_arrivals;
        const double tau = model->q.tau;
        for (size_t i = 1; i <= cfg->grid_size; ++i) {
            sc.grid.push_back(tau * static_cast<double>(i) / static_cast<double>(cfg->grid_size));
        }
        *out = new phmcq_sim{phmcq::run_sim(model->q, sc)};
        return PHMCQ_OK;
    });
}

void phmcq_sim_free(phmcq_sim* sim) { delete sim; }

phmcq_status phmcq_sim_summary_get(const phmcq_sim* sim, phmcq_sim_summary* out) {
    PHMCQ_REQUIRE(sim && out, "null argument");
    const phmcq::SimEstimate& e = sim->est;
    out->atom0 = e.atom0;
    out->atom0_se = e.atom0_se;
    out->loss = e.loss;
    out->loss_se = e.loss_se;
    out->customer_loss = e.customer_loss;
    out->customer_loss_se = e.customer_loss_se;
    out->arrivals = e.arrivals;
    out->admitted = e.admitted;
    out->max_admitted_wait = e.max_admitted_wait;
    out->observed_time = e.observed_time;
    return PHMCQ_OK;
}

size_t phmcq_sim_grid_size(const phmcq_sim* sim) { return sim ? sim->est.grid.size() : 0; }

phmcq_status phmcq_sim_ecdf(const phmcq_sim* sim, size_t idx, double* v, double* value) {
    PHMCQ_REQUIRE(sim && v && value, "null argument");
    PHMCQ_REQUIRE(idx < sim->est.grid.size(), "index out of range");
    *v = sim->est.grid[idx];
    *value = sim->est.ecdf[idx];
    return PHMCQ_OK;
}

phmcq_status phmcq_sim_mean_load(const phmcq_sim* sim, int server, double* out) {
    PHMCQ_REQUIRE(sim && out, "null argument");
    PHMCQ_REQUIRE(server >= 0 && static_cast<size_t>(server) < sim->est.mean_load.size(), "server out of range");
    *out = sim->est.mean_load[static_cast<size_t>(server)];
    return PHMCQ_OK;
}

phmcq_status phmcq_sim_write_csv(const phmcq_sim* sim, const char* path) {
    return guarded([&] {
        PHMCQ_REQUIRE(sim, "null simulation");
        return write_file(path, [&](std::ostream& o) { phmcq::write_sim_csv(sim->est, o); });
    });
}

phmcq_status phmcq_compare(const phmcq_solution* sol, const phmcq_sim* sim, double tol_ks, double z_max,
                           const char* path, phmcq_compare_result* out) {
    return guarded([&] {
        PHMCQ_REQUIRE(sol && sim, "null argument");
        PHMCQ_REQUIRE(tol_ks >= 0.0 && z_max >= 0.0, "thresholds must be non-negative");
        const phmcq::CompareReport r = phmcq::compare(sol->wait, sim->est, tol_ks, z_max);
        if (path) {
            const phmcq_status st =
                write_file(path, [&](std::ostream& o) { phmcq::write_compare_json(r, sim->est, o); });
            if (st != PHMCQ_OK) return st;
        }
        if (out) *out = {r.ks, r.z_atom, r.z_loss, r.z_atom_binomial, r.z_loss_binomial, r.tol_ks, r.z_max, r.pass ? 1 : 0};
        if (r.pass) return PHMCQ_OK;
        return set_error(PHMCQ_THRESHOLD, "comparison thresholds exceeded");
    });
}

}  // extern "C"
