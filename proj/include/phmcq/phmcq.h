#ifndef PHMCQ_H
#define PHMCQ_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PHMCQ_BUILDING)
#    define PHMCQ_API __declspec(dllexport)
#  else
#    define PHMCQ_API __declspec(dllimport)
#  endif
#else
#  define PHMCQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum phmcq_status {
    PHMCQ_OK = 0,
    PHMCQ_THRESHOLD = 1, /* a residual or statistical check failed */
    PHMCQ_INPUT = 2,     /* malformed model, bad argument, I/O failure */
    PHMCQ_ASSUMPTION = 3,
    PHMCQ_NUMERICAL = 4
} phmcq_status;

typedef enum phmcq_check_status { PHMCQ_PASS = 0, PHMCQ_WARN = 1, PHMCQ_FAIL = 2 } phmcq_check_status;

typedef struct phmcq_model phmcq_model;
typedef struct phmcq_solution phmcq_solution;
typedef struct phmcq_report phmcq_report;
typedef struct phmcq_sim phmcq_sim;

/* Message of the last failing call on this thread; empty if none. */
PHMCQ_API const char* phmcq_last_error(void);

/* ---- models ---- */

PHMCQ_API phmcq_status phmcq_model_parse(const char* json, phmcq_model** out);
PHMCQ_API phmcq_status phmcq_model_load(const char* path, phmcq_model** out);
/* T is row-major m x m. */
PHMCQ_API phmcq_status phmcq_model_create(size_t m, const double* gamma, const double* T, int c, double mu, double tau,
                                          phmcq_model** out);
PHMCQ_API void phmcq_model_free(phmcq_model* model);
PHMCQ_API size_t phmcq_model_phases(const phmcq_model* model);
PHMCQ_API int phmcq_model_servers(const phmcq_model* model);
PHMCQ_API double phmcq_model_tau(const phmcq_model* model);

/* ---- analytic solution ---- */

typedef struct phmcq_options {
    double tol_zero;
    double tol_nonzero;
    double margin_fail;
    double margin_warn;
    double tol_identity;
    double tol_root;
    double tol_route;
    double tol_real;
    int phi_order; /* 0: delta E Y_{c-1}, 1: delta Y_{c-1} E */
    size_t check_grid; /* grid size for the density-form comparison */
} phmcq_options;

PHMCQ_API void phmcq_options_default(phmcq_options* opts);

/* opts may be NULL. Fails with PHMCQ_ASSUMPTION when the model is outside
   the solver's scope; residual failures are reported through
   phmcq_solution_report and phmcq_solution_check_status. */
PHMCQ_API phmcq_status phmcq_solve(const phmcq_model* model, const phmcq_options* opts, phmcq_solution** out);
PHMCQ_API void phmcq_solution_free(phmcq_solution* sol);

PHMCQ_API size_t phmcq_solution_phases(const phmcq_solution* sol);
PHMCQ_API phmcq_status phmcq_solution_eta(const phmcq_solution* sol, size_t k, double* re, double* im);
PHMCQ_API phmcq_status phmcq_solution_kappa(const phmcq_solution* sol, size_t k, double* re, double* im);
PHMCQ_API phmcq_status phmcq_solution_delta(const phmcq_solution* sol, size_t k, double* re, double* im);
PHMCQ_API phmcq_status phmcq_solution_delta_phi(const phmcq_solution* sol, size_t k, double* re, double* im);
/* Component j of y_i^k. */
PHMCQ_API phmcq_status phmcq_solution_y(const phmcq_solution* sol, int i, size_t k, size_t j, double* re, double* im);

typedef struct phmcq_decomposition {
    double atom0;
    double continuous;
    double tail;
} phmcq_decomposition;

PHMCQ_API phmcq_status phmcq_solution_decomposition(const phmcq_solution* sol, phmcq_decomposition* out);
/* Virtual-wait density on (0, tau), spectral and matrix-exponential forms. */
PHMCQ_API phmcq_status phmcq_virtual_density(const phmcq_solution* sol, double v, double* out);
PHMCQ_API phmcq_status phmcq_matrix_exp_density(const phmcq_solution* sol, double v, double* out);
/* P(V <= x | 0 < V < tau). */
PHMCQ_API phmcq_status phmcq_conditional_cdf(const phmcq_solution* sol, double x, double* out);
/* Joint density of the c remaining loads. */
PHMCQ_API phmcq_status phmcq_loads_density(const phmcq_solution* sol, const double* v, size_t n, double* out);
/* Worst-case status of all checks recorded while solving. */
PHMCQ_API phmcq_check_status phmcq_solution_check_status(const phmcq_solution* sol);

PHMCQ_API phmcq_status phmcq_solution_write_json(const phmcq_solution* sol, const char* path);
PHMCQ_API phmcq_status phmcq_solution_write_summary(const phmcq_solution* sol, const char* path);
/* n interior points tau (i + 1) / (n + 1). */
PHMCQ_API phmcq_status phmcq_solution_write_density_csv(const phmcq_solution* sol, size_t n, const char* path);

/* ---- check reports ---- */

/* Assumption margins and, when they hold, every solver residual. The report
   is produced whenever the spectra can be computed; the return value is
   PHMCQ_ASSUMPTION or PHMCQ_THRESHOLD if a check failed. */
PHMCQ_API phmcq_status phmcq_check(const phmcq_model* model, const phmcq_options* opts, phmcq_report** out);
PHMCQ_API phmcq_status phmcq_solution_report(const phmcq_solution* sol, phmcq_report** out);
PHMCQ_API void phmcq_report_free(phmcq_report* report);
PHMCQ_API size_t phmcq_report_size(const phmcq_report* report);
/* name stays valid until the report is freed. */
PHMCQ_API phmcq_status phmcq_report_entry(const phmcq_report* report, size_t idx, const char** name, double* value,
                                          double* threshold, phmcq_check_status* status);
PHMCQ_API phmcq_check_status phmcq_report_status(const phmcq_report* report);
/* One line per check; valid until the report is freed. */
PHMCQ_API const char* phmcq_report_text(const phmcq_report* report);
PHMCQ_API phmcq_status phmcq_report_write_json(const phmcq_report* report, const char* path);

/* ---- simulation ---- */

typedef struct phmcq_sim_config {
    uint64_t seed;
    uint64_t measured_arrivals; /* total over all replications, >= 10^4 */
    uint32_t replications;
    uint32_t threads; /* 0: hardware concurrency */
    uint32_t batches; /* batch-means batches per replication */
    int default_warmup; /* nonzero: ignore warmup_arrivals */
    uint64_t warmup_arrivals;
    size_t grid_size; /* ECDF points tau i / n, i = 1..n */
} phmcq_sim_config;

typedef struct phmcq_sim_summary {
    double atom0, atom0_se;
    double loss, loss_se;
    double customer_loss, customer_loss_se;
    uint64_t arrivals;
    uint64_t admitted;
    double max_admitted_wait;
    double observed_time;
} phmcq_sim_summary;

PHMCQ_API void phmcq_sim_config_default(phmcq_sim_config* cfg);
PHMCQ_API phmcq_status phmcq_simulate(const phmcq_model* model, const phmcq_sim_config* cfg, phmcq_sim** out);
PHMCQ_API void phmcq_sim_free(phmcq_sim* sim);
PHMCQ_API phmcq_status phmcq_sim_summary_get(const phmcq_sim* sim, phmcq_sim_summary* out);
PHMCQ_API size_t phmcq_sim_grid_size(const phmcq_sim* sim);
PHMCQ_API phmcq_status phmcq_sim_ecdf(const phmcq_sim* sim, size_t idx, double* v, double* value);
PHMCQ_API phmcq_status phmcq_sim_mean_load(const phmcq_sim* sim, int server, double* out);
PHMCQ_API phmcq_status phmcq_sim_write_csv(const phmcq_sim* sim, const char* path);

/* ---- analytic vs simulation ---- */

typedef struct phmcq_compare_result {
    double ks;
    double z_atom; /* batch-means standard error */
    double z_loss;
    double z_atom_binomial; /* binomial standard error at the analytic mass */
    double z_loss_binomial;
    double tol_ks;
    double z_max;
    int pass;
} phmcq_compare_result;

/* Returns PHMCQ_OK or PHMCQ_THRESHOLD according to the verdict; writes the
   report to path unless path is NULL. */
PHMCQ_API phmcq_status phmcq_compare(const phmcq_solution* sol, const phmcq_sim* sim, double tol_ks, double z_max,
                                     const char* path, phmcq_compare_result* out);

#ifdef __cplusplus
}
#endif

#endif
