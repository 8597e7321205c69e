#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "phmcq/model.hpp"
#include "phmcq/waiting.hpp"

namespace phmcq {

struct SimConfig {
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> warmup_arrivals;  // default: see default_warmup()
    std::uint64_t measured_arrivals = 1'000'000;   // total over all replications
    std::uint32_t replications = 1;
    std::uint32_t threads = 0;  // 0: hardware concurrency
    std::uint32_t batches = 20; // batch-means batches per replication
    std::vector<double> grid;   // ECDF points in [0, tau]; empty: 1000 equispaced points
};

/// Time-stationary estimates of the virtual waiting time. The ECDF is
/// conditional on 0 < V < tau.
struct SimEstimate {
    double tau = 0.0;
    double atom0 = 0.0, atom0_se = 0.0;                  // P(V = 0)
    double loss = 0.0, loss_se = 0.0;                    // P(V >= tau)
    double customer_loss = 0.0, customer_loss_se = 0.0;  // fraction of arrivals turned away
    std::vector<double> grid;
    std::vector<double> ecdf;
    std::vector<double> mean_load;  // time-average remaining load per server
    std::uint64_t arrivals = 0;
    std::uint64_t admitted = 0;
    double max_admitted_wait = 0.0;
    double observed_time = 0.0;
};

std::uint64_t default_warmup(const QueueModel& model);

struct ArrivalRecord {
    double time = 0.0;          // arrival epoch
    double offered_wait = 0.0;  // min_i V_i just before the arrival
    bool admitted = false;
    double service = 0.0;  // 0 for lost customers
    std::size_t server = 0;
};

/// The first `arrivals` arrivals to an empty system on the stream of
/// replication 0, without warmup.
std::vector<ArrivalRecord> trace_sim(const QueueModel& model, std::uint64_t seed, std::uint64_t arrivals);

/// Simulates the remaining-load recursion of the FCFS queue: loads drain at
/// unit rate between arrivals; an arrival facing min_i V_i < tau adds an
/// Exp(mu) service to the least-loaded server (lowest index on ties),
/// otherwise it is lost. Replications run on separate jump-ahead streams and
/// are merged in replication order, so the result does not depend on the
/// thread count.
SimEstimate run_sim(const QueueModel& model, const SimConfig& cfg);

struct CompareReport {
    double ks = 0.0;
    double z_atom = 0.0;  // against the batch-means standard error
    double z_loss = 0.0;
    double z_atom_binomial = 0.0;  // against sqrt(p (1 - p) / arrivals) at the analytic p
    double z_loss_binomial = 0.0;
    double atom_analytic = 0.0, atom_empirical = 0.0;
    double loss_analytic = 0.0, loss_empirical = 0.0;
    double tol_ks = 0.0;
    double z_max = 0.0;
    bool pass = false;
};

/// KS distance between the conditional CDFs on the simulation grid and
/// z-scores of the atom and tail masses. Passes when the KS distance and all
/// four z-scores are within their thresholds.
CompareReport compare(const VirtualWaitDistribution& analytic, const SimEstimate& emp, double tol_ks = 0.005,
                      double z_max = 4.0);

/// `stat,estimate,stderr` rows, then an `ecdf_v,ecdf_value` block.
void write_sim_csv(const SimEstimate& est, std::ostream& out);

}  // namespace phmcq
