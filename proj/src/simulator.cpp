#include "phmcq/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "phmcq/error.hpp"

namespace phmcq {

namespace {

struct Batch {
    double time = 0.0;
    double idle = 0.0;
    double over = 0.0;
    std::uint64_t arrivals = 0;
    std::uint64_t lost = 0;
};

// Sums only; merged in replication order.
struct Accumulator {
    std::vector<Batch> batches;
    // occupation measure of V on (0, tau) as a union of intervals [lo, hi);
    // counts and sums are binned by the first grid point above the endpoint
    std::vector<double> lo_count, lo_sum, hi_count, hi_sum;
    std::vector<double> load_integral;
    std::uint64_t admitted = 0;
    double max_admitted_wait = 0.0;
};

class Replication {
public:
    Replication(const QueueModel& q, const std::vector<double>& grid, Rng rng)
        : q_(q), grid_(grid), sampler_(q.ph), rng_(rng), loads_(static_cast<std::size_t>(q.servers), 0.0) {}

    Accumulator run(std::uint64_t warmup, std::uint64_t measured, std::uint32_t nbatches) {
        Accumulator acc;
        const std::size_t g = grid_.size();
        acc.lo_count.assign(g + 1, 0.0);
        acc.lo_sum.assign(g + 1, 0.0);
        acc.hi_count.assign(g + 1, 0.0);
        acc.hi_sum.assign(g + 1, 0.0);
        acc.load_integral.assign(loads_.size(), 0.0);
        const std::uint32_t nb = static_cast<std::uint32_t>(std::min<std::uint64_t>(nbatches, measured));
        acc.batches.assign(nb, Batch{});

        for (std::uint64_t n = 0; n < warmup; ++n) {
            arrive(nullptr, nullptr);
            drain(sampler_(rng_));
        }
        for (std::uint64_t n = 0; n < measured; ++n) {
            Batch& b = acc.batches[static_cast<std::size_t>(n * nb / measured)];
            arrive(&acc, &b);
            const double gap = sampler_(rng_);
            observe(gap, acc, b);
            drain(gap);
        }
        return acc;
    }

    std::vector<ArrivalRecord> trace(std::uint64_t n) {
        std::vector<ArrivalRecord> out;
        double t = 0.0;
        for (std::uint64_t k = 0; k < n; ++k) {
            ArrivalRecord rec;
            rec.time = t;
            arrive(nullptr, nullptr, &rec);
            out.push_back(rec);
            const double gap = sampler_(rng_);
            drain(gap);
            t += gap;
        }
        return out;
    }

private:
    std::size_t least_loaded() const {
        return static_cast<std::size_t>(std::min_element(loads_.begin(), loads_.end()) - loads_.begin());
    }

    void arrive(Accumulator* acc, Batch* b, ArrivalRecord* rec = nullptr) {
        const std::size_t i = least_loaded();
        const double wait = loads_[i];
        const bool admit = wait < q_.tau;
        const double service = admit ? -std::log(rng_.uniform()) / q_.mu : 0.0;
        loads_[i] += service;
        if (rec) *rec = {rec->time, wait, admit, service, i};
        if (b) {
            ++b->arrivals;
            if (!admit) ++b->lost;
        }
        if (acc && admit) {
            ++acc->admitted;
            acc->max_admitted_wait = std::max(acc->max_admitted_wait, wait);
        }
    }

    // V(t) = max(0, w0 - t) over the next inter-arrival gap
    void observe(double gap, Accumulator& acc, Batch& b) {
        const double w0 = loads_[least_loaded()];
        b.time += gap;
        b.idle += std::max(0.0, gap - w0);
        if (w0 > q_.tau) b.over += std::min(gap, w0 - q_.tau);
        const double lo = std::max(0.0, w0 - gap);
        const double hi = std::min(w0, q_.tau);
        if (hi > lo) {
            const auto ilo = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), lo) - grid_.begin());
            const auto ihi = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), hi) - grid_.begin());
            acc.lo_count[ilo] += 1.0;
            acc.lo_sum[ilo] += lo;
            acc.hi_count[ihi] += 1.0;
            acc.hi_sum[ihi] += hi;
        }
        for (std::size_t i = 0; i < loads_.size(); ++i) {
            const double v = loads_[i];
            acc.load_integral[i] += v >= gap ? gap * v - 0.5 * gap * gap : 0.5 * v * v;
        }
    }

    void drain(double gap) {
        for (double& v : loads_) v = std::max(0.0, v - gap);
    }

    const QueueModel& q_;
    const std::vector<double>& grid_;
    PhSampler sampler_;
    Rng rng_;
    std::vector<double> loads_;
};

double batch_se(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace

std::uint64_t default_warmup(const QueueModel& q) {
    const double heuristic = 50.0 * q.servers * (1.0 / q.mu) / ph_mean(q.ph);
    return std::max<std::uint64_t>(100'000, static_cast<std::uint64_t>(std::ceil(heuristic)));
}

std::vector<ArrivalRecord> trace_sim(const QueueModel& q, std::uint64_t seed, std::uint64_t arrivals) {
    const std::vector<double> grid;
    return Replication(q, grid, Rng(seed)).trace(arrivals);
}

SimEstimate run_sim(const QueueModel& q, const SimConfig& cfg) {
    if (cfg.measured_arrivals < 10'000) fail_input("simulation: measured_arrivals must be at least 10^4");
    if (cfg.replications < 1) fail_input("simulation: replications must be at least 1");
    if (cfg.measured_arrivals < cfg.replications) fail_input("simulation: fewer arrivals than replications");

    std::vector<double> grid = cfg.grid;
    if (grid.empty()) {
        for (int i = 1; i <= 1000; ++i) grid.push_back(q.tau * i / 1000.0);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= q.tau)) fail_input("simulation: grid points must lie in [0, tau]");
        if (i > 0 && !(grid[i] > grid[i - 1])) fail_input("simulation: grid must be strictly increasing");
    }

    const std::uint64_t warmup = cfg.warmup_arrivals.value_or(default_warmup(q));
    const std::uint32_t reps = cfg.replications;
    std::vector<std::uint64_t> share(reps, cfg.measured_arrivals / reps);
    for (std::uint64_t r = 0; r < cfg.measured_arrivals % reps; ++r) ++share[r];

    std::vector<Rng> streams;
    Rng base(cfg.seed);
    for (std::uint32_t r = 0; r < reps; ++r) {
        streams.push_back(base);
        base.jump();
    }

    std::vector<Accumulator> results(reps);
    std::atomic<std::uint32_t> next{0};
    auto worker = [&] {
        for (std::uint32_t r = next++; r < reps; r = next++) {
            Replication rep(q, grid, streams[r]);
            results[r] = rep.run(warmup, share[r], cfg.batches);
        }
    };
    std::uint32_t nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, reps);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::uint32_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SimEstimate est;
    est.tau = q.tau;
    est.grid = grid;
    const std::size_t g = grid.size();
    std::vector<double> lo_count(g + 1, 0.0), lo_sum(g + 1, 0.0), hi_count(g + 1, 0.0), hi_sum(g + 1, 0.0);
    std::vector<double> load(static_cast<std::size_t>(q.servers), 0.0);
    Batch total;
    std::vector<double> idle_b, over_b, lost_b;
    for (const Accumulator& acc : results) {
        for (std::size_t i = 0; i <= g; ++i) {
            lo_count[i] += acc.lo_count[i];
            lo_sum[i] += acc.lo_sum[i];
            hi_count[i] += acc.hi_count[i];
            hi_sum[i] += acc.hi_sum[i];
        }
        for (std::size_t i = 0; i < load.size(); ++i) load[i] += acc.load_integral[i];
        for (const Batch& b : acc.batches) {
            total.time += b.time;
            total.idle += b.idle;
            total.over += b.over;
            total.arrivals += b.arrivals;
            total.lost += b.lost;
            idle_b.push_back(b.idle / b.time);
            over_b.push_back(b.over / b.time);
            lost_b.push_back(static_cast<double>(b.lost) / static_cast<double>(b.arrivals));
        }
        est.admitted += acc.admitted;
        est.max_admitted_wait = std::max(est.max_admitted_wait, acc.max_admitted_wait);
    }

    est.observed_time = total.time;
    est.arrivals = total.arrivals;
    est.atom0 = total.idle / total.time;
    est.loss = total.over / total.time;
    est.customer_loss = static_cast<double>(total.lost) / static_cast<double>(total.arrivals);
    est.atom0_se = batch_se(idle_b);
    est.loss_se = batch_se(over_b);
    est.customer_loss_se = batch_se(lost_b);
    for (double& v : load) v /= total.time;
    est.mean_load = std::move(load);

    // measure of (0, x] = sum_{lo < x} (x - lo) - sum_{hi < x} (x - hi)
    double nlo = 0.0, slo = 0.0, nhi = 0.0, shi = 0.0;
    std::vector<double> occupied(g);
    for (std::size_t i = 0; i < g; ++i) {
        nlo += lo_count[i];
        slo += lo_sum[i];
        nhi += hi_count[i];
        shi += hi_sum[i];
        const double x = grid[i];
        occupied[i] = (x * nlo - slo) - (x * nhi - shi);
    }
    const double middle = total.time - total.idle - total.over;
    est.ecdf.resize(g);
    double prev = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        double f = middle > 0.0 ? (grid[i] >= q.tau ? 1.0 : occupied[i] / middle) : 0.0;
        f = std::clamp(f, prev, 1.0);
        est.ecdf[i] = f;
        prev = f;
    }
    return est;
}

CompareReport compare(const VirtualWaitDistribution& analytic, const SimEstimate& emp, double tol_ks, double z_max) {
    if (std::abs(analytic.tau - emp.tau) > 1e-12 * std::max(1.0, analytic.tau)) fail_input("compare: tau differs");
    if (emp.grid.empty() || emp.grid.size() != emp.ecdf.size()) fail_input("compare: grid mismatch");
    for (const double x : emp.grid) {
        if (!(x >= 0.0 && x <= analytic.tau)) fail_input("compare: grid point outside [0, tau]");
    }

    CompareReport r;
    r.tol_ks = tol_ks;
    r.z_max = z_max;
    for (std::size_t i = 0; i < emp.grid.size(); ++i) {
        r.ks = std::max(r.ks, std::abs(emp.ecdf[i] - analytic.conditional_cdf(emp.grid[i])));
    }
    auto z = [](double est, double ref, double se) {
        const double diff = est - ref;
        if (se > 0.0) return diff / se;
        return diff == 0.0 ? 0.0 : std::copysign(HUGE_VAL, diff);
    };
    r.atom_analytic = analytic.atom0;
    r.atom_empirical = emp.atom0;
    r.loss_analytic = analytic.tail;
    r.loss_empirical = emp.loss;
    r.z_atom = z(emp.atom0, analytic.atom0, emp.atom0_se);
    r.z_loss = z(emp.loss, analytic.tail, emp.loss_se);
    const double n = static_cast<double>(emp.arrivals);
    auto binomial_se = [n](double p) { return n > 0.0 ? std::sqrt(std::max(p * (1.0 - p), 0.0) / n) : 0.0; };
    r.z_atom_binomial = z(emp.atom0, analytic.atom0, binomial_se(analytic.atom0));
    r.z_loss_binomial = z(emp.loss, analytic.tail, binomial_se(analytic.tail));
    r.pass = r.ks <= tol_ks;
    for (const double zz : {r.z_atom, r.z_loss, r.z_atom_binomial, r.z_loss_binomial}) r.pass = r.pass && std::abs(zz) <= z_max;
    return r;
}

void write_sim_csv(const SimEstimate& est, std::ostream& out) {
    char buf[128];
    auto row = [&](const char* name, double v, double se) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", name, v, se);
        out << buf;
    };
    out << "stat,estimate,stderr\n";
    row("atom0", est.atom0, est.atom0_se);
    row("loss", est.loss, est.loss_se);
    row("customer_loss", est.customer_loss, est.customer_loss_se);
    for (std::size_t i = 0; i < est.mean_load.size(); ++i) {
        const std::string name = "mean_load_" + std::to_string(i + 1);
        row(name.c_str(), est.mean_load[i], 0.0);
    }
    row("measured_arrivals", static_cast<double>(est.arrivals), 0.0);
    row("observed_time", est.observed_time, 0.0);
    out << "ecdf_v,ecdf_value\n";
    for (std::size_t i = 0; i < est.grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", est.grid[i], est.ecdf[i]);
        out << buf;
    }
}

}  // namespace phmcq
