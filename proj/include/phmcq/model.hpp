#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "phmcq/rng.hpp"

namespace phmcq {

/// Phase-type distribution (gamma, T): absorption time of a transient Markov
/// chain with initial law gamma and sub-generator T. Immutable once built.
class PhaseType {
public:
    std::size_t phases() const noexcept { return static_cast<std::size_t>(gamma_.size()); }
    const Eigen::VectorXd& gamma() const noexcept { return gamma_; }
    const Eigen::MatrixXd& generator() const noexcept { return T_; }
    /// Exit-rate vector -T e.
    const Eigen::VectorXd& exit() const noexcept { return exit_; }

    /// Holding rate of phase j (-t_jj).
    double rate(std::size_t j) const { return -T_(j, j); }
    /// Probability of jumping j -> l at the end of a sojourn in j (zero for l == j).
    double jump_prob(std::size_t j, std::size_t l) const { return j == l ? 0.0 : T_(j, l) / rate(j); }
    /// Probability of absorbing at the end of a sojourn in j.
    double absorb_prob(std::size_t j) const { return exit_(j) / rate(j); }

private:
    friend PhaseType make_phase_type(Eigen::VectorXd gamma, Eigen::MatrixXd T);
    PhaseType() = default;

    Eigen::VectorXd gamma_;
    Eigen::MatrixXd T_;
    Eigen::VectorXd exit_;
};

/// Validates and builds a PhaseType. Throws Error(input) on dimension
/// mismatch, non-probability gamma, sign-pattern violation or singular T.
PhaseType make_phase_type(Eigen::VectorXd gamma, Eigen::MatrixXd T);

/// Coxian distribution: gamma = e_1, t_ii = -rates_i, t_{i,i+1} = rates_i * continue_probs_i.
PhaseType make_coxian(std::span<const double> rates, std::span<const double> continue_probs);

/// gamma (-T)^{-1} e
double ph_mean(const PhaseType& ph);

/// Precomputed jump tables for repeated sampling of a PhaseType.
class PhSampler {
public:
    explicit PhSampler(const PhaseType& ph);

    double operator()(Rng& rng) const;

private:
    std::size_t pick(const std::vector<double>& cumulative, double u) const;

    std::vector<double> start_cdf_;
    std::vector<double> rates_;
    // row j: cumulative probabilities over targets 0..m-1 followed by absorption
    std::vector<std::vector<double>> jump_cdf_;
    std::vector<bool> always_absorbs_;
};

/// One absorption time. For m = 1 this is exactly -log(u) / rate for the
/// stream's next uniform u.
double ph_sample(const PhaseType& ph, Rng& rng);

struct QueueModel {
    PhaseType ph;
    int servers = 1;   // c
    double mu = 1.0;   // service rate
    double tau = 1.0;  // impatience bound

    std::size_t phases() const noexcept { return ph.phases(); }
};

QueueModel make_queue_model(PhaseType ph, int servers, double mu, double tau);

/// Parses {"gamma": [...], "T": [[...]...], "c": int, "mu": x, "tau": x}.
/// Errors carry the line (for syntax errors) or the offending field.
QueueModel parse_model_json(std::string_view text);
QueueModel load_model_json(const std::string& path);

}  // namespace phmcq
