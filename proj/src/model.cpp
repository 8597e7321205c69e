#include "phmcq/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phmcq/error.hpp"
#include "phmcq/numerics.hpp"

namespace phmcq {

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kSignSlack = 1e-14;
constexpr double kMinRcond = 1e-13;

std::string fmt_index(std::size_t i) { return std::to_string(i); }

}  // namespace

PhaseType make_phase_type(Eigen::VectorXd gamma, Eigen::MatrixXd T) {
    const Eigen::Index m = gamma.size();
    if (m == 0) fail_input("phase-type: gamma is empty");
    if (T.rows() != m || T.cols() != m) {
        fail_input("phase-type: T is " + std::to_string(T.rows()) + "x" + std::to_string(T.cols()) +
                   " but gamma has length " + std::to_string(m));
    }
    if (!gamma.allFinite() || !T.allFinite()) fail_input("phase-type: non-finite entry");

    for (Eigen::Index j = 0; j < m; ++j) {
        if (gamma(j) < -kSignSlack) fail_input("phase-type: gamma[" + fmt_index(j) + "] is negative");
        gamma(j) = std::max(gamma(j), 0.0);
    }
    if (std::abs(gamma.sum() - 1.0) > kSumTol) fail_input("phase-type: gamma does not sum to 1");

    for (Eigen::Index j = 0; j < m; ++j) {
        if (!(T(j, j) < 0.0)) fail_input("phase-type: T[" + fmt_index(j) + "][" + fmt_index(j) + "] must be negative");
        for (Eigen::Index l = 0; l < m; ++l) {
            if (l == j) continue;
            if (T(j, l) < -kSignSlack) {
                fail_input("phase-type: off-diagonal T[" + fmt_index(j) + "][" + fmt_index(l) + "] is negative");
            }
            T(j, l) = std::max(T(j, l), 0.0);
        }
    }

    Eigen::VectorXd exit = -(T * Eigen::VectorXd::Ones(m));
    for (Eigen::Index j = 0; j < m; ++j) {
        if (exit(j) < -kSignSlack) fail_input("phase-type: row " + fmt_index(j) + " of T has positive sum");
        exit(j) = std::max(exit(j), 0.0);
    }

    if (numerics::reciprocal_condition(T) < kMinRcond) fail_input("phase-type: T is singular");

    PhaseType ph;
    ph.gamma_ = std::move(gamma);
    ph.T_ = std::move(T);
    ph.exit_ = std::move(exit);
    return ph;
}

PhaseType make_coxian(std::span<const double> rates, std::span<const double> continue_probs) {
    const std::size_t m = rates.size();
    if (m == 0) fail_input("coxian: no phases");
    if (continue_probs.size() != m - 1) fail_input("coxian: expected " + std::to_string(m - 1) + " continuation probabilities");
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        if (!(rates[i] > 0.0) || !std::isfinite(rates[i])) fail_input("coxian: rate " + fmt_index(i) + " must be positive");
        const auto ii = static_cast<Eigen::Index>(i);
        T(ii, ii) = -rates[i];
        if (i + 1 < m) {
            const double p = continue_probs[i];
            if (!(p >= 0.0 && p <= 1.0)) fail_input("coxian: continuation probability " + fmt_index(i) + " outside [0,1]");
            T(ii, ii + 1) = rates[i] * p;
        }
    }
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    gamma(0) = 1.0;
    return make_phase_type(std::move(gamma), std::move(T));
}

double ph_mean(const PhaseType& ph) {
    const Eigen::Index m = static_cast<Eigen::Index>(ph.phases());
    const Eigen::VectorXd x = numerics::solve(-ph.generator(), Eigen::VectorXd::Ones(m));
    return ph.gamma().dot(x);
}

PhSampler::PhSampler(const PhaseType& ph) {
    const std::size_t m = ph.phases();
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        acc += ph.gamma()(static_cast<Eigen::Index>(j));
        start_cdf_.push_back(acc);
    }
    for (std::size_t j = 0; j < m; ++j) {
        rates_.push_back(ph.rate(j));
        std::vector<double> row;
        double c = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            c += ph.jump_prob(j, l);
            row.push_back(c);
        }
        row.push_back(1.0);
        always_absorbs_.push_back(ph.absorb_prob(j) == 1.0);
        jump_cdf_.push_back(std::move(row));
    }
}

std::size_t PhSampler::pick(const std::vector<double>& cumulative, double u) const {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, cumulative.size() - 1);
}

double PhSampler::operator()(Rng& rng) const {
    const std::size_t m = rates_.size();
    std::size_t phase = m == 1 ? 0 : pick(start_cdf_, rng.uniform() * start_cdf_.back());
    double total = 0.0;
    for (;;) {
        total += -std::log(rng.uniform()) / rates_[phase];
        if (always_absorbs_[phase]) return total;
        const std::size_t next = pick(jump_cdf_[phase], rng.uniform());
        if (next >= m) return total;
        phase = next;
    }
}

double ph_sample(const PhaseType& ph, Rng& rng) { return PhSampler(ph)(rng); }

QueueModel make_queue_model(PhaseType ph, int servers, double mu, double tau) {
    if (servers < 1) fail_input("model: c must be a positive integer");
    if (!(mu > 0.0) || !std::isfinite(mu)) fail_input("model: mu must be positive and finite");
    if (!(tau > 0.0) || !std::isfinite(tau)) fail_input("model: tau must be positive and finite");
    return QueueModel{std::move(ph), servers, mu, tau};
}

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) fail_input(std::string("model: missing field '") + key + "'");
    return *it;
}

double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) fail_input("model: field '" + field + "' must be a number");
    return v.get<double>();
}

int line_of(std::string_view text, std::size_t byte) {
    const std::size_t end = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

}  // namespace

QueueModel parse_model_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        fail_input("model: JSON syntax error at line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    if (!doc.is_object()) fail_input("model: top level must be an object");

    const json& jg = require(doc, "gamma");
    if (!jg.is_array() || jg.empty()) fail_input("model: field 'gamma' must be a non-empty array");
    const auto m = static_cast<Eigen::Index>(jg.size());
    Eigen::VectorXd gamma(m);
    for (Eigen::Index j = 0; j < m; ++j) gamma(j) = as_number(jg[static_cast<std::size_t>(j)], "gamma[" + std::to_string(j) + "]");

    const json& jt = require(doc, "T");
    if (!jt.is_array() || static_cast<Eigen::Index>(jt.size()) != m) {
        fail_input("model: field 'T' must be an array of " + std::to_string(m) + " rows");
    }
    Eigen::MatrixXd T(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const json& row = jt[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
            fail_input("model: field 'T' row " + std::to_string(r) + " must have " + std::to_string(m) + " entries");
        }
        for (Eigen::Index col = 0; col < m; ++col) {
            T(r, col) = as_number(row[static_cast<std::size_t>(col)], "T[" + std::to_string(r) + "][" + std::to_string(col) + "]");
        }
    }

    const json& jc = require(doc, "c");
    if (!jc.is_number_integer()) fail_input("model: field 'c' must be an integer");
    const auto c = jc.get<long long>();
    if (c < 1 || c > 1'000'000) fail_input("model: field 'c' must be a positive integer");

    const double mu = as_number(require(doc, "mu"), "mu");
    const double tau = as_number(require(doc, "tau"), "tau");

    return make_queue_model(make_phase_type(std::move(gamma), std::move(T)), static_cast<int>(c), mu, tau);
}

QueueModel load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_input("model: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_json(buf.str());
}

}  // namespace phmcq
