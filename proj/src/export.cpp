#include "phmcq/export.hpp"

#include <ostream>

#include <json.hpp>

namespace phmcq {

namespace {

using nlohmann::ordered_json;

ordered_json complex_json(Complex z) { return ordered_json::array({z.real(), z.imag()}); }

template <typename V>
ordered_json complex_list(const V& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(complex_json(v(i)));
    return a;
}

ordered_json diagnostics_json(const Diagnostics& d) {
    ordered_json o = ordered_json::object();
    for (const Check& c : d.checks()) {
        o[c.name] = {{"value", c.value}, {"threshold", c.threshold}, {"status", to_string(c.status)}, {"note", c.note}};
    }
    return o;
}

ordered_json model_json(const QueueModel& q) {
    const auto m = static_cast<Eigen::Index>(q.phases());
    ordered_json gamma = ordered_json::array(), T = ordered_json::array();
    for (Eigen::Index i = 0; i < m; ++i) {
        gamma.push_back(q.ph.gamma()(i));
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m; ++j) row.push_back(q.ph.generator()(i, j));
        T.push_back(row);
    }
    return {{"gamma", gamma}, {"T", T}, {"c", q.servers}, {"mu", q.mu}, {"tau", q.tau}};
}

void emit(const ordered_json& j, std::ostream& out) { out << j.dump(2) << '\n'; }

}  // namespace

void write_solution_json(const LoadSolution& sol, const Diagnostics& diagnostics, std::ostream& out) {
    ordered_json y = ordered_json::array();
    for (std::size_t k = 0; k < sol.Y.phases(); ++k) {
        ordered_json per_root = ordered_json::array();
        for (int i = 0; i <= sol.Y.servers(); ++i) per_root.push_back(complex_list(sol.y(i, k)));
        y.push_back(per_root);
    }
    ordered_json j;
    j["model"] = model_json(sol.model);
    j["eta"] = complex_list(sol.spectral.eta);
    j["kappa"] = complex_list(sol.spectral.kappa);
    j["delta"] = complex_list(sol.delta);
    j["delta_phi"] = complex_list(sol.delta_phi);
    j["phi"] = complex_list(sol.phi);
    j["y"] = y;
    j["status"] = to_string(diagnostics.overall());
    j["diagnostics"] = diagnostics_json(diagnostics);
    emit(j, out);
}

void write_summary_json(const LoadSolution& sol, std::ostream& out) {
    const WaitDecomposition d = wait_decomposition(sol);
    const BridgeReport bridge = coefficient_bridge(sol.model, sol, sol.spectral);
    ordered_json j;
    j["atom0"] = d.atom0;
    j["continuous"] = d.continuous;
    j["tail"] = d.tail;
    j["total"] = d.total();
    j["p"] = bridge.p;
    j["c"] = sol.model.servers;
    j["mu"] = sol.model.mu;
    j["tau"] = sol.model.tau;
    emit(j, out);
}

void write_compare_json(const CompareReport& r, const SimEstimate& emp, std::ostream& out) {
    ordered_json j;
    j["ks"] = r.ks;
    j["tol_ks"] = r.tol_ks;
    j["z_max"] = r.z_max;
    j["atom0"] = {{"analytic", r.atom_analytic}, {"empirical", r.atom_empirical}, {"stderr", emp.atom0_se}, {"z", r.z_atom}, {"z_binomial", r.z_atom_binomial}};
    j["loss"] = {{"analytic", r.loss_analytic}, {"empirical", r.loss_empirical}, {"stderr", emp.loss_se}, {"z", r.z_loss}, {"z_binomial", r.z_loss_binomial}};
    j["customer_loss"] = {{"estimate", emp.customer_loss}, {"stderr", emp.customer_loss_se}};
    j["measured_arrivals"] = emp.arrivals;
    j["pass"] = r.pass;
    emit(j, out);
}

void write_diagnostics_json(const Diagnostics& d, std::ostream& out) {
    ordered_json j;
    j["status"] = to_string(d.overall());
    j["diagnostics"] = diagnostics_json(d);
    emit(j, out);
}

}  // namespace phmcq
