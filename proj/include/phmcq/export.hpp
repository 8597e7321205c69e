#pragma once

#include <iosfwd>

#include "phmcq/diagnostics.hpp"
#include "phmcq/load_solver.hpp"
#include "phmcq/simulator.hpp"
#include "phmcq/waiting.hpp"

namespace phmcq {

/// {"eta": [[re, im]...], "kappa": [[re, im]...], "delta": [[re, im]...],
///  "delta_phi", "phi", "y": y[k][i][j] as [re, im], "diagnostics": {...}}.
/// Doubles use the shortest representation that round-trips.
void write_solution_json(const LoadSolution& sol, const Diagnostics& diagnostics, std::ostream& out);

/// Atom, continuous mass, tail and the normalising constant of the
/// matrix-exponential form.
void write_summary_json(const LoadSolution& sol, std::ostream& out);

void write_compare_json(const CompareReport& report, const SimEstimate& emp, std::ostream& out);

void write_diagnostics_json(const Diagnostics& diagnostics, std::ostream& out);

}  // namespace phmcq
