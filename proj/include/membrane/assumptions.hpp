#pragma once

#include "membrane/pde.hpp"

#include <cstddef>

namespace membrane {

struct AssumptionReport {
    bool holds = false;
    double worst_violation = 0.0;  // max over cells of (lhs - rhs)+
    std::size_t violating_cells = 0;
    double margin = 0.0;           // min over cells of (rhs - lhs)
    double tolerance = 0.0;        // slack applied to every cellwise comparison
    std::size_t cells_checked = 0;
};

/// Checks v_f <= f cellwise, where v_f solves the Poisson problem with load f.
AssumptionReport check_a1(const ScalarField& f, const SolveOptions& opts = {});

/// Checks f <= -Lap_h f cellwise. Near the mask boundary f is extended by zero;
/// `exclude_boundary_ring` skips cells with an exterior neighbour instead.
AssumptionReport check_a2(const ScalarField& f, bool exclude_boundary_ring = false);

} // namespace membrane
