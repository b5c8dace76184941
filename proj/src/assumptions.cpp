#include "membrane/assumptions.hpp"

#include "membrane/errors.hpp"

#include <algorithm>
#include <limits>

namespace membrane {

namespace {

void require_load(const ScalarField& f) {
    if (f.min() < 0.0)
        throw PreconditionError("force f must be non-negative");
    if (!(f.max() > 0.0))
        throw PreconditionError("force f must not be identically zero");
}

// Accumulates lhs <= rhs + slack over the selected cells.
AssumptionReport compare(const ScalarField& lhs, const ScalarField& rhs, double slack, bool skip_boundary) {
    AssumptionReport r;
    r.tolerance = slack;
    r.margin = std::numeric_limits<double>::infinity();
    const Domain& d = lhs.domain();
    for (std::size_t c = 0; c < lhs.size(); ++c) {
        if (skip_boundary && d.exterior_neighbour_count(c) > 0)
            continue;
        ++r.cells_checked;
        const double gap = lhs[c] - rhs[c];
        r.margin = std::min(r.margin, -gap);
        if (gap > 0.0)
            r.worst_violation = std::max(r.worst_violation, gap);
        if (gap > slack)
            ++r.violating_cells;
    }
    r.holds = r.worst_violation <= slack;
    return r;
}

} // namespace

AssumptionReport check_a1(const ScalarField& f, const SolveOptions& opts) {
    require_load(f);
    const auto v = solve_poisson(f, opts);
    return compare(v.u, f, 1e-10 * f.max(), false);
}

AssumptionReport check_a2(const ScalarField& f, bool exclude_boundary_ring) {
    require_load(f);
    const auto lap = apply_state_operator(ScalarField::constant(f.domain_ptr(), 0.0), f);
    return compare(f, lap, 1e-10 * f.max(), exclude_boundary_ring);
}

} // namespace membrane
