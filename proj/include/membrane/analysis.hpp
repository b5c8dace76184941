#pragma once

#include "membrane/optimize.hpp"

#include <string>
#include <vector>

namespace membrane {

struct SweepRecord {
    double parameter = 0.0;  // gamma or alpha
    double psi = 0.0;
    double c_low = 0.0;
    double c_high = 0.0;
    CellSet set;
    double gamma_effective = 0.0;
    ScalarField u;
    bool converged = false;
    std::size_t comonotone_violations = 0;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SweepReport {
    std::vector<SweepRecord> records;  // ascending in the parameter
    std::vector<CheckResult> checks;
    /// Relative error of the three-point derivative at interior points (gamma sweeps only).
    std::vector<double> derivative_errors;
    bool all_passed() const;
};

struct GammaSweepOptions {
    double derivative_tolerance = 0.10;
};

/// Solves the two-material problem at every gamma and checks threshold
/// monotonicity, set nesting, state ordering, energy decrease, and the
/// derivative identity Psi'(gamma) = -(alpha - beta) c^2.
SweepReport sweep_gamma(const ScalarField& f, double alpha, double beta, const std::vector<double>& gammas,
                        const OptimizeOptions& opts = {}, const GammaSweepOptions& sweep = {});

struct StabilitySpec {
    double alpha_target = 0.8;
    std::vector<double> gaps{0.2, 0.1, 0.05, 0.025};  // alpha_1 = alpha_target - gap
    std::size_t final_cap_cells = 2;
};

struct StabilityRecord {
    double gap = 0.0;
    double alpha = 0.0;
    double symmetric_difference = 0.0;
    std::size_t symmetric_difference_cells = 0;
    double psi_difference = 0.0;
};

struct AlphaSweepReport : SweepReport {
    std::vector<StabilityRecord> stability;
};

/// Solves the two-material problem at every alpha (ascending) and checks the
/// strict threshold decrease and state ordering; optionally runs the
/// symmetric-difference stability sequence, which requires beta > 0.
AlphaSweepReport sweep_alpha(const ScalarField& f, const std::vector<double>& alphas, double beta, double gamma,
                             const OptimizeOptions& opts = {}, const StabilitySpec* stability = nullptr);

struct RadialProfile {
    std::vector<double> radii;  // bin centres
    std::vector<double> means;
    std::vector<double> spreads;  // max - min within the bin
    std::vector<std::size_t> counts;
};

/// Bins the cells of a disk domain by centroid radius; empty bins are omitted.
RadialProfile radial_profile(const ScalarField& field, std::size_t bins);

/// h^2 * |E1 symmetric-difference E2|.
double symmetric_difference(const CellSet& a, const CellSet& b);
std::size_t symmetric_difference_count(const CellSet& a, const CellSet& b);

} // namespace membrane
