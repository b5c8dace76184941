#pragma once

#include "membrane/pde.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace membrane {

enum class Mode { minimize, maximize };

struct OptimizeOptions {
    Mode mode = Mode::minimize;
    double energy_tol = 1e-10;      // stop once the relative energy change drops below this
    std::size_t max_outer = 500;
    int line_search_halvings = 20;  // trial steps 1/2, 1/4, ..., 2^-halvings
    SolveOptions solver{};
    /// Start from a seeded random rearrangement instead of the one aligned with f.
    std::optional<std::uint64_t> seed;

    void validate() const;
};

struct OptimizationResult {
    ScalarField g_opt;
    ScalarField u_opt;
    double phi = 0.0;
    std::vector<double> phi_history;  // energy after each accepted step, starting point first
    std::size_t comonotone_violations = 0;
    bool converged = false;
    bool in_class = true;  // g_opt is an exact rearrangement of the generator
    std::size_t outer_iterations = 0;
    std::size_t solves = 0;
    std::string stop_reason;
    std::vector<std::string> warnings;
};

/// Minimizes the energy over the weak closure of the generator's class by
/// alignment steps with backtracking along segments.
OptimizationResult minimize(const ScalarField& f, const Generator& gen, OptimizeOptions opts = {});
/// Dual ascent over the class; the iterate always stays an exact rearrangement.
OptimizationResult maximize(const ScalarField& f, const Generator& gen, OptimizeOptions opts = {});
/// Dispatches on opts.mode.
OptimizationResult optimize(const ScalarField& f, const Generator& gen, const OptimizeOptions& opts);

struct ShapeResult {
    CellSet set;                         // cells holding alpha
    double threshold_low = 0.0;          // (k+1)-th largest u
    double threshold_high = 0.0;         // k-th largest u
    double c = 0.0;                      // midpoint of the bracket
    double psi = 0.0;
    double gamma_effective = 0.0;
    std::size_t k = 0;
    ScalarField u;
    ScalarField g;
    OptimizationResult run;
    std::size_t cut_violations = 0;      // (set, complement) pairs ordered against u
    double cut_inversion = 0.0;          // (max of u off the set - min on it)+ / max u
};

/// Cells needed to realize measure gamma: round(gamma / h^2).
std::size_t cells_for_measure(const Domain& d, double gamma);

Generator two_material_generator(DomainPtr d, double alpha, double beta, std::size_t k);

/// Best placement of k cells of alpha among beta, requiring 1 >= alpha > beta >= 0.
ShapeResult minimize_shape(const ScalarField& f, double alpha, double beta, double gamma, OptimizeOptions opts = {});
ShapeResult minimize_shape_cells(const ScalarField& f, double alpha, double beta, std::size_t k,
                                 OptimizeOptions opts = {});

struct BruteForceResult {
    CellSet set;
    double psi = 0.0;
    std::size_t evaluated = 0;
};

inline constexpr std::size_t kBruteForceLimit = 16;

/// Exhaustive search over all k-subsets with dense solves. First minimum in
/// lexicographic subset order wins.
BruteForceResult brute_force_min(const ScalarField& f, double alpha, double beta, std::size_t k);

struct MultistartReport {
    std::vector<OptimizationResult> runs;
    double max_relative_phi_spread = 0.0;
    double max_l1_distance = 0.0;
    bool all_converged = true;
};

/// Independent minimize runs from seeded random rearrangements (seeds base, base+1, ...).
MultistartReport multistart(const ScalarField& f, const Generator& gen, std::size_t runs, OptimizeOptions opts = {});

/// Number of cell pairs with u(i) > u(j) + tu and g(i) < g(j) - tg, where
/// tu = rel_tol * max|u| and tg = rel_tol * max|g|.
std::size_t comonotonicity_residual(const ScalarField& g, const ScalarField& u, double rel_tol = 1e-12);
/// Pairs ordered the same way by g and u; zero for a decreasing arrangement.
std::size_t anti_comonotonicity_residual(const ScalarField& g, const ScalarField& u, double rel_tol = 1e-12);

} // namespace membrane
