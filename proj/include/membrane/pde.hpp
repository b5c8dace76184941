#pragma once

#include "membrane/fields.hpp"

#include <cstddef>
#include <optional>

namespace membrane {

enum class SolverMethod {
    automatic,           // dense below kDenseLimit unknowns, conjugate gradients above
    conjugate_gradient,  // Jacobi-preconditioned CG
    dense,               // Cholesky factorization
};

inline constexpr std::size_t kDenseLimit = 400;

struct SolveOptions {
    double tol = 1e-10;       // relative residual ||f - Mu|| / ||f||
    std::size_t max_iter = 0; // 0 selects 20 * unknowns
    SolverMethod method = SolverMethod::automatic;
    const ScalarField* initial_guess = nullptr;  // CG warm start
};

struct SolveResult {
    ScalarField u;
    std::size_t iterations = 0;
    double residual_norm = 0.0;
    double energy = 0.0;  // integral of f*u
};

/// Applies the discrete operator -Lap_h + diag(g) with zero ghosts.
ScalarField apply_state_operator(const ScalarField& g, const ScalarField& u);

/// Solves (-Lap_h + diag(g)) u = f. Requires g >= 0 and f >= 0 not identically zero.
SolveResult solve_state(const ScalarField& g, const ScalarField& f, const SolveOptions& opts = {});
/// solve_state with g = 0.
SolveResult solve_poisson(const ScalarField& f, const SolveOptions& opts = {});

double energy(const ScalarField& g, const ScalarField& f, const SolveOptions& opts = {});

/// Discrete Dirichlet integral: squared differences over all cell faces, ghost faces included.
double dirichlet_energy(const ScalarField& u);
/// v^T (-Lap_h + diag(g)) v * h^2, evaluated face by face.
double state_quadratic_form(const ScalarField& g, const ScalarField& v);

/// |int f u - (int |grad u|^2 + int g u^2)| / |int f u|.
double energy_identity_residual(const ScalarField& g, const ScalarField& f, const ScalarField& u);

/// Directional derivative of the energy at g towards h: -int (h - g) u_g^2.
double gateaux_derivative(const ScalarField& g, const ScalarField& h, const ScalarField& f,
                          const SolveOptions& opts = {});
/// Same, with the state already known.
double gateaux_derivative_at_state(const ScalarField& g, const ScalarField& h, const ScalarField& u_g);

} // namespace membrane
