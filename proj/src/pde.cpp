#include "membrane/pde.hpp"

#include "membrane/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <string>

namespace membrane {

namespace {

using Vec = std::vector<double>;

void check_inputs(const ScalarField& g, const ScalarField& f) {
    if (!g.same_domain(f))
        throw DomainMismatch();
    if (g.min() < 0.0)
        throw PreconditionError("density g must be non-negative");
    if (f.min() < 0.0)
        throw PreconditionError("force f must be non-negative");
    if (!(f.max() > 0.0))
        throw PreconditionError("force f must not be identically zero");
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

void apply(const Domain& d, std::span<const double> g, const Vec& u, Vec& out) {
    const double inv_h2 = 1.0 / d.cell_measure();
    for (std::size_t c = 0; c < d.size(); ++c) {
        double acc = 4.0 * u[c];
        for (auto nb : d.neighbours(c))
            if (nb != Domain::kExterior)
                acc -= u[static_cast<std::size_t>(nb)];
        out[c] = acc * inv_h2 + g[c] * u[c];
    }
}

double residual_norm(const Domain& d, std::span<const double> g, std::span<const double> f, const Vec& u) {
    Vec mu(u.size());
    apply(d, g, u, mu);
    double r2 = 0.0, f2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double r = f[i] - mu[i];
        r2 += r * r;
        f2 += f[i] * f[i];
    }
    return std::sqrt(r2 / f2);
}

Vec solve_dense(const Domain& d, std::span<const double> g, std::span<const double> f) {
    const auto n = static_cast<Eigen::Index>(d.size());
    const double inv_h2 = 1.0 / d.cell_measure();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t c = 0; c < d.size(); ++c) {
        const auto i = static_cast<Eigen::Index>(c);
        m(i, i) = 4.0 * inv_h2 + g[c];
        for (auto nb : d.neighbours(c))
            if (nb != Domain::kExterior)
                m(i, static_cast<Eigen::Index>(nb)) = -inv_h2;
    }
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i)
        rhs(i) = f[static_cast<std::size_t>(i)];
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw SolverError("dense Cholesky factorization failed", 1.0);
    const Eigen::VectorXd x = llt.solve(rhs);
    return Vec(x.data(), x.data() + n);
}

struct CgOutcome {
    Vec u;
    std::size_t iterations;
    double residual;
};

CgOutcome solve_cg(const Domain& d, std::span<const double> g, std::span<const double> f, const SolveOptions& opts) {
    const std::size_t n = d.size();
    const std::size_t max_iter = opts.max_iter ? opts.max_iter : 20 * n;
    const double inv_h2 = 1.0 / d.cell_measure();

    Vec inv_diag(n);
    for (std::size_t c = 0; c < n; ++c)
        inv_diag[c] = 1.0 / (4.0 * inv_h2 + g[c]);

    Vec u(n, 0.0);
    if (opts.initial_guess) {
        if (opts.initial_guess->size() != n)
            throw PreconditionError("initial guess length mismatch");
        const auto v = opts.initial_guess->values();
        u.assign(v.begin(), v.end());
    }

    Vec r(n), z(n), p(n), q(n);
    apply(d, g, u, q);
    double f2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = f[i] - q[i];
        f2 += f[i] * f[i];
    }
    const double target = opts.tol * opts.tol * f2;
    double r2 = dot(r, r);
    if (r2 <= target)
        return {std::move(u), 0, std::sqrt(r2 / f2)};

    for (std::size_t i = 0; i < n; ++i)
        z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);

    for (std::size_t it = 1; it <= max_iter; ++it) {
        apply(d, g, p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        r2 = dot(r, r);
        if (r2 <= target)
            return {std::move(u), it, std::sqrt(r2 / f2)};
        for (std::size_t i = 0; i < n; ++i)
            z[i] = inv_diag[i] * r[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }
    const double res = std::sqrt(r2 / f2);
    throw SolverError("conjugate gradients did not converge in " + std::to_string(max_iter) +
                          " iterations (relative residual " + std::to_string(res) + ")",
                      res);
}

} // namespace

ScalarField apply_state_operator(const ScalarField& g, const ScalarField& u) {
    if (!g.same_domain(u))
        throw DomainMismatch();
    Vec in(u.values().begin(), u.values().end());
    Vec out(in.size());
    apply(u.domain(), g.values(), in, out);
    return ScalarField(u.domain_ptr(), std::move(out));
}

SolveResult solve_state(const ScalarField& g, const ScalarField& f, const SolveOptions& opts) {
    check_inputs(g, f);
    if (!(opts.tol > 0.0 && opts.tol < 1.0))
        throw PreconditionError("solver tolerance must lie in (0, 1)");
    const Domain& d = f.domain();

    const bool dense = opts.method == SolverMethod::dense ||
                       (opts.method == SolverMethod::automatic && d.size() <= kDenseLimit);
    Vec u;
    std::size_t iterations = 1;
    double res = 0.0;
    if (dense) {
        u = solve_dense(d, g.values(), f.values());
        res = residual_norm(d, g.values(), f.values(), u);
    } else {
        auto out = solve_cg(d, g.values(), f.values(), opts);
        u = std::move(out.u);
        iterations = out.iterations;
        res = out.residual;
    }
    ScalarField field(f.domain_ptr(), std::move(u));
    const double phi = inner(f, field);
    return {std::move(field), iterations, res, phi};
}

SolveResult solve_poisson(const ScalarField& f, const SolveOptions& opts) {
    return solve_state(ScalarField::constant(f.domain_ptr(), 0.0), f, opts);
}

double energy(const ScalarField& g, const ScalarField& f, const SolveOptions& opts) {
    return solve_state(g, f, opts).energy;
}

double dirichlet_energy(const ScalarField& u) {
    const Domain& d = u.domain();
    double s = 0.0;
    for (std::size_t c = 0; c < d.size(); ++c) {
        const auto& nb = d.neighbours(c);
        // West and south faces are owned by this cell; east and north only when they are ghosts.
        for (int k = 0; k < 4; ++k) {
            const auto other = nb[static_cast<std::size_t>(k)];
            if (other == Domain::kExterior) {
                s += u[c] * u[c];
            } else if (k == 0 || k == 2) {
                const double diff = u[c] - u[static_cast<std::size_t>(other)];
                s += diff * diff;
            }
        }
    }
    return s;
}

double state_quadratic_form(const ScalarField& g, const ScalarField& v) {
    if (!g.same_domain(v))
        throw DomainMismatch();
    double mass = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c)
        mass += g[c] * v[c] * v[c];
    return dirichlet_energy(v) + mass * v.domain().cell_measure();
}

double energy_identity_residual(const ScalarField& g, const ScalarField& f, const ScalarField& u) {
    const double work = inner(f, u);
    return std::abs(work - state_quadratic_form(g, u)) / std::abs(work);
}

double gateaux_derivative_at_state(const ScalarField& g, const ScalarField& h, const ScalarField& u_g) {
    if (!g.same_domain(h) || !g.same_domain(u_g))
        throw DomainMismatch();
    double s = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c)
        s += (h[c] - g[c]) * u_g[c] * u_g[c];
    return -s * g.domain().cell_measure();
}

double gateaux_derivative(const ScalarField& g, const ScalarField& h, const ScalarField& f, const SolveOptions& opts) {
    if (h.min() < 0.0)
        throw PreconditionError("direction h must be non-negative");
    const auto state = solve_state(g, f, opts);
    return gateaux_derivative_at_state(g, h, state.u);
}

} // namespace membrane
