#include "membrane/optimize.hpp"

#include "membrane/assumptions.hpp"
#include "membrane/errors.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace membrane {

namespace {

ScalarField squared(const ScalarField& u) {
    std::vector<double> v(u.values().begin(), u.values().end());
    for (double& x : v)
        x *= x;
    return ScalarField(u.domain_ptr(), std::move(v));
}

ScalarField segment_point(const ScalarField& from, const ScalarField& to, double t) {
    std::vector<double> v(from.size());
    for (std::size_t c = 0; c < v.size(); ++c)
        v[c] = std::max(0.0, from[c] + t * (to[c] - from[c]));
    return ScalarField(from.domain_ptr(), std::move(v));
}

bool identical(const ScalarField& a, const ScalarField& b) {
    return std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

ScalarField random_rearrangement(const Generator& gen, std::uint64_t seed) {
    std::vector<double> v(gen.sorted_values().begin(), gen.sorted_values().end());
    std::mt19937_64 rng(seed);
    std::shuffle(v.begin(), v.end(), rng);
    return ScalarField(gen.domain_ptr(), std::move(v));
}

// Tracks the energy evaluations of one run, warm-starting each solve from the latest state.
class Evaluator {
public:
    Evaluator(const ScalarField& f, SolveOptions opts) : f_(f), opts_(opts) {}

    SolveResult operator()(const ScalarField& g, const ScalarField* warm) {
        SolveOptions o = opts_;
        o.initial_guess = warm;
        ++solves_;
        return solve_state(g, f_, o);
    }

    std::size_t solves() const { return solves_; }

private:
    const ScalarField& f_;
    SolveOptions opts_;
    std::size_t solves_ = 0;
};

double relative_change(double before, double after) {
    return std::abs(before - after) / std::max(std::abs(before), 1e-300);
}

// Counts pairs (i, j) with key(i) > key(j) + tk and val(i) < val(j) - tv.
std::size_t discordant_pairs(std::span<const double> key, std::span<const double> val, double tk, double tv) {
    const std::size_t n = key.size();
    std::vector<double> levels(val.begin(), val.end());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<std::size_t> tree(levels.size() + 1, 0);  // Fenwick over value ranks
    auto add = [&](std::size_t rank) {
        for (std::size_t i = rank + 1; i < tree.size(); i += i & (~i + 1))
            ++tree[i];
    };
    auto prefix = [&](std::size_t count) {  // inserted entries with rank < count
        std::size_t s = 0;
        for (std::size_t i = count; i > 0; i -= i & (~i + 1))
            s += tree[i];
        return s;
    };
    auto rank_of = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), x) - levels.begin());
    };

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

    std::size_t pairs = 0;
    std::size_t inserted = 0;
    std::size_t lag = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t i = order[idx];
        while (lag < idx && key[order[lag]] < key[i] - tk) {
            add(rank_of(val[order[lag]]));
            ++inserted;
            ++lag;
        }
        // entries j already inserted with val(j) > val(i) + tv
        const auto above = static_cast<std::size_t>(
            std::upper_bound(levels.begin(), levels.end(), val[i] + tv) - levels.begin());
        pairs += inserted - prefix(above);
    }
    return pairs;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

// Column j of the inverse state operator: the response to a unit load in cell j.
ScalarField unit_response(const ScalarField& g, std::size_t j, const SolveOptions& so) {
    std::vector<double> e(g.size(), 0.0);
    e[j] = 1.0;
    return solve_state(g, ScalarField(g.domain_ptr(), std::move(e)), so).u;
}

SolveOptions tightened(SolveOptions so) {
    so.tol = std::min(so.tol, 1e-13);
    so.initial_guess = nullptr;
    return so;
}

// Convex QP  min q^T p + p^T H p / 2  subject to lo <= x + p <= hi and, for every
// group, sum of p over the group = 0. Primal active set; each group keeps at
// least one free variable so its mass constraint stays independent.
Eigen::VectorXd solve_box_qp(const Eigen::MatrixXd& hess, const Eigen::VectorXd& q, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const std::vector<int>& group, int groups) {
    const Eigen::Index m = x.size();
    const double eps = 1e-14 * std::max(1.0, hi.cwiseAbs().maxCoeff());
    Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
    // fixed[i]: 0 free, -1 at lower bound, +1 at upper bound
    std::vector<int> fixed(static_cast<std::size_t>(m), 0);
    std::vector<int> free_count(static_cast<std::size_t>(groups), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto gi = static_cast<std::size_t>(group[static_cast<std::size_t>(i)]);
        auto& fi = fixed[static_cast<std::size_t>(i)];
        if (x(i) <= lo(i) + eps)
            fi = -1;
        else if (x(i) >= hi(i) - eps)
            fi = 1;
        if (fi == 0)
            ++free_count[gi];
    }
    for (int grp = 0; grp < groups; ++grp) {
        if (free_count[static_cast<std::size_t>(grp)] > 0)
            continue;
        // free the member closest to the interior of its box
        Eigen::Index pick = -1;
        for (Eigen::Index i = 0; i < m; ++i)
            if (group[static_cast<std::size_t>(i)] == grp && (pick < 0 || fixed[static_cast<std::size_t>(i)] == 1))
                pick = i;
        fixed[static_cast<std::size_t>(pick)] = 0;
        free_count[static_cast<std::size_t>(grp)] = 1;
    }

    for (int iter = 0; iter < 200; ++iter) {
        std::vector<Eigen::Index> fr;
        for (Eigen::Index i = 0; i < m; ++i)
            if (fixed[static_cast<std::size_t>(i)] == 0)
                fr.push_back(i);
        const auto nf = static_cast<Eigen::Index>(fr.size());
        const Eigen::Index dim = nf + groups;
        const Eigen::VectorXd grad = q + hess * p;
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
        for (Eigen::Index a = 0; a < nf; ++a) {
            for (Eigen::Index b = 0; b < nf; ++b)
                kkt(a, b) = hess(fr[static_cast<std::size_t>(a)], fr[static_cast<std::size_t>(b)]);
            const Eigen::Index row = nf + group[static_cast<std::size_t>(fr[static_cast<std::size_t>(a)])];
            kkt(a, row) = -1.0;
            kkt(row, a) = -1.0;
            rhs(a) = -grad(fr[static_cast<std::size_t>(a)]);
        }
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
        for (Eigen::Index a = 0; a < nf; ++a)
            d(fr[static_cast<std::size_t>(a)]) = sol(a);
        const Eigen::VectorXd lambda = -sol.tail(groups);  // grad_free + H d = lambda

        if (d.cwiseAbs().maxCoeff() <= eps) {
            // stationary on the working set: check bound multipliers
            Eigen::Index worst = -1;
            double worst_val = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const int fi = fixed[static_cast<std::size_t>(i)];
                if (fi == 0)
                    continue;
                const double mu = grad(i) - lambda(group[static_cast<std::size_t>(i)]);
                const double violation = fi == -1 ? -mu : mu;  // want mu >= 0 at lower, <= 0 at upper
                if (violation > worst_val) {
                    worst_val = violation;
                    worst = i;
                }
            }
            if (worst < 0 || worst_val <= 1e-15 * std::max(1.0, grad.cwiseAbs().maxCoeff()))
                return p;
            fixed[static_cast<std::size_t>(worst)] = 0;
            ++free_count[static_cast<std::size_t>(group[static_cast<std::size_t>(worst)])];
            continue;
        }

        double step = 1.0;
        Eigen::Index block = -1;
        for (Eigen::Index a = 0; a < nf; ++a) {
            const Eigen::Index i = fr[static_cast<std::size_t>(a)];
            const double xi = x(i) + p(i);
            if (d(i) < 0.0 && xi + step * d(i) < lo(i)) {
                step = (lo(i) - xi) / d(i);
                block = i;
            } else if (d(i) > 0.0 && xi + step * d(i) > hi(i)) {
                step = (hi(i) - xi) / d(i);
                block = i;
            }
        }
        p += std::max(0.0, step) * d;
        if (block >= 0) {
            const auto gi = static_cast<std::size_t>(group[static_cast<std::size_t>(block)]);
            if (free_count[gi] > 1) {
                fixed[static_cast<std::size_t>(block)] = d(block) < 0.0 ? -1 : 1;
                --free_count[gi];
                p(block) = (d(block) < 0.0 ? lo(block) : hi(block)) - x(block);
            }
        }
    }
    return p;
}

// Newton iteration that equalizes the state over the free cells of each group
// (cells strictly inside their bounds) while conserving the group's mass. This
// resolves the optimality system far below the energy's floating-point
// resolution, which the descent phase cannot see.
void equalize_free(const ScalarField& f, ScalarField& g, SolveResult& st, const std::vector<std::vector<std::size_t>>& groups,
                   const std::vector<std::pair<double, double>>& bounds, const SolveOptions& so) {
    const auto m = [&] {
        std::size_t total = 0;
        for (const auto& grp : groups)
            total += grp.size();
        return static_cast<Eigen::Index>(total);
    }();
    if (m == 0)
        return;
    std::vector<std::size_t> unknowns;
    std::vector<double> target;
    for (const auto& grp : groups) {
        unknowns.insert(unknowns.end(), grp.begin(), grp.end());
        double mass = 0.0;
        for (std::size_t c : grp)
            mass += g[c];
        target.push_back(mass);
    }
    for (int it = 0; it < 20; ++it) {
        Eigen::VectorXd res(m);
        Eigen::Index row = 0;
        double worst = 0.0;
        for (std::size_t a = 0; a < groups.size(); ++a) {
            const auto& grp = groups[a];
            double mass = 0.0;
            for (std::size_t c : grp)
                mass += g[c];
            for (std::size_t t = 1; t < grp.size(); ++t) {
                res(row) = st.u[grp[t]] - st.u[grp.front()];
                worst = std::max(worst, std::abs(res(row)) / std::abs(st.u[grp.front()]));
                ++row;
            }
            res(row++) = mass - target[a];
        }
        if (worst <= 1e-15)
            return;

        std::vector<ScalarField> cols;
        cols.reserve(unknowns.size());
        for (std::size_t j : unknowns)
            cols.push_back(unit_response(g, j, so));
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
        row = 0;
        Eigen::Index col0 = 0;
        for (const auto& grp : groups) {
            for (std::size_t t = 1; t < grp.size(); ++t) {
                for (Eigen::Index k = 0; k < m; ++k) {
                    const auto& col = cols[static_cast<std::size_t>(k)];
                    jac(row, k) = -(col[grp[t]] - col[grp.front()]) * st.u[unknowns[static_cast<std::size_t>(k)]];
                }
                ++row;
            }
            for (std::size_t t = 0; t < grp.size(); ++t)
                jac(row, col0 + static_cast<Eigen::Index>(t)) = 1.0;
            ++row;
            col0 += static_cast<Eigen::Index>(grp.size());
        }
        const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-res);
        auto trial = g;
        auto& vals = trial.mutable_values();
        Eigen::Index k = 0;
        for (std::size_t a = 0; a < groups.size(); ++a)
            for (std::size_t c : groups[a])
                vals[c] = std::clamp(vals[c] + step(k++), bounds[a].first, bounds[a].second);
        g = std::move(trial);
        st = solve_state(g, f, so);
    }
}

// Refines a relaxed iterate to the exact minimizer over the weak closure by
// sequential quadratic programming on windows of cells around each level
// boundary of the generator (in state order). The result is accepted only if
// it is comonotone with its own state, which certifies global optimality.
std::optional<std::pair<ScalarField, SolveResult>> polish_relaxed(const ScalarField& f, const Generator& gen,
                                                                  const ScalarField& start, const SolveOptions& base) {
    const SolveOptions so = tightened(base);
    const auto v = gen.sorted_values();
    const std::size_t n = v.size();
    const double h2 = f.domain().cell_measure();
    const SolveResult start_state = solve_state(start, f, so);

    // window half-width in cells around each level boundary, doubled on failure;
    // each width restarts from the given iterate and may recentre a few times
    for (std::size_t window = 8; window <= 64; window *= 2) {
      ScalarField g = start;
      SolveResult st = start_state;
      for (int recentre = 0; recentre < 3; ++recentre) {
        auto asc = ascending_order(st.u.values());
        std::vector<std::size_t> by_rank(asc.rbegin(), asc.rend());  // descending state

        // windows of ranks around every level boundary, merged when they touch
        std::vector<std::pair<std::size_t, std::size_t>> windows;  // [first, last)
        for (std::size_t b = 1; b < n; ++b) {
            if (v[b - 1] == v[b])
                continue;
            const std::size_t first = b > window ? b - window : 0;
            const std::size_t last = std::min(n, b + window);
            if (!windows.empty() && first <= windows.back().second)
                windows.back().second = last;
            else
                windows.emplace_back(first, last);
        }
        std::vector<double> vals(n);
        for (std::size_t r = 0; r < n; ++r)
            vals[by_rank[r]] = v[r];
        std::vector<std::size_t> cells;
        std::vector<int> group;
        std::vector<double> lo, hi;
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const auto [first, last] = windows[w];
            double mass = 0.0, start_mass = 0.0;
            for (std::size_t r = first; r < last; ++r) {
                mass += v[r];
                start_mass += g[by_rank[r]];
            }
            // keep the current iterate on the window when it carries the right mass
            const bool keep = std::abs(start_mass - mass) <= 1e-12 * std::max(1.0, mass);
            for (std::size_t r = first; r < last; ++r) {
                const std::size_t c = by_rank[r];
                cells.push_back(c);
                group.push_back(static_cast<int>(w));
                lo.push_back(v[last - 1]);
                hi.push_back(v[first]);
                if (keep)
                    vals[c] = std::clamp(g[c], v[last - 1], v[first]);
            }
        }
        g = ScalarField(g.domain_ptr(), std::move(vals));
        const auto m = static_cast<Eigen::Index>(cells.size());
        const Eigen::VectorXd lo_v = Eigen::Map<const Eigen::VectorXd>(lo.data(), m);
        const Eigen::VectorXd hi_v = Eigen::Map<const Eigen::VectorXd>(hi.data(), m);

        st = solve_state(g, f, so);
        for (int it = 0; it < 40; ++it) {
            Eigen::VectorXd x(m), q(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                const std::size_t c = cells[static_cast<std::size_t>(i)];
                x(i) = g[c];
                q(i) = -h2 * st.u[c] * st.u[c];
            }
            Eigen::MatrixXd hess(m, m);
            for (Eigen::Index j = 0; j < m; ++j) {
                const std::size_t cj = cells[static_cast<std::size_t>(j)];
                const ScalarField col = unit_response(g, cj, so);
                for (Eigen::Index i = 0; i < m; ++i) {
                    const std::size_t ci = cells[static_cast<std::size_t>(i)];
                    hess(i, j) = 2.0 * h2 * st.u[ci] * st.u[cj] * col[ci];
                }
            }
            hess = 0.5 * (hess + hess.transpose()).eval();
            const Eigen::VectorXd p = solve_box_qp(hess, q, x, lo_v, hi_v, group, static_cast<int>(windows.size()));
            const double predicted = q.dot(p) + 0.5 * p.dot(hess * p);
            if (!(predicted < -1e-17 * std::abs(st.energy)))
                break;
            double t = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
                std::vector<double> trial(g.values().begin(), g.values().end());
                for (Eigen::Index i = 0; i < m; ++i) {
                    const auto c = cells[static_cast<std::size_t>(i)];
                    trial[c] = std::clamp(x(i) + t * p(i), lo_v(i), hi_v(i));
                }
                ScalarField cand(g.domain_ptr(), std::move(trial));
                SolveResult cs = solve_state(cand, f, so);
                if (cs.energy <= st.energy + 1e-4 * t * q.dot(p)) {
                    g = std::move(cand);
                    st = std::move(cs);
                    moved = true;
                    break;
                }
            }
            if (!moved)
                break;
        }
        {
            std::vector<std::vector<std::size_t>> free_cells(windows.size());
            std::vector<std::pair<double, double>> bounds(windows.size());
            for (Eigen::Index i = 0; i < m; ++i) {
                const auto w = static_cast<std::size_t>(group[static_cast<std::size_t>(i)]);
                const std::size_t c = cells[static_cast<std::size_t>(i)];
                const double eps = 1e-10 * (hi_v(i) - lo_v(i));
                bounds[w] = {lo_v(i), hi_v(i)};
                if (g[c] > lo_v(i) + eps && g[c] < hi_v(i) - eps)
                    free_cells[w].push_back(c);
            }
            std::erase_if(free_cells, [](const auto& grp) { return grp.size() < 2; });
            std::vector<std::pair<double, double>> kept;
            for (const auto& grp : free_cells) {
                const std::size_t c = grp.front();
                for (Eigen::Index i = 0; i < m; ++i)
                    if (cells[static_cast<std::size_t>(i)] == c)
                        kept.emplace_back(lo_v(i), hi_v(i));
            }
            equalize_free(f, g, st, free_cells, kept, so);
        }
        if (comonotonicity_residual(g, st.u) == 0)
            return std::make_pair(std::move(g), std::move(st));
      }
    }
    return std::nullopt;
}

void check_common(const ScalarField& f, const Generator& gen, const OptimizeOptions& opts) {
    opts.validate();
    if (f.domain_ptr() != gen.domain_ptr())
        throw DomainMismatch();
    if (f.min() < 0.0 || !(f.max() > 0.0))
        throw PreconditionError("force f must be non-negative and not identically zero");
}

} // namespace

void OptimizeOptions::validate() const {
    if (!(energy_tol > 0.0))
        throw PreconditionError("energy_tol must be positive");
    if (max_outer < 1)
        throw PreconditionError("max_outer must be at least 1");
    if (line_search_halvings < 0)
        throw PreconditionError("line_search_halvings must be non-negative");
    if (!(solver.tol > 0.0 && solver.tol < 1.0))
        throw PreconditionError("solver tolerance must lie in (0, 1)");
}

OptimizationResult minimize(const ScalarField& f, const Generator& gen, OptimizeOptions opts) {
    opts.mode = Mode::minimize;
    check_common(f, gen, opts);
    Evaluator eval(f, opts.solver);

    ScalarField g = opts.seed ? random_rearrangement(gen, *opts.seed) : align_increasing(gen, f);
    SolveResult state = eval(g, nullptr);
    OptimizationResult out{g, state.u, state.energy, {state.energy}, 0, false, true, 0, 0, {}, {}};
    if (!check_a1(f, opts.solver).holds)
        out.warnings.push_back("load violates A1 (v_f <= f); uniqueness and the optimality characterization may fail");
    bool in_class = true;
    // cheapest exact rearrangement seen so far, used for the terminal snap
    ScalarField best_vertex = g;
    ScalarField best_vertex_u = state.u;
    double best_vertex_phi = state.energy;

    for (std::size_t k = 0; k < opts.max_outer; ++k) {
        out.outer_iterations = k + 1;
        const ScalarField target = align_increasing(gen, squared(state.u));
        if (in_class && identical(target, g)) {
            out.converged = true;
            out.stop_reason = "alignment fixed point";
            break;
        }
        SolveResult cand = eval(target, &state.u);
        if (cand.energy < best_vertex_phi) {
            best_vertex = target;
            best_vertex_u = cand.u;
            best_vertex_phi = cand.energy;
        }

        bool accepted = false;
        if (cand.energy < state.energy) {
            g = target;
            accepted = true;
            in_class = true;
        } else {
            double t = 1.0;
            for (int s = 0; s < opts.line_search_halvings; ++s) {
                t *= 0.5;
                ScalarField trial = segment_point(g, target, t);
                SolveResult ts = eval(trial, &state.u);
                if (ts.energy < state.energy) {
                    g = std::move(trial);
                    cand = std::move(ts);
                    accepted = true;
                    in_class = false;
                    break;
                }
            }
        }
        if (!accepted) {
            out.converged = true;
            out.stop_reason = "line search exhausted";
            break;
        }
        const double change = relative_change(state.energy, cand.energy);
        state = std::move(cand);
        out.phi_history.push_back(state.energy);
        // Exact alignment steps strictly decrease the energy over a finite set,
        // so they run until the fixed point; only relaxed steps use the tolerance.
        if (!in_class && change < opts.energy_tol) {
            out.converged = true;
            out.stop_reason = "relative energy change below tolerance";
            break;
        }
    }
    if (!out.converged)
        out.stop_reason = "iteration cap reached";

    if (!in_class) {
        if (auto pol = polish_relaxed(f, gen, g, opts.solver)) {
            out.solves += 1;
            if (pol->second.energy <= state.energy * (1.0 + opts.energy_tol) && in_weak_closure(pol->first, gen)) {
                const bool lower = pol->second.energy < state.energy;
                g = std::move(pol->first);
                state = std::move(pol->second);
                in_class = is_rearrangement(g, gen.as_field());
                if (lower)
                    out.phi_history.push_back(state.energy);
            }
        } else {
            out.warnings.push_back("optimality polish did not settle the tie groups");
        }
    }

    if (!in_class) {
        // Snap back to the class when doing so does not raise the energy beyond tolerance.
        const ScalarField snap = align_increasing(gen, squared(state.u));
        SolveResult ss = eval(snap, &state.u);
        ScalarField chosen = snap;
        if (best_vertex_phi < ss.energy) {
            chosen = best_vertex;
            ss = SolveResult{best_vertex_u, 0, 0.0, best_vertex_phi};
        }
        if (ss.energy <= state.energy * (1.0 + opts.energy_tol)) {
            g = std::move(chosen);
            state = std::move(ss);
            in_class = true;
        } else {
            out.warnings.push_back("terminal snap to the class rejected: it would raise the energy");
        }
    }

    out.g_opt = g;
    out.u_opt = state.u;
    out.phi = state.energy;
    out.in_class = in_class;
    out.solves += eval.solves();
    out.comonotone_violations = comonotonicity_residual(out.g_opt, out.u_opt);
    return out;
}

OptimizationResult maximize(const ScalarField& f, const Generator& gen, OptimizeOptions opts) {
    opts.mode = Mode::maximize;
    check_common(f, gen, opts);
    Evaluator eval(f, opts.solver);

    ScalarField g = opts.seed ? random_rearrangement(gen, *opts.seed) : align_decreasing(gen, f);
    SolveResult state = eval(g, nullptr);
    OptimizationResult out{g, state.u, state.energy, {state.energy}, 0, false, true, 0, 0, {}, {}};
    out.warnings.push_back("maximizers need not be unique");

    // The energy is convex, so along any segment it never exceeds the larger
    // endpoint: a rejected full step cannot be rescued by a shorter one.
    for (std::size_t k = 0; k < opts.max_outer; ++k) {
        out.outer_iterations = k + 1;
        const ScalarField target = align_decreasing(gen, squared(state.u));
        if (identical(target, g)) {
            out.converged = true;
            out.stop_reason = "alignment fixed point";
            break;
        }
        SolveResult cand = eval(target, &state.u);
        if (!(cand.energy > state.energy)) {
            out.converged = true;
            out.stop_reason = "no ascent along the aligned direction";
            break;
        }
        const double change = relative_change(state.energy, cand.energy);
        g = target;
        state = std::move(cand);
        out.phi_history.push_back(state.energy);
        if (change < opts.energy_tol) {
            out.converged = true;
            out.stop_reason = "relative energy change below tolerance";
            break;
        }
    }
    if (!out.converged)
        out.stop_reason = "iteration cap reached";

    out.g_opt = g;
    out.u_opt = state.u;
    out.phi = state.energy;
    out.solves = eval.solves();
    out.comonotone_violations = anti_comonotonicity_residual(out.g_opt, out.u_opt);
    return out;
}

OptimizationResult optimize(const ScalarField& f, const Generator& gen, const OptimizeOptions& opts) {
    return opts.mode == Mode::minimize ? minimize(f, gen, opts) : maximize(f, gen, opts);
}

std::size_t cells_for_measure(const Domain& d, double gamma) {
    return static_cast<std::size_t>(std::llround(gamma / d.cell_measure()));
}

Generator two_material_generator(DomainPtr d, double alpha, double beta, std::size_t k) {
    const std::size_t n = d->size();
    std::vector<double> v(n, beta);
    std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(k, n)), alpha);
    return Generator(std::move(d), std::move(v));
}

namespace {

void check_materials(double alpha, double beta) {
    if (!(alpha <= 1.0 && alpha > beta && beta >= 0.0))
        throw PreconditionError("two-material problem requires 1 >= alpha > beta >= 0");
}

void check_cell_count(const Domain& d, std::size_t k) {
    if (k == 0 || k >= d.size())
        throw PreconditionError("set size must satisfy 0 < k < number of cells");
}

// Pairwise exchange refinement of a two-material set. On a grid the state
// responds to the density in the cell itself, so the superlevel set of the
// relaxed state can miss the discrete optimum by a few exchanges at the cut.
// The energy change of swapping i (in the set) with j (outside) follows from
// a rank-two update: dPhi = -h^2 s^T (C^-1 + G_SS)^-1 s with s = (u_i, u_j),
// C = diag(-d, d), d = alpha - beta, G the inverse state operator.
SolveResult refine_by_exchange(const ScalarField& f, double alpha, double beta, ScalarField& g, const SolveOptions& base,
                               std::size_t& solves) {
    constexpr std::size_t kSide = 12;      // candidates per side on larger grids
    constexpr std::size_t kAllBelow = 16;  // examine every pair up to this size
    const SolveOptions so = tightened(base);
    const std::size_t n = g.size();
    const double h2 = f.domain().cell_measure();
    const double d = alpha - beta;
    const double mid = 0.5 * (alpha + beta);
    SolveResult st = solve_state(g, f, so);
    ++solves;
    for (std::size_t pass = 0; pass < n; ++pass) {
        const auto asc = ascending_order(st.u.values());
        std::vector<std::size_t> inside, outside;  // weakest set cells, strongest others
        for (std::size_t c : asc)
            if (g[c] > mid && (n <= kAllBelow || inside.size() < kSide))
                inside.push_back(c);
        for (auto it = asc.rbegin(); it != asc.rend(); ++it)
            if (g[*it] < mid && (n <= kAllBelow || outside.size() < kSide))
                outside.push_back(*it);
        std::vector<std::size_t> cand(inside);
        cand.insert(cand.end(), outside.begin(), outside.end());
        std::vector<ScalarField> cols;
        cols.reserve(cand.size());
        for (std::size_t c : cand)
            cols.push_back(unit_response(g, c, so));
        solves += cand.size();

        double best = -1e-14 * std::abs(st.energy);
        std::size_t bi = 0, bj = 0;
        bool found = false;
        for (std::size_t a = 0; a < inside.size(); ++a) {
            const std::size_t i = inside[a];
            for (std::size_t b = 0; b < outside.size(); ++b) {
                const std::size_t j = outside[b];
                const auto& ci = cols[a];
                const auto& cj = cols[inside.size() + b];
                Eigen::Matrix2d m;
                m << -1.0 / d + ci[i], cj[i], ci[j], 1.0 / d + cj[j];
                const Eigen::Vector2d sv(st.u[i], st.u[j]);
                const double change = -h2 * sv.dot(m.fullPivLu().solve(sv));
                if (change < best) {
                    best = change;
                    bi = i;
                    bj = j;
                    found = true;
                }
            }
        }
        if (!found)
            return st;
        auto trial = g;
        trial.mutable_values()[bi] = beta;
        trial.mutable_values()[bj] = alpha;
        SolveResult ts = solve_state(trial, f, so);
        ++solves;
        if (!(ts.energy < st.energy))
            return st;
        g = std::move(trial);
        st = std::move(ts);
    }
    return st;
}

} // namespace

ShapeResult minimize_shape_cells(const ScalarField& f, double alpha, double beta, std::size_t k, OptimizeOptions opts) {
    check_materials(alpha, beta);
    check_cell_count(f.domain(), k);
    const Generator gen = two_material_generator(f.domain_ptr(), alpha, beta, k);
    auto run = minimize(f, gen, opts);

    // A set is required: start from the superlevel set of the final state.
    ScalarField g = run.in_class ? run.g_opt : align_increasing(gen, squared(run.u_opt));
    const ScalarField before = g;
    const SolveResult st = refine_by_exchange(f, alpha, beta, g, opts.solver, run.solves);
    if (!run.in_class)
        run.warnings.push_back("shape extracted from a relaxed iterate");
    if (!identical(before, g))
        run.warnings.push_back("set refined by pairwise exchanges at the cut");

    ShapeResult r{{f.domain_ptr(), {}}, 0.0, 0.0, 0.0, st.energy, 0.0, k, st.u, g, std::move(run), 0};
    const double mid = 0.5 * (alpha + beta);
    for (std::size_t c = 0; c < g.size(); ++c)
        if (g[c] > mid)
            r.set.cells.push_back(c);
    const auto asc = ascending_order(st.u.values());
    const std::size_t n = asc.size();
    r.threshold_high = st.u[asc[n - k]];
    r.threshold_low = st.u[asc[n - k - 1]];
    r.c = 0.5 * (r.threshold_low + r.threshold_high);
    r.cut_violations = comonotonicity_residual(g, st.u);
    double inside_min = INFINITY, outside_max = -INFINITY;
    for (std::size_t c = 0; c < g.size(); ++c)
        (g[c] > mid ? inside_min : outside_max) = g[c] > mid ? std::min(inside_min, st.u[c]) : std::max(outside_max, st.u[c]);
    r.cut_inversion = std::max(0.0, outside_max - inside_min) / st.u.max();
    r.gamma_effective = static_cast<double>(k) * f.domain().cell_measure();
    return r;
}

ShapeResult minimize_shape(const ScalarField& f, double alpha, double beta, double gamma, OptimizeOptions opts) {
    check_materials(alpha, beta);
    if (!(gamma > 0.0 && gamma < f.domain().measure()))
        throw PreconditionError("gamma must satisfy 0 < gamma < |D|");
    return minimize_shape_cells(f, alpha, beta, cells_for_measure(f.domain(), gamma), opts);
}

BruteForceResult brute_force_min(const ScalarField& f, double alpha, double beta, std::size_t k) {
    check_materials(alpha, beta);
    const std::size_t n = f.domain().size();
    if (n > kBruteForceLimit)
        throw PreconditionError("brute force is limited to " + std::to_string(kBruteForceLimit) + " cells");
    if (k == 0 || k > n)
        throw PreconditionError("set size must satisfy 0 < k <= number of cells");

    SolveOptions dense;
    dense.method = SolverMethod::dense;
    BruteForceResult best;
    best.set.domain = f.domain_ptr();
    best.psi = INFINITY;
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    while (true) {
        std::vector<double> v(n, beta);
        for (auto c : pick)
            v[c] = alpha;
        const double psi = solve_state(ScalarField(f.domain_ptr(), std::move(v)), f, dense).energy;
        ++best.evaluated;
        if (psi < best.psi) {
            best.psi = psi;
            best.set.cells = pick;
        }
        // next combination in lexicographic order
        std::size_t i = k;
        while (i > 0 && pick[i - 1] == n - k + i - 1)
            --i;
        if (i == 0)
            break;
        ++pick[i - 1];
        for (std::size_t j = i; j < k; ++j)
            pick[j] = pick[j - 1] + 1;
    }
    return best;
}

MultistartReport multistart(const ScalarField& f, const Generator& gen, std::size_t runs, OptimizeOptions opts) {
    if (runs < 2)
        throw PreconditionError("multistart needs at least two runs");
    const std::uint64_t base = opts.seed.value_or(0);
    std::vector<std::optional<OptimizationResult>> slots(runs);
    detail::parallel_for(runs, [&](std::size_t i) {
        OptimizeOptions o = opts;
        o.seed = base + i;
        slots[i] = minimize(f, gen, o);
    });

    MultistartReport rep;
    for (auto& s : slots)
        rep.runs.push_back(std::move(*s));
    const double h2 = f.domain().cell_measure();
    for (std::size_t i = 0; i < runs; ++i) {
        rep.all_converged = rep.all_converged && rep.runs[i].converged;
        for (std::size_t j = i + 1; j < runs; ++j) {
            const auto& a = rep.runs[i];
            const auto& b = rep.runs[j];
            rep.max_relative_phi_spread =
                std::max(rep.max_relative_phi_spread, std::abs(a.phi - b.phi) / std::abs(a.phi));
            double l1 = 0.0;
            for (std::size_t c = 0; c < a.g_opt.size(); ++c)
                l1 += std::abs(a.g_opt[c] - b.g_opt[c]);
            rep.max_l1_distance = std::max(rep.max_l1_distance, l1 * h2);
        }
    }
    return rep;
}

std::size_t comonotonicity_residual(const ScalarField& g, const ScalarField& u, double rel_tol) {
    if (!g.same_domain(u))
        throw DomainMismatch();
    return discordant_pairs(u.values(), g.values(), rel_tol * max_abs(u.values()), rel_tol * max_abs(g.values()));
}

std::size_t anti_comonotonicity_residual(const ScalarField& g, const ScalarField& u, double rel_tol) {
    if (!g.same_domain(u))
        throw DomainMismatch();
    std::vector<double> neg(g.values().begin(), g.values().end());
    for (double& x : neg)
        x = -x;
    return discordant_pairs(u.values(), neg, rel_tol * max_abs(u.values()), rel_tol * max_abs(g.values()));
}

} // namespace membrane
