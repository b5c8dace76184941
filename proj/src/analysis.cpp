#include "membrane/analysis.hpp"

#include "membrane/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <optional>
#include <sstream>

namespace membrane {

namespace {

// Slack for cellwise state comparisons, on the scale of the solver's accuracy.
double state_slack(const ScalarField& u, const OptimizeOptions& opts) {
    return 10.0 * opts.solver.tol * std::max(std::abs(u.max()), std::abs(u.min()));
}

SweepRecord record_from(double parameter, ShapeResult&& r) {
    return SweepRecord{parameter,
                       r.psi,
                       r.threshold_low,
                       r.threshold_high,
                       std::move(r.set),
                       r.gamma_effective,
                       std::move(r.u),
                       r.run.converged,
                       r.run.comonotone_violations};
}

template <class Solve>
std::vector<SweepRecord> solve_points(const std::vector<double>& params, Solve&& solve) {
    std::vector<std::optional<SweepRecord>> slots(params.size());
    detail::parallel_for(params.size(), [&](std::size_t i) { slots[i] = record_from(params[i], solve(params[i])); });
    std::vector<SweepRecord> out;
    for (auto& s : slots)
        out.push_back(std::move(*s));
    return out;
}

void require_increasing(const std::vector<double>& v, const char* what) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1]))
            throw PreconditionError(std::string(what) + " must be strictly increasing");
}

// Worst value of (upper[c] - lower[c]) over cells; positive means lower <= upper fails.
double worst_excess(const ScalarField& upper, const ScalarField& lower) {
    double worst = -INFINITY;
    for (std::size_t c = 0; c < upper.size(); ++c)
        worst = std::max(worst, lower[c] - upper[c]);
    return worst;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

CheckResult check_state_decreasing(const std::vector<SweepRecord>& recs, const OptimizeOptions& opts) {
    CheckResult c{"state decreasing cellwise", true, {}};
    double worst = -INFINITY;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        const double excess = worst_excess(recs[i - 1].u, recs[i].u);
        worst = std::max(worst, excess);
        if (excess > state_slack(recs[i - 1].u, opts))
            c.passed = false;
    }
    c.detail = "max of u_next - u_prev: " + fmt(worst);
    return c;
}

} // namespace

bool SweepReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

SweepReport sweep_gamma(const ScalarField& f, double alpha, double beta, const std::vector<double>& gammas,
                        const OptimizeOptions& opts, const GammaSweepOptions& sweep) {
    require_increasing(gammas, "gamma values");
    std::vector<std::size_t> ks;
    for (double g : gammas) {
        if (!(g > 0.0 && g < f.domain().measure()))
            throw PreconditionError("every gamma must satisfy 0 < gamma < |D|");
        ks.push_back(cells_for_measure(f.domain(), g));
    }
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] == ks[i - 1])
            throw PreconditionError("gamma values map to duplicate cell counts");

    SweepReport rep;
    rep.records = solve_points(gammas, [&](double g) { return minimize_shape(f, alpha, beta, g, opts); });
    const auto& r = rep.records;

    CheckResult thr{"threshold non-increasing", true, {}};
    CheckResult nest{"sets nested", true, {}};
    CheckResult psi{"energy strictly decreasing", true, {}};
    std::size_t outside = 0;
    for (std::size_t i = 1; i < r.size(); ++i) {
        if (!(r[i - 1].c_high >= r[i].c_low))
            thr.passed = false;
        if (!(r[i].psi < r[i - 1].psi))
            psi.passed = false;
        for (auto c : r[i - 1].set.cells)
            if (!r[i].set.contains(c))
                ++outside;
    }
    nest.passed = outside == 0;
    nest.detail = std::to_string(outside) + " cells outside the next set";
    rep.checks.push_back(thr);
    rep.checks.push_back(nest);
    rep.checks.push_back(check_state_decreasing(r, opts));
    rep.checks.push_back(psi);

    CheckResult der{"derivative matches -(alpha-beta) c^2", true, {}};
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < r.size(); ++i) {
        // three-point derivative at the middle node; the plain central
        // difference when the nodes are equally spaced
        const double h1 = r[i].gamma_effective - r[i - 1].gamma_effective;
        const double h2 = r[i + 1].gamma_effective - r[i].gamma_effective;
        const double slope = -h2 / (h1 * (h1 + h2)) * r[i - 1].psi + (h2 - h1) / (h1 * h2) * r[i].psi +
                             h1 / (h2 * (h1 + h2)) * r[i + 1].psi;
        const double c = 0.5 * (r[i].c_low + r[i].c_high);
        const double predicted = -(alpha - beta) * c * c;
        const double err = std::abs(slope - predicted) / std::abs(predicted);
        rep.derivative_errors.push_back(err);
        worst = std::max(worst, err);
    }
    der.passed = worst <= sweep.derivative_tolerance;
    der.detail = "max relative error " + fmt(worst) + " (tolerance " + fmt(sweep.derivative_tolerance) + ")";
    if (!rep.derivative_errors.empty())
        rep.checks.push_back(der);
    return rep;
}

AlphaSweepReport sweep_alpha(const ScalarField& f, const std::vector<double>& alphas, double beta, double gamma,
                             const OptimizeOptions& opts, const StabilitySpec* stability) {
    require_increasing(alphas, "alpha values");
    if (alphas.empty() || !(beta < alphas.front()) || alphas.back() > 1.0)
        throw PreconditionError("alpha values must satisfy beta < alpha <= 1");
    if (stability) {
        if (!(beta > 0.0))
            throw PreconditionError("the stability check requires beta > 0");
        if (!(stability->alpha_target > beta && stability->alpha_target <= 1.0))
            throw PreconditionError("stability target must lie in (beta, 1]");
        for (double gap : stability->gaps)
            if (!(gap > 0.0) || !(stability->alpha_target - gap > beta))
                throw PreconditionError("stability gaps must keep alpha above beta");
    }

    AlphaSweepReport rep;
    rep.records = solve_points(alphas, [&](double a) { return minimize_shape(f, a, beta, gamma, opts); });
    const auto& r = rep.records;

    CheckResult thr{"threshold strictly decreasing", true, {}};
    for (std::size_t i = 1; i < r.size(); ++i)
        if (!(r[i - 1].c_low > r[i].c_high))
            thr.passed = false;
    rep.checks.push_back(thr);
    rep.checks.push_back(check_state_decreasing(r, opts));

    if (stability) {
        std::vector<double> params{stability->alpha_target};
        for (double gap : stability->gaps)
            params.push_back(stability->alpha_target - gap);
        const auto seq = solve_points(params, [&](double a) { return minimize_shape(f, a, beta, gamma, opts); });
        const auto& target = seq.front();
        for (std::size_t i = 1; i < seq.size(); ++i) {
            rep.stability.push_back({stability->gaps[i - 1], seq[i].parameter,
                                     symmetric_difference(seq[i].set, target.set),
                                     symmetric_difference_count(seq[i].set, target.set),
                                     std::abs(seq[i].psi - target.psi)});
        }
        CheckResult mono{"symmetric difference non-increasing", true, {}};
        CheckResult psi{"energy difference non-increasing", true, {}};
        std::string counts;
        for (std::size_t i = 0; i < rep.stability.size(); ++i) {
            counts += (i ? "," : "") + std::to_string(rep.stability[i].symmetric_difference_cells);
            if (i > 0 && rep.stability[i].symmetric_difference > rep.stability[i - 1].symmetric_difference)
                mono.passed = false;
            if (i > 0 && rep.stability[i].psi_difference > rep.stability[i - 1].psi_difference)
                psi.passed = false;
        }
        mono.detail = "cells: " + counts;
        CheckResult cap{"final symmetric difference within cap", true, {}};
        if (!rep.stability.empty()) {
            const auto last = rep.stability.back().symmetric_difference_cells;
            cap.passed = last <= stability->final_cap_cells;
            cap.detail = std::to_string(last) + " cells (cap " + std::to_string(stability->final_cap_cells) + ")";
        }
        rep.checks.push_back(mono);
        rep.checks.push_back(cap);
        rep.checks.push_back(psi);
    }
    return rep;
}

RadialProfile radial_profile(const ScalarField& field, std::size_t bins) {
    const Domain& d = field.domain();
    if (!d.is_disk())
        throw PreconditionError("radial profile requires a disk domain");
    if (bins == 0)
        throw PreconditionError("radial profile needs at least one bin");
    const double radius = std::get<Disk>(*d.shape()).radius;
    const double width = radius / static_cast<double>(bins);

    std::vector<double> sum(bins, 0.0), lo(bins, INFINITY), hi(bins, -INFINITY);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t c = 0; c < d.size(); ++c) {
        const Point p = d.centroid(c);
        const double r = std::hypot(p.x, p.y);
        const auto b = std::min(bins - 1, static_cast<std::size_t>(r / width));
        sum[b] += field[c];
        lo[b] = std::min(lo[b], field[c]);
        hi[b] = std::max(hi[b], field[c]);
        ++count[b];
    }
    RadialProfile p;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0)
            continue;
        p.radii.push_back((static_cast<double>(b) + 0.5) * width);
        p.means.push_back(sum[b] / static_cast<double>(count[b]));
        p.spreads.push_back(hi[b] - lo[b]);
        p.counts.push_back(count[b]);
    }
    return p;
}

std::size_t symmetric_difference_count(const CellSet& a, const CellSet& b) {
    if (a.domain != b.domain)
        throw DomainMismatch();
    std::vector<std::size_t> out;
    std::set_symmetric_difference(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(),
                                  std::back_inserter(out));
    return out.size();
}

double symmetric_difference(const CellSet& a, const CellSet& b) {
    return static_cast<double>(symmetric_difference_count(a, b)) * a.domain->cell_measure();
}

} // namespace membrane
