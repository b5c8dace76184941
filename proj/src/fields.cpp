#include "membrane/fields.hpp"

#include "membrane/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace membrane {

namespace {

void require_same(const ScalarField& a, const ScalarField& b) {
    if (!a.same_domain(b))
        throw DomainMismatch();
}

void require_nonnegative(std::span<const double> v) {
    for (double x : v)
        if (x < 0.0)
            throw PreconditionError("rearrangement requires non-negative values");
}

std::vector<double> sorted_descending(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

// Step profile of cell values already in monotone order; runs of equal values
// become one step.
MonotoneProfile profile_from(const std::vector<double>& levels, double cell) {
    MonotoneProfile p;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double end = static_cast<double>(i + 1) * cell;
        if (!p.levels.empty() && p.levels.back() == levels[i])
            p.breakpoints.back() = end;
        else {
            p.levels.push_back(levels[i]);
            p.breakpoints.push_back(end);
        }
    }
    return p;
}

ScalarField assign_along(const Generator& gen, const ScalarField& w, bool largest_last) {
    if (gen.domain_ptr() != w.domain_ptr())
        throw DomainMismatch();
    const auto order = ascending_order(w.values());
    const auto vals = gen.sorted_values();  // descending
    const std::size_t n = order.size();
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r)
        out[order[r]] = largest_last ? vals[n - 1 - r] : vals[r];
    return ScalarField(w.domain_ptr(), std::move(out));
}

} // namespace

ScalarField::ScalarField(DomainPtr domain, std::vector<double> values)
    : domain_(std::move(domain)), values_(std::move(values)) {
    if (!domain_)
        throw PreconditionError("field requires a domain");
    if (values_.size() != domain_->size())
        throw PreconditionError("field length does not match interior cell count");
    for (double v : values_)
        if (!std::isfinite(v))
            throw PreconditionError("field values must be finite");
}

ScalarField ScalarField::constant(DomainPtr domain, double value) {
    const std::size_t n = domain->size();
    return ScalarField(std::move(domain), std::vector<double>(n, value));
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

Generator::Generator(const ScalarField& g0) : Generator(g0.domain_ptr(), {g0.values().begin(), g0.values().end()}) {}

Generator::Generator(DomainPtr domain, std::vector<double> values) : domain_(std::move(domain)) {
    if (!domain_ || values.size() != domain_->size())
        throw PreconditionError("generator length does not match interior cell count");
    require_nonnegative(values);
    sorted_ = sorted_descending(values);
    if (!(sorted_.front() > 0.0))
        throw PreconditionError("generator must not be identically zero");
}

double Generator::quantum() const {
    double q = 0.0;
    for (std::size_t i = 1; i < sorted_.size(); ++i) {
        const double gap = sorted_[i - 1] - sorted_[i];
        if (gap > 0.0 && (q == 0.0 || gap < q))
            q = gap;
    }
    return q;
}

ScalarField Generator::as_field() const { return ScalarField(domain_, sorted_); }

bool CellSet::contains(std::size_t c) const { return std::binary_search(cells.begin(), cells.end(), c); }

bool CellSet::subset_of(const CellSet& other) const {
    if (domain != other.domain)
        throw DomainMismatch();
    return std::includes(other.cells.begin(), other.cells.end(), cells.begin(), cells.end());
}

double MonotoneProfile::at(double s) const {
    auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), s);
    if (it == breakpoints.end())
        return levels.back();
    return levels[static_cast<std::size_t>(it - breakpoints.begin())];
}

double distribution_function(const ScalarField& f, double level) {
    const auto v = f.values();
    const auto count = std::count_if(v.begin(), v.end(), [&](double x) { return x >= level; });
    return static_cast<double>(count) * f.domain().cell_measure();
}

MonotoneProfile decreasing_rearrangement(const ScalarField& f) {
    require_nonnegative(f.values());
    return profile_from(sorted_descending(f.values()), f.domain().cell_measure());
}

MonotoneProfile increasing_rearrangement(const ScalarField& f) {
    require_nonnegative(f.values());
    auto levels = sorted_descending(f.values());
    std::reverse(levels.begin(), levels.end());
    return profile_from(levels, f.domain().cell_measure());
}

bool is_rearrangement(const ScalarField& a, const ScalarField& b) {
    require_same(a, b);
    return sorted_descending(a.values()) == sorted_descending(b.values());
}

bool in_weak_closure(const ScalarField& g, const Generator& gen) {
    if (g.domain_ptr() != gen.domain_ptr())
        return false;
    const auto v = g.values();
    if (std::any_of(v.begin(), v.end(), [](double x) { return x < 0.0; }))
        return false;
    const auto ref = gen.sorted_values();
    const double scale = std::accumulate(ref.begin(), ref.end(), 0.0);
    const auto mine = sorted_descending(v);
    double partial = 0.0;
    double partial_ref = 0.0;
    for (std::size_t k = 0; k < mine.size(); ++k) {
        partial += mine[k];
        partial_ref += ref[k];
        if (partial > partial_ref + 1e-12 * scale)
            return false;
    }
    return std::abs(partial - partial_ref) <= 1e-12 * scale;
}

std::vector<std::size_t> ascending_order(std::span<const double> w) {
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return w[a] < w[b] || (w[a] == w[b] && a < b);
    });
    return order;
}

ScalarField align_increasing(const Generator& gen, const ScalarField& w) { return assign_along(gen, w, true); }

ScalarField align_decreasing(const Generator& gen, const ScalarField& w) { return assign_along(gen, w, false); }

double support_measure(const ScalarField& f) {
    const auto v = f.values();
    const auto count = std::count_if(v.begin(), v.end(), [](double x) { return x > 0.0; });
    return static_cast<double>(count) * f.domain().cell_measure();
}

double integrate(const ScalarField& f) {
    const auto v = f.values();
    return std::accumulate(v.begin(), v.end(), 0.0) * f.domain().cell_measure();
}

double inner(const ScalarField& f, const ScalarField& g) {
    require_same(f, g);
    const auto a = f.values();
    const auto b = g.values();
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0) * f.domain().cell_measure();
}

} // namespace membrane
