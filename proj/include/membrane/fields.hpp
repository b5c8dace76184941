#pragma once

#include "membrane/domain.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace membrane {

/// One finite value per interior cell, in the domain's cell order.
class ScalarField {
public:
    ScalarField(DomainPtr domain, std::vector<double> values);
    static ScalarField constant(DomainPtr domain, double value);

    const Domain& domain() const noexcept { return *domain_; }
    const DomainPtr& domain_ptr() const noexcept { return domain_; }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& mutable_values() noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t c) const { return values_[c]; }

    double min() const;
    double max() const;
    bool same_domain(const ScalarField& other) const noexcept { return domain_ == other.domain_; }

private:
    DomainPtr domain_;
    std::vector<double> values_;
};

/// The value multiset of a non-negative, non-trivial density, sorted decreasing.
/// A rearrangement class is the set of all assignments of these values to cells.
class Generator {
public:
    explicit Generator(const ScalarField& g0);
    Generator(DomainPtr domain, std::vector<double> values);

    const Domain& domain() const noexcept { return *domain_; }
    const DomainPtr& domain_ptr() const noexcept { return domain_; }
    std::span<const double> sorted_values() const noexcept { return sorted_; }
    std::size_t size() const noexcept { return sorted_.size(); }
    bool is_singleton() const noexcept { return sorted_.front() == sorted_.back(); }

    /// Smallest gap between consecutive distinct values (0 for a singleton class).
    double quantum() const;

    /// The class element holding the values in cell order, largest first.
    ScalarField as_field() const;

private:
    DomainPtr domain_;
    std::vector<double> sorted_;
};

/// A set of interior cells of one domain, indices ascending.
struct CellSet {
    DomainPtr domain;
    std::vector<std::size_t> cells;

    std::size_t size() const noexcept { return cells.size(); }
    double measure() const { return static_cast<double>(cells.size()) * domain->cell_measure(); }
    bool contains(std::size_t c) const;
    /// True when every cell of this set lies in `other`.
    bool subset_of(const CellSet& other) const;
};

/// Step function on (0, |D|]: `levels[i]` holds on (breakpoints[i-1], breakpoints[i]].
struct MonotoneProfile {
    std::vector<double> breakpoints;
    std::vector<double> levels;

    /// Value at cumulative measure s in (0, |D|].
    double at(double s) const;
};

/// |{f >= level}|.
double distribution_function(const ScalarField& f, double level);
MonotoneProfile decreasing_rearrangement(const ScalarField& f);
MonotoneProfile increasing_rearrangement(const ScalarField& f);

bool is_rearrangement(const ScalarField& a, const ScalarField& b);
/// Membership in the majorization polytope of the generator's values.
bool in_weak_closure(const ScalarField& g, const Generator& gen);

/// The class element comonotone with `w`: maximizes the sum of g*w.
ScalarField align_increasing(const Generator& gen, const ScalarField& w);
/// The class element anti-monotone with `w`: minimizes the sum of g*w.
ScalarField align_decreasing(const Generator& gen, const ScalarField& w);

/// |{f > 0}|.
double support_measure(const ScalarField& f);
double integrate(const ScalarField& f);
double inner(const ScalarField& f, const ScalarField& g);

/// Cell order ascending by (w, cell index).
std::vector<std::size_t> ascending_order(std::span<const double> w);

} // namespace membrane
