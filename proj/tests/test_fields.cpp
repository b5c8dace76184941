#include "helpers.hpp"

#include "membrane/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace membrane;
using testing::square;

namespace {

// 1 x n strip with unit cells.
DomainPtr strip(int n) { return build_domain({Rectangle{double(n), 1.0}, n, std::nullopt}); }

ScalarField field(const DomainPtr& d, std::vector<double> v) { return ScalarField(d, std::move(v)); }

} // namespace

TEST_CASE("field validation") {
    auto d = strip(3);
    CHECK_THROWS_AS(field(d, {1.0, 2.0}), PreconditionError);
    CHECK_THROWS_AS(field(d, {1.0, NAN, 2.0}), PreconditionError);
    auto f = field(d, {2.0, 0.0, 1.0});
    CHECK(f.min() == 0.0);
    CHECK(f.max() == 2.0);
}

TEST_CASE("distribution function") {
    auto d = strip(3);
    auto f = field(d, {2.0, 0.0, 1.0});
    CHECK(distribution_function(f, 1.0) == 2.0);
    CHECK(distribution_function(f, 0.0) == 3.0);
    CHECK(distribution_function(f, 2.5) == 0.0);
}

TEST_CASE("monotone rearrangements") {
    auto d = strip(3);
    auto p = decreasing_rearrangement(field(d, {2.0, 0.0, 1.0}));
    CHECK(p.levels == std::vector<double>{2.0, 1.0, 0.0});
    CHECK(p.breakpoints == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(p.at(0.5) == 2.0);
    CHECK(p.at(2.5) == 0.0);
    auto c = decreasing_rearrangement(ScalarField::constant(d, 3.0));
    CHECK(c.levels.size() == 1);
    CHECK(c.levels[0] == 3.0);
    CHECK(c.breakpoints.back() == 3.0);
    auto q = decreasing_rearrangement(field(d, {5.0, 5.0, 1.0}));
    CHECK(q.levels == std::vector<double>{5.0, 1.0});
    CHECK(q.breakpoints == std::vector<double>{2.0, 3.0});
    CHECK(q.at(0.5) == 5.0);
    CHECK(q.at(1.5) == 5.0);
    CHECK(q.at(2.5) == 1.0);
    auto inc = increasing_rearrangement(field(d, {2.0, 0.0, 1.0}));
    CHECK(inc.at(0.5) == 0.0);
    CHECK(inc.at(2.5) == 2.0);
    CHECK_THROWS_AS(decreasing_rearrangement(field(d, {1.0, -1.0, 0.0})), PreconditionError);
}

TEST_CASE("generator") {
    auto d = strip(4);
    Generator g(field(d, {0.0, 3.0, 1.0, 3.0}));
    auto s = g.sorted_values();
    CHECK(std::vector<double>(s.begin(), s.end()) == std::vector<double>{3.0, 3.0, 1.0, 0.0});
    CHECK(g.quantum() == 1.0);
    CHECK(!g.is_singleton());
    CHECK(Generator(ScalarField::constant(d, 2.0)).is_singleton());
    CHECK_THROWS_AS(Generator(field(d, {0.0, -1.0, 1.0, 1.0})), PreconditionError);
    CHECK_THROWS_AS(Generator(ScalarField::constant(d, 0.0)), PreconditionError);
}

TEST_CASE("class membership") {
    auto d = strip(4);
    Generator gen(field(d, {1.0, 0.5, 0.0, 0.0}));
    CHECK(is_rearrangement(field(d, {0.0, 0.0, 0.5, 1.0}), field(d, {1.0, 0.5, 0.0, 0.0})));
    CHECK(!is_rearrangement(field(d, {0.0, 0.0, 0.5, 0.9}), field(d, {1.0, 0.5, 0.0, 0.0})));
    CHECK(in_weak_closure(field(d, {0.375, 0.375, 0.375, 0.375}), gen));
    CHECK(in_weak_closure(field(d, {0.0, 0.5, 1.0, 0.0}), gen));
    CHECK(!in_weak_closure(field(d, {1.2, 0.3, 0.0, 0.0}), gen));  // exceeds the largest value
    CHECK(!in_weak_closure(field(d, {0.4, 0.4, 0.4, 0.4}), gen));  // wrong total
    CHECK(!in_weak_closure(field(d, {0.9, 0.9, 0.0, 0.0}), gen));  // top-two partial sum too large
}

TEST_CASE("convex combinations of rearrangements stay in the weak closure") {
    auto d = square(5);
    std::mt19937_64 rng(3);
    auto base = testing::random_field(d, rng, 0.0, 1.0);
    Generator gen(base);
    std::vector<double> v(base.values().begin(), base.values().end());
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> a = v, b = v;
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        const double t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        std::vector<double> mix(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            mix[i] = t * a[i] + (1.0 - t) * b[i];
        CHECK(in_weak_closure(field(d, a), gen));
        CHECK(in_weak_closure(field(d, mix), gen));
    }
}

TEST_CASE("alignment ties break by cell index") {
    auto d = strip(2);
    Generator gen(field(d, {0.0, 1.0}));
    auto g = align_increasing(gen, field(d, {5.0, 5.0}));
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1.0);
}

TEST_CASE("alignment is the exact linear optimizer over all permutations") {
    auto d = strip(7);
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        auto w = testing::random_field(d, rng, -1.0, 1.0);
        std::vector<double> vals{0.0, 0.0, 0.2, 0.5, 0.5, 0.9, 1.0};
        Generator gen(d, vals);
        std::sort(vals.begin(), vals.end());
        double best = -INFINITY, worst = INFINITY;
        do {
            double s = 0.0;
            for (std::size_t i = 0; i < vals.size(); ++i)
                s += vals[i] * w[i];
            best = std::max(best, s);
            worst = std::min(worst, s);
        } while (std::next_permutation(vals.begin(), vals.end()));
        CHECK(inner(align_increasing(gen, w), w) == doctest::Approx(best * d->cell_measure()).epsilon(1e-12));
        CHECK(inner(align_decreasing(gen, w), w) == doctest::Approx(worst * d->cell_measure()).epsilon(1e-12));
        CHECK(is_rearrangement(align_increasing(gen, w), gen.as_field()));
    }
}

TEST_CASE("alignment dominates the weak closure too") {
    auto d = square(6);
    std::mt19937_64 rng(5);
    auto base = testing::random_field(d, rng, 0.0, 1.0);
    Generator gen(base);
    std::vector<double> v(base.values().begin(), base.values().end());
    auto w = testing::random_field(d, rng, 0.0, 1.0);
    const double top = inner(align_increasing(gen, w), w);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> a = v, b = v;
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        std::vector<double> mix(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            mix[i] = 0.3 * a[i] + 0.7 * b[i];
        CHECK(inner(field(d, mix), w) <= top + 1e-12);
    }
}

TEST_CASE("integrals") {
    auto d = square(4);
    auto one = ScalarField::constant(d, 1.0);
    CHECK(integrate(one) == doctest::Approx(1.0));
    CHECK(inner(one, ScalarField::constant(d, 2.0)) == doctest::Approx(2.0));
    CHECK(support_measure(field(square(2), {0.0, 1.0, 0.0, 2.0})) == doctest::Approx(0.5));
}

TEST_CASE("cell sets") {
    auto d = square(3);
    CellSet a{d, {1, 4}};
    CellSet b{d, {1, 4, 7}};
    CHECK(a.subset_of(b));
    CHECK(!b.subset_of(a));
    CHECK(a.contains(4));
    CHECK(!a.contains(0));
    CHECK(a.measure() == doctest::Approx(2.0 / 9.0));
    CellSet other{square(3), {1}};
    CHECK_THROWS_AS(a.subset_of(other), DomainMismatch);
}

TEST_CASE("ascending order is stable") {
    std::vector<double> w{3.0, 1.0, 3.0, 0.0};
    auto o = ascending_order(w);
    CHECK(o == std::vector<std::size_t>{3, 1, 0, 2});
}
