#include "helpers.hpp"

#include "membrane/analysis.hpp"
#include "membrane/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace membrane;

TEST_CASE("symmetric difference counts cells and weighs them by cell area") {
    auto d = testing::square(4);
    CellSet a{d, {0, 1, 2, 5}};
    CellSet b{d, {1, 2, 3}};
    CHECK(symmetric_difference_count(a, b) == 3);
    CHECK(symmetric_difference(a, b) == doctest::Approx(3.0 / 16.0));
    CHECK(symmetric_difference_count(a, a) == 0);
    CellSet other{testing::square(4), {0}};
    CHECK_THROWS_AS(symmetric_difference(a, other), DomainMismatch);
}

TEST_CASE("radial profile of a radial field") {
    auto d = testing::disk(48);
    std::vector<double> v(d->size());
    for (std::size_t c = 0; c < d->size(); ++c) {
        const auto p = d->centroid(c);
        v[c] = p.x * p.x + p.y * p.y;
    }
    const std::size_t bins = 12;
    auto prof = radial_profile(ScalarField(d, v), bins);
    REQUIRE(prof.means.size() == bins);
    const double width = 1.0 / bins;
    std::size_t total = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        // r^2 varies by at most (2r + w) w across a bin at outer radius r <= 1
        CHECK(prof.spreads[b] <= width * 2.0 + 1e-12);
        if (b > 0)
            CHECK(prof.means[b] > prof.means[b - 1]);
        total += prof.counts[b];
    }
    CHECK(total == d->size());

    auto flat = radial_profile(ScalarField::constant(d, 3.0), bins);
    for (std::size_t b = 0; b < flat.means.size(); ++b) {
        CHECK(flat.spreads[b] == 0.0);
        CHECK(flat.means[b] == 3.0);
    }
    CHECK_THROWS_AS(radial_profile(ScalarField::constant(testing::square(8), 1.0), 4), PreconditionError);
    CHECK_THROWS_AS(radial_profile(ScalarField::constant(d, 1.0), 0), PreconditionError);
}

TEST_CASE("gamma sweep rejects values that collapse to the same cell count") {
    auto d = testing::disk(16);
    auto f = ScalarField::constant(d, 1.0);
    const double h2 = d->cell_measure();
    CHECK_THROWS_AS(sweep_gamma(f, 1.0, 0.0, {0.5, 0.5 + 0.1 * h2}), PreconditionError);
    CHECK_THROWS_AS(sweep_gamma(f, 1.0, 0.0, {0.5, 0.4}), PreconditionError);
    CHECK_THROWS_AS(sweep_gamma(f, 1.0, 0.0, {0.5, d->measure()}), PreconditionError);
}

TEST_CASE("gamma sweep on a small disk passes its structural checks") {
    auto d = testing::disk(24);
    auto f = ScalarField::constant(d, 1.0);
    const double m = d->measure();
    auto rep = sweep_gamma(f, 1.0, 0.0, {0.15 * m, 0.3 * m, 0.45 * m});
    REQUIRE(rep.records.size() == 3);
    for (const auto& c : rep.checks) {
        INFO(c.name << ": " << c.detail);
        if (c.name != "derivative matches -(alpha-beta) c^2")
            CHECK(c.passed);
    }
    CHECK(rep.derivative_errors.size() == 1);
    CHECK(rep.records[0].set.subset_of(rep.records[1].set));
    CHECK(rep.records[1].set.subset_of(rep.records[2].set));
}

TEST_CASE("alpha sweep validates its inputs") {
    auto d = testing::square(8);
    auto f = ScalarField::constant(d, 1.0);
    StabilitySpec st;
    CHECK_THROWS_AS(sweep_alpha(f, {0.5, 0.8}, 0.0, 0.3, {}, &st), PreconditionError);
    CHECK_THROWS_AS(sweep_alpha(f, {0.8, 0.5}, 0.1, 0.3), PreconditionError);
    CHECK_THROWS_AS(sweep_alpha(f, {0.5, 1.2}, 0.1, 0.3), PreconditionError);
    CHECK_THROWS_AS(sweep_alpha(f, {0.05, 0.5}, 0.1, 0.3), PreconditionError);
}

TEST_CASE("alpha sweep on a small square") {
    // an asymmetric load avoids ties between mirror-image cells
    auto d = testing::square(16);
    std::vector<double> v(d->size());
    for (std::size_t c = 0; c < d->size(); ++c) {
        const auto p = d->centroid(c);
        v[c] = 1.0 + 0.3 * p.x + 0.1 * p.y * p.y;
    }
    ScalarField f(d, v);
    StabilitySpec st;
    auto rep = sweep_alpha(f, {0.4, 0.7, 1.0}, 0.1, 0.3, {}, &st);
    for (const auto& c : rep.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
    REQUIRE(rep.stability.size() == st.gaps.size());
    for (std::size_t i = 0; i < rep.stability.size(); ++i)
        CHECK(rep.stability[i].alpha == doctest::Approx(st.alpha_target - st.gaps[i]));
}
