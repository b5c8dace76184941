#pragma once

#include "membrane/domain.hpp"
#include "membrane/fields.hpp"
#include "membrane/pde.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace testing {

using namespace membrane;

inline DomainPtr square(int res) { return build_domain({Rectangle{1.0, 1.0}, res, std::nullopt}); }
inline DomainPtr disk(int res) { return build_domain({Disk{1.0}, res, std::nullopt}); }

inline ScalarField random_field(const DomainPtr& d, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(d->size());
    for (auto& x : v)
        x = u(rng);
    return ScalarField(d, std::move(v));
}

/// Reference operator assembled directly from the mask: 4/h^2 on the diagonal,
/// -1/h^2 for each interior 4-neighbour found by grid lookup.
inline Eigen::MatrixXd reference_matrix(const ScalarField& g) {
    const Domain& d = g.domain();
    const auto n = static_cast<Eigen::Index>(d.size());
    const double ih2 = 1.0 / d.cell_measure();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t c = 0; c < d.size(); ++c) {
        const int i = d.column(c), j = d.row(c);
        const auto ci = static_cast<Eigen::Index>(c);
        m(ci, ci) = 4.0 * ih2 + g[c];
        const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
        for (int t = 0; t < 4; ++t) {
            const auto nb = d.cell_at(i + di[t], j + dj[t]);
            if (nb >= 0)
                m(ci, nb) = -ih2;
        }
    }
    return m;
}

inline std::vector<double> reference_solve(const ScalarField& g, const ScalarField& f) {
    const Eigen::MatrixXd m = reference_matrix(g);
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::VectorXd u = m.ldlt().solve(rhs);
    return {u.data(), u.data() + u.size()};
}

inline double reference_energy(const ScalarField& g, const ScalarField& f) {
    const auto u = reference_solve(g, f);
    double s = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c)
        s += f[c] * u[c];
    return s * g.domain().cell_measure();
}

} // namespace testing
