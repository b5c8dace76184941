#pragma once

#include "membrane/analysis.hpp"
#include "membrane/domain.hpp"
#include "membrane/fields.hpp"
#include "membrane/optimize.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace membrane {

/// Load or density description.
struct FieldSpec {
    enum class Kind { constant, radial_polynomial, eigenfunction, csv };
    Kind kind = Kind::constant;
    double value = 1.0;                          // constant
    std::vector<double> coefficients;            // radial_polynomial: sum c_k r^k
    std::vector<std::pair<int, int>> modes;      // eigenfunction: (m, n) per term
    std::vector<double> weights;                 // eigenfunction: weight per term
    std::filesystem::path path;                  // csv
};

struct GeneratorSpec {
    enum class Kind { two_material, multi, csv };
    Kind kind = Kind::two_material;
    double alpha = 1.0;
    double beta = 0.0;
    std::optional<double> gamma;           // absolute measure
    std::optional<double> gamma_fraction;  // fraction of |D|
    std::vector<double> values;            // multi
    std::vector<double> fractions;         // multi, summing to 1
    std::filesystem::path path;            // csv: the field whose values generate the class
};

struct SweepSpec {
    std::vector<double> gammas;
    std::vector<double> gamma_fractions;
    std::vector<double> alphas;
    std::optional<StabilitySpec> stability;
    double derivative_tolerance = 0.10;
};

struct OutputSpec {
    std::filesystem::path dir = "out";
    bool csv = true;
    bool pgm = true;
    bool json = true;
};

struct RunConfig {
    DomainSpec domain;
    FieldSpec force;
    std::optional<FieldSpec> density;  // solve only; defaults to g = 0
    GeneratorSpec generator;
    OptimizeOptions optimizer;         // solver block lands in optimizer.solver
    OutputSpec output;
    SweepSpec sweep;
    std::size_t multistart_runs = 5;
    double multistart_tolerance = 1e-8;
    std::size_t radial_bins = 24;
    nlohmann::json source;             // the parsed document, echoed into manifests
};

/// Parses and validates a config document. Relative csv paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

ScalarField build_field(const DomainPtr& domain, const FieldSpec& spec);
Generator build_generator(const DomainPtr& domain, const GeneratorSpec& spec);

/// Measure of the alpha set for a two-material generator spec.
double resolve_gamma(const Domain& d, const GeneratorSpec& spec);

/// Cell counts for level fractions over n cells: floor of each share, then the
/// leftover cells go to the largest remainders (earlier level wins ties).
std::vector<std::size_t> apportion(const std::vector<double>& fractions, std::size_t n);

/// Discrete Dirichlet eigenvector of the bounding grid, sin(m pi (i+1)/(nx+1)) sin(n pi (j+1)/(ny+1)).
double grid_eigenfunction(const Domain& d, std::size_t cell, int m, int n);

} // namespace membrane
