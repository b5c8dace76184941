#include "membrane/config.hpp"

#include "membrane/errors.hpp"
#include "membrane/io.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace membrane {

using nlohmann::json;

namespace {

// Rejects keys outside `allowed` so typos surface instead of silently defaulting.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw ConfigError(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.contains(key))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        throw ConfigError(where + " requires '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty())
        path = base / path;
    if (!std::filesystem::exists(path))
        throw ConfigError("file not found: " + path.string());
    return path;
}

DomainSpec parse_domain(const json& j) {
    const std::string w = "domain";
    const auto shape = get<std::string>(j, "shape", w);
    DomainSpec spec;
    if (shape == "rectangle") {
        check_keys(j, w, {"shape", "width", "height", "resolution", "target_area"});
        spec.shape = Rectangle{get<double>(j, "width", w), get<double>(j, "height", w)};
    } else if (shape == "disk") {
        check_keys(j, w, {"shape", "radius", "resolution", "target_area"});
        spec.shape = Disk{get<double>(j, "radius", w)};
    } else if (shape == "dumbbell") {
        check_keys(j, w, {"shape", "lobe_radius", "neck_length", "neck_halfwidth", "resolution", "target_area"});
        spec.shape = Dumbbell{get<double>(j, "lobe_radius", w), get<double>(j, "neck_length", w),
                              get<double>(j, "neck_halfwidth", w)};
    } else {
        throw ConfigError("domain.shape must be rectangle, disk or dumbbell");
    }
    spec.resolution = get_or<int>(j, "resolution", spec.resolution, w);
    if (j.contains("target_area"))
        spec.target_area = get<double>(j, "target_area", w);
    try {
        spec.validate();
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("domain: ") + e.what());
    }
    return spec;
}

FieldSpec parse_field(const json& j, const std::string& w, const std::filesystem::path& base) {
    FieldSpec spec;
    const auto kind = get<std::string>(j, "kind", w);
    if (kind == "constant") {
        check_keys(j, w, {"kind", "value"});
        spec.kind = FieldSpec::Kind::constant;
        spec.value = get<double>(j, "value", w);
    } else if (kind == "radial_polynomial") {
        check_keys(j, w, {"kind", "coefficients"});
        spec.kind = FieldSpec::Kind::radial_polynomial;
        spec.coefficients = get<std::vector<double>>(j, "coefficients", w);
        if (spec.coefficients.empty())
            throw ConfigError(w + ".coefficients must not be empty");
    } else if (kind == "eigenfunction") {
        check_keys(j, w, {"kind", "mode", "modes", "weights"});
        spec.kind = FieldSpec::Kind::eigenfunction;
        if (j.contains("mode") == j.contains("modes"))
            throw ConfigError(w + " needs exactly one of 'mode' or 'modes'");
        if (j.contains("mode")) {
            const auto m = get<std::vector<int>>(j, "mode", w);
            if (m.size() != 2)
                throw ConfigError(w + ".mode must be [m, n]");
            spec.modes.emplace_back(m[0], m[1]);
            spec.weights = {1.0};
        } else {
            for (const auto& m : get<std::vector<std::vector<int>>>(j, "modes", w)) {
                if (m.size() != 2)
                    throw ConfigError(w + ".modes entries must be [m, n]");
                spec.modes.emplace_back(m[0], m[1]);
            }
            spec.weights = get_or<std::vector<double>>(j, "weights", std::vector<double>(spec.modes.size(), 1.0), w);
            if (spec.weights.size() != spec.modes.size())
                throw ConfigError(w + ".weights must match modes");
        }
        for (auto [m, n] : spec.modes)
            if (m < 1 || n < 1)
                throw ConfigError(w + " mode indices start at 1");
    } else if (kind == "csv") {
        check_keys(j, w, {"kind", "path"});
        spec.kind = FieldSpec::Kind::csv;
        spec.path = resolve_path(get<std::string>(j, "path", w), base);
    } else {
        throw ConfigError(w + ".kind must be constant, radial_polynomial, eigenfunction or csv");
    }
    return spec;
}

GeneratorSpec parse_generator(const json& j, const std::filesystem::path& base) {
    const std::string w = "generator";
    GeneratorSpec spec;
    const auto kind = get<std::string>(j, "kind", w);
    if (kind == "two_material") {
        check_keys(j, w, {"kind", "alpha", "beta", "gamma", "gamma_fraction"});
        spec.kind = GeneratorSpec::Kind::two_material;
        spec.alpha = get<double>(j, "alpha", w);
        spec.beta = get<double>(j, "beta", w);
        if (!(spec.alpha <= 1.0 && spec.alpha > spec.beta && spec.beta >= 0.0))
            throw ConfigError("generator requires 1 >= alpha > beta >= 0");
        if (j.contains("gamma") && j.contains("gamma_fraction"))
            throw ConfigError("generator takes gamma or gamma_fraction, not both");
        if (j.contains("gamma"))
            spec.gamma = get<double>(j, "gamma", w);
        if (j.contains("gamma_fraction")) {
            spec.gamma_fraction = get<double>(j, "gamma_fraction", w);
            if (!(*spec.gamma_fraction > 0.0 && *spec.gamma_fraction < 1.0))
                throw ConfigError("generator.gamma_fraction must lie in (0, 1)");
        }
    } else if (kind == "multi") {
        check_keys(j, w, {"kind", "values", "fractions"});
        spec.kind = GeneratorSpec::Kind::multi;
        spec.values = get<std::vector<double>>(j, "values", w);
        spec.fractions = get<std::vector<double>>(j, "fractions", w);
        if (spec.values.empty() || spec.values.size() != spec.fractions.size())
            throw ConfigError("generator.values and fractions must be non-empty and of equal length");
        double total = 0.0;
        for (std::size_t i = 0; i < spec.values.size(); ++i) {
            if (!(spec.values[i] >= 0.0) || !(spec.fractions[i] >= 0.0))
                throw ConfigError("generator values and fractions must be non-negative");
            total += spec.fractions[i];
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ConfigError("generator.fractions must sum to 1");
    } else if (kind == "csv") {
        check_keys(j, w, {"kind", "path"});
        spec.kind = GeneratorSpec::Kind::csv;
        spec.path = resolve_path(get<std::string>(j, "path", w), base);
    } else {
        throw ConfigError("generator.kind must be two_material, multi or csv");
    }
    return spec;
}

SolveOptions parse_solver(const json& j) {
    const std::string w = "solver";
    check_keys(j, w, {"tol", "max_iter", "method"});
    SolveOptions so;
    so.tol = get_or<double>(j, "tol", so.tol, w);
    so.max_iter = get_or<std::size_t>(j, "max_iter", so.max_iter, w);
    const auto method = get_or<std::string>(j, "method", "auto", w);
    if (method == "auto")
        so.method = SolverMethod::automatic;
    else if (method == "cg")
        so.method = SolverMethod::conjugate_gradient;
    else if (method == "dense")
        so.method = SolverMethod::dense;
    else
        throw ConfigError("solver.method must be auto, cg or dense");
    if (!(so.tol > 0.0 && so.tol < 1.0))
        throw ConfigError("solver.tol must lie in (0, 1)");
    return so;
}

void parse_optimizer(const json& j, OptimizeOptions& o) {
    const std::string w = "optimizer";
    check_keys(j, w, {"mode", "energy_tol", "max_outer", "line_search_halvings", "seed"});
    const auto mode = get_or<std::string>(j, "mode", "minimize", w);
    if (mode == "minimize")
        o.mode = Mode::minimize;
    else if (mode == "maximize")
        o.mode = Mode::maximize;
    else
        throw ConfigError("optimizer.mode must be minimize or maximize");
    o.energy_tol = get_or<double>(j, "energy_tol", o.energy_tol, w);
    o.max_outer = get_or<std::size_t>(j, "max_outer", o.max_outer, w);
    o.line_search_halvings = get_or<int>(j, "line_search_halvings", o.line_search_halvings, w);
    if (j.contains("seed"))
        o.seed = get<std::uint64_t>(j, "seed", w);
}

OutputSpec parse_output(const json& j, const std::filesystem::path& base) {
    const std::string w = "output";
    check_keys(j, w, {"dir", "formats"});
    OutputSpec out;
    if (j.contains("dir")) {
        out.dir = get<std::string>(j, "dir", w);
        if (out.dir.is_relative() && !base.empty())
            out.dir = base / out.dir;
    }
    if (j.contains("formats")) {
        out.csv = out.pgm = out.json = false;
        for (const auto& f : get<std::vector<std::string>>(j, "formats", w)) {
            if (f == "csv")
                out.csv = true;
            else if (f == "pgm")
                out.pgm = true;
            else if (f == "json")
                out.json = true;
            else
                throw ConfigError("output.formats entries must be csv, pgm or json");
        }
    }
    return out;
}

SweepSpec parse_sweep(const json& j) {
    const std::string w = "sweep";
    check_keys(j, w, {"gammas", "gamma_fractions", "alphas", "stability", "derivative_tolerance"});
    SweepSpec s;
    s.gammas = get_or<std::vector<double>>(j, "gammas", {}, w);
    s.gamma_fractions = get_or<std::vector<double>>(j, "gamma_fractions", {}, w);
    if (!s.gammas.empty() && !s.gamma_fractions.empty())
        throw ConfigError("sweep takes gammas or gamma_fractions, not both");
    s.alphas = get_or<std::vector<double>>(j, "alphas", {}, w);
    s.derivative_tolerance = get_or<double>(j, "derivative_tolerance", s.derivative_tolerance, w);
    if (j.contains("stability")) {
        const auto& st = j.at("stability");
        check_keys(st, "sweep.stability", {"alpha_target", "gaps", "final_cap_cells"});
        StabilitySpec spec;
        spec.alpha_target = get_or<double>(st, "alpha_target", spec.alpha_target, "sweep.stability");
        spec.gaps = get_or<std::vector<double>>(st, "gaps", spec.gaps, "sweep.stability");
        spec.final_cap_cells = get_or<std::size_t>(st, "final_cap_cells", spec.final_cap_cells, "sweep.stability");
        s.stability = spec;
    }
    return s;
}

} // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    check_keys(doc, "config",
               {"domain", "force", "density", "generator", "solver", "optimizer", "output", "sweep", "multistart",
                "analysis"});
    RunConfig cfg;
    cfg.source = doc;
    if (!doc.contains("domain"))
        throw ConfigError("config requires a domain block");
    cfg.domain = parse_domain(doc.at("domain"));
    if (doc.contains("force"))
        cfg.force = parse_field(doc.at("force"), "force", base_dir);
    if (doc.contains("density"))
        cfg.density = parse_field(doc.at("density"), "density", base_dir);
    if (doc.contains("generator"))
        cfg.generator = parse_generator(doc.at("generator"), base_dir);
    if (doc.contains("solver"))
        cfg.optimizer.solver = parse_solver(doc.at("solver"));
    if (doc.contains("optimizer"))
        parse_optimizer(doc.at("optimizer"), cfg.optimizer);
    try {
        cfg.optimizer.validate();
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("optimizer: ") + e.what());
    }
    if (doc.contains("output"))
        cfg.output = parse_output(doc.at("output"), base_dir);
    if (doc.contains("sweep"))
        cfg.sweep = parse_sweep(doc.at("sweep"));
    if (doc.contains("multistart")) {
        const auto& m = doc.at("multistart");
        check_keys(m, "multistart", {"runs", "tolerance"});
        cfg.multistart_runs = get_or<std::size_t>(m, "runs", cfg.multistart_runs, "multistart");
        cfg.multistart_tolerance = get_or<double>(m, "tolerance", cfg.multistart_tolerance, "multistart");
        if (cfg.multistart_runs < 2)
            throw ConfigError("multistart.runs must be at least 2");
    }
    if (doc.contains("analysis")) {
        const auto& a = doc.at("analysis");
        check_keys(a, "analysis", {"radial_bins"});
        cfg.radial_bins = get_or<std::size_t>(a, "radial_bins", cfg.radial_bins, "analysis");
        if (cfg.radial_bins == 0)
            throw ConfigError("analysis.radial_bins must be positive");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

double grid_eigenfunction(const Domain& d, std::size_t cell, int m, int n) {
    const double i = d.column(cell) + 1.0;
    const double j = d.row(cell) + 1.0;
    return std::sin(m * std::numbers::pi * i / (d.nx() + 1.0)) * std::sin(n * std::numbers::pi * j / (d.ny() + 1.0));
}

ScalarField build_field(const DomainPtr& domain, const FieldSpec& spec) {
    const std::size_t n = domain->size();
    std::vector<double> v(n);
    switch (spec.kind) {
    case FieldSpec::Kind::constant:
        std::fill(v.begin(), v.end(), spec.value);
        break;
    case FieldSpec::Kind::radial_polynomial: {
        // radius about the centre of the grid's bounding box
        const Point o = domain->origin();
        const double h = domain->spacing();
        const double cx = o.x + 0.5 * h * domain->nx();
        const double cy = o.y + 0.5 * h * domain->ny();
        for (std::size_t c = 0; c < n; ++c) {
            const Point p = domain->centroid(c);
            const double r = std::hypot(p.x - cx, p.y - cy);
            double acc = 0.0;
            for (auto it = spec.coefficients.rbegin(); it != spec.coefficients.rend(); ++it)
                acc = acc * r + *it;
            v[c] = acc;
        }
        break;
    }
    case FieldSpec::Kind::eigenfunction:
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < spec.modes.size(); ++t)
                acc += spec.weights[t] * grid_eigenfunction(*domain, c, spec.modes[t].first, spec.modes[t].second);
            v[c] = acc;
        }
        break;
    case FieldSpec::Kind::csv:
        return io::read_field_csv(domain, spec.path);
    }
    return ScalarField(domain, std::move(v));
}

std::vector<std::size_t> apportion(const std::vector<double>& fractions, std::size_t n) {
    std::vector<std::size_t> counts(fractions.size());
    std::vector<double> rem(fractions.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double share = fractions[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(share));
        rem[i] = share - std::floor(share);
        used += counts[i];
    }
    std::vector<std::size_t> order(fractions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t t = 0; used < n && t < order.size(); ++t, ++used)
        ++counts[order[t]];
    // floating shares can overshoot by a cell when fractions sum slightly above 1
    for (std::size_t t = order.size(); used > n && t-- > 0;)
        if (counts[order[t]] > 0) {
            --counts[order[t]];
            --used;
        }
    return counts;
}

double resolve_gamma(const Domain& d, const GeneratorSpec& spec) {
    if (spec.gamma)
        return *spec.gamma;
    if (spec.gamma_fraction)
        return *spec.gamma_fraction * d.measure();
    throw ConfigError("generator needs gamma or gamma_fraction");
}

Generator build_generator(const DomainPtr& domain, const GeneratorSpec& spec) {
    try {
        switch (spec.kind) {
        case GeneratorSpec::Kind::two_material:
            return two_material_generator(domain, spec.alpha, spec.beta,
                                          cells_for_measure(*domain, resolve_gamma(*domain, spec)));
        case GeneratorSpec::Kind::multi: {
            const auto counts = apportion(spec.fractions, domain->size());
            std::vector<double> v;
            v.reserve(domain->size());
            for (std::size_t i = 0; i < counts.size(); ++i)
                v.insert(v.end(), counts[i], spec.values[i]);
            return Generator(domain, std::move(v));
        }
        case GeneratorSpec::Kind::csv:
            return Generator(io::read_field_csv(domain, spec.path));
        }
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("generator: ") + e.what());
    }
    throw ConfigError("unreachable generator kind");
}

} // namespace membrane
