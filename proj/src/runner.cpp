#include "membrane/runner.hpp"

#include "membrane/analysis.hpp"
#include "membrane/assumptions.hpp"
#include "membrane/config.hpp"
#include "membrane/errors.hpp"
#include "membrane/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>

namespace membrane {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Context {
    RunConfig cfg;
    DomainPtr domain;
    std::filesystem::path dir;
    RunOutcome outcome;
    json& m;  // outcome.manifest

    explicit Context(RunConfig c) : cfg(std::move(c)), m(outcome.manifest) {}

    void field(const std::string& stem, const ScalarField& f) {
        if (cfg.output.csv) {
            io::write_field_csv(f, dir / (stem + ".csv"));
            outcome.artifacts.push_back(stem + ".csv");
        }
        if (cfg.output.pgm) {
            const auto scale = io::write_field_pgm(f, dir / (stem + ".pgm"));
            outcome.artifacts.push_back(stem + ".pgm");
            m["image_scales"][stem + ".pgm"] = {{"min", scale.min}, {"max", scale.max}};
        }
    }

    void mask(const std::string& stem, const CellSet& set) {
        if (!cfg.output.pgm)
            return;
        io::write_mask_pgm(set, dir / (stem + ".pgm"));
        outcome.artifacts.push_back(stem + ".pgm");
    }

    void table(const std::string& name, const std::string& text) {
        if (!cfg.output.csv)
            return;
        io::write_text(dir / name, text);
        outcome.artifacts.push_back(name);
    }

    ScalarField force() const { return build_field(domain, cfg.force); }
};

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string timestamp_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json domain_json(const Domain& d) {
    return {{"spacing", d.spacing()}, {"nx", d.nx()}, {"ny", d.ny()}, {"cells", d.size()}, {"measure", d.measure()}};
}

json report_json(const AssumptionReport& r) {
    return {{"holds", r.holds},
            {"worst_violation", r.worst_violation},
            {"violating_cells", r.violating_cells},
            {"margin", r.margin},
            {"tolerance", r.tolerance},
            {"cells_checked", r.cells_checked}};
}

json profile_json(const RadialProfile& p) {
    return {{"radii", p.radii}, {"means", p.means}, {"spreads", p.spreads}, {"counts", p.counts}};
}

json run_json(const OptimizationResult& r) {
    return {{"phi", r.phi},
            {"phi_history", r.phi_history},
            {"comonotone_violations", r.comonotone_violations},
            {"converged", r.converged},
            {"in_class", r.in_class},
            {"outer_iterations", r.outer_iterations},
            {"solves", r.solves},
            {"stop_reason", r.stop_reason},
            {"warnings", r.warnings}};
}

json checks_json(const std::vector<CheckResult>& checks) {
    json out = json::array();
    for (const auto& c : checks)
        out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return out;
}

const GeneratorSpec& two_material(const Context& ctx, const char* sub) {
    if (ctx.cfg.generator.kind != GeneratorSpec::Kind::two_material)
        throw ConfigError(std::string(sub) + " requires a two_material generator");
    return ctx.cfg.generator;
}

std::string sweep_table(const std::vector<SweepRecord>& records) {
    std::string t = "parameter,gamma_effective,psi,c_low,c_high,set_cells,converged,comonotone_violations\n";
    for (const auto& r : records)
        t += g17(r.parameter) + "," + g17(r.gamma_effective) + "," + g17(r.psi) + "," + g17(r.c_low) + "," +
             g17(r.c_high) + "," + std::to_string(r.set.size()) + "," + (r.converged ? "1" : "0") + "," +
             std::to_string(r.comonotone_violations) + "\n";
    return t;
}

json records_json(const std::vector<SweepRecord>& records) {
    json out = json::array();
    for (const auto& r : records)
        out.push_back({{"parameter", r.parameter},
                       {"gamma_effective", r.gamma_effective},
                       {"psi", r.psi},
                       {"c_low", r.c_low},
                       {"c_high", r.c_high},
                       {"set_cells", r.set.size()},
                       {"converged", r.converged},
                       {"comonotone_violations", r.comonotone_violations}});
    return out;
}

std::string indexed(const char* stem, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%02zu", stem, i);
    return buf;
}

// ---- subcommands ----

void do_solve(Context& ctx) {
    const ScalarField f = ctx.force();
    const ScalarField g = ctx.cfg.density ? build_field(ctx.domain, *ctx.cfg.density) : ScalarField::constant(ctx.domain, 0.0);
    const SolveResult r = solve_state(g, f, ctx.cfg.optimizer.solver);
    ctx.m["energy"] = r.energy;
    ctx.m["iterations"] = r.iterations;
    ctx.m["residual_norm"] = r.residual_norm;
    ctx.m["energy_identity_residual"] = energy_identity_residual(g, f, r.u);
    ctx.field("u", r.u);
}

void do_check(Context& ctx) {
    const ScalarField f = ctx.force();
    const AssumptionReport a1 = check_a1(f, ctx.cfg.optimizer.solver);
    ctx.m["a1"] = report_json(a1);
    ctx.m["a2"] = report_json(check_a2(f));
    ctx.m["a2_interior"] = report_json(check_a2(f, true));
    const SolveResult v = solve_poisson(f, ctx.cfg.optimizer.solver);
    ctx.m["max_vf"] = v.u.max();
    ctx.field("vf", v.u);
}

void do_optimize(Context& ctx, Mode mode) {
    const ScalarField f = ctx.force();
    const Generator gen = build_generator(ctx.domain, ctx.cfg.generator);
    OptimizeOptions opts = ctx.cfg.optimizer;
    opts.mode = mode;
    const OptimizationResult r = optimize(f, gen, opts);
    ctx.m["result"] = run_json(r);
    if (mode == Mode::maximize)
        ctx.m["result"]["anti_comonotone_violations"] = anti_comonotonicity_residual(r.g_opt, r.u_opt);
    if (ctx.domain->is_disk()) {
        ctx.m["radial_profile"] = {{"g", profile_json(radial_profile(r.g_opt, ctx.cfg.radial_bins))},
                                   {"u", profile_json(radial_profile(r.u_opt, ctx.cfg.radial_bins))}};
    }
    ctx.field("g", r.g_opt);
    ctx.field("u", r.u_opt);
    if (!r.converged)
        ctx.outcome.exit_code = kExitSolver;
}

void do_shape(Context& ctx) {
    const auto& spec = two_material(ctx, "shape");
    const ScalarField f = ctx.force();
    const ShapeResult r =
        minimize_shape(f, spec.alpha, spec.beta, resolve_gamma(*ctx.domain, spec), ctx.cfg.optimizer);
    ctx.m["shape"] = {{"k", r.k},
                      {"gamma_effective", r.gamma_effective},
                      {"psi", r.psi},
                      {"c", r.c},
                      {"threshold_low", r.threshold_low},
                      {"threshold_high", r.threshold_high},
                      {"cut_violations", r.cut_violations},
                      {"cut_inversion", r.cut_inversion},
                      {"set_cells", r.set.size()}};
    ctx.m["result"] = run_json(r.run);
    ctx.mask("mask", r.set);
    ctx.field("g", r.g);
    ctx.field("u", r.u);
    if (!r.run.converged)
        ctx.outcome.exit_code = kExitSolver;
}

void do_sweep_gamma(Context& ctx) {
    const auto& spec = two_material(ctx, "sweep-gamma");
    const auto& sw = ctx.cfg.sweep;
    std::vector<double> gammas = sw.gammas;
    for (double q : sw.gamma_fractions)
        gammas.push_back(q * ctx.domain->measure());
    if (gammas.size() < 2)
        throw ConfigError("sweep-gamma needs at least two entries in sweep.gammas or sweep.gamma_fractions");
    const ScalarField f = ctx.force();
    GammaSweepOptions gso;
    gso.derivative_tolerance = sw.derivative_tolerance;
    const SweepReport rep = sweep_gamma(f, spec.alpha, spec.beta, gammas, ctx.cfg.optimizer, gso);
    ctx.m["records"] = records_json(rep.records);
    ctx.m["checks"] = checks_json(rep.checks);
    ctx.m["derivative_errors"] = rep.derivative_errors;
    for (std::size_t i = 0; i < rep.records.size(); ++i) {
        ctx.mask(indexed("mask_gamma", i), rep.records[i].set);
        if (ctx.cfg.output.csv) {
            io::write_field_csv(rep.records[i].u, ctx.dir / (indexed("u_gamma", i) + ".csv"));
            ctx.outcome.artifacts.push_back(indexed("u_gamma", i) + ".csv");
        }
    }
    ctx.table("sweep.csv", sweep_table(rep.records));
    if (!rep.all_passed())
        ctx.outcome.exit_code = kExitCheck;
}

void do_sweep_alpha(Context& ctx) {
    const auto& spec = two_material(ctx, "sweep-alpha");
    const auto& sw = ctx.cfg.sweep;
    if (sw.alphas.size() < 2)
        throw ConfigError("sweep-alpha needs at least two entries in sweep.alphas");
    const ScalarField f = ctx.force();
    const StabilitySpec* stab = sw.stability ? &*sw.stability : nullptr;
    const AlphaSweepReport rep =
        sweep_alpha(f, sw.alphas, spec.beta, resolve_gamma(*ctx.domain, spec), ctx.cfg.optimizer, stab);
    ctx.m["records"] = records_json(rep.records);
    ctx.m["checks"] = checks_json(rep.checks);
    json st = json::array();
    std::string table = "gap,alpha,symmetric_difference,symmetric_difference_cells,psi_difference\n";
    for (const auto& s : rep.stability) {
        st.push_back({{"gap", s.gap},
                      {"alpha", s.alpha},
                      {"symmetric_difference", s.symmetric_difference},
                      {"symmetric_difference_cells", s.symmetric_difference_cells},
                      {"psi_difference", s.psi_difference}});
        table += g17(s.gap) + "," + g17(s.alpha) + "," + g17(s.symmetric_difference) + "," +
                 std::to_string(s.symmetric_difference_cells) + "," + g17(s.psi_difference) + "\n";
    }
    ctx.m["stability"] = st;
    for (std::size_t i = 0; i < rep.records.size(); ++i)
        ctx.mask(indexed("mask_alpha", i), rep.records[i].set);
    ctx.table("sweep.csv", sweep_table(rep.records));
    if (stab)
        ctx.table("stability.csv", table);
    if (!rep.all_passed())
        ctx.outcome.exit_code = kExitCheck;
}

void do_oracle(Context& ctx) {
    const auto& spec = two_material(ctx, "oracle");
    const ScalarField f = ctx.force();
    const std::size_t n = ctx.domain->size();
    if (n > kBruteForceLimit)
        throw ConfigError("oracle needs at most " + std::to_string(kBruteForceLimit) + " cells, domain has " +
                          std::to_string(n));
    std::vector<std::size_t> ks;
    if (spec.gamma || spec.gamma_fraction) {
        ks.push_back(cells_for_measure(*ctx.domain, resolve_gamma(*ctx.domain, spec)));
    } else {
        for (std::size_t k = 1; k < n; ++k)
            ks.push_back(k);
    }
    json cases = json::array();
    bool ok = true;
    std::string table = "k,psi,psi_brute_force,relative_error,same_set\n";
    for (std::size_t k : ks) {
        const ShapeResult r = minimize_shape_cells(f, spec.alpha, spec.beta, k, ctx.cfg.optimizer);
        const BruteForceResult b = brute_force_min(f, spec.alpha, spec.beta, k);
        const double rel = std::abs(r.psi - b.psi) / std::abs(b.psi);
        const bool same = r.set.cells == b.set.cells;
        ok = ok && rel <= 1e-9;
        cases.push_back({{"k", k}, {"psi", r.psi}, {"psi_brute_force", b.psi}, {"relative_error", rel},
                         {"same_set", same}, {"evaluated", b.evaluated}});
        table += std::to_string(k) + "," + g17(r.psi) + "," + g17(b.psi) + "," + g17(rel) + "," + (same ? "1" : "0") + "\n";
        if (ks.size() == 1)
            ctx.mask("mask", r.set);
    }
    ctx.m["cases"] = cases;
    ctx.m["checks"] = checks_json({{"energy matches brute force within 1e-9", ok, {}}});
    ctx.table("oracle.csv", table);
    if (!ok)
        ctx.outcome.exit_code = kExitCheck;
}

void do_multistart(Context& ctx) {
    const ScalarField f = ctx.force();
    const Generator gen = build_generator(ctx.domain, ctx.cfg.generator);
    OptimizeOptions opts = ctx.cfg.optimizer;
    if (!opts.seed)
        opts.seed = 1;
    const MultistartReport rep = multistart(f, gen, ctx.cfg.multistart_runs, opts);
    json runs = json::array();
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
        runs.push_back(run_json(rep.runs[i]));
        runs.back()["seed"] = *opts.seed + i;
        ctx.field(indexed("g_run", i), rep.runs[i].g_opt);
    }
    ctx.m["runs"] = runs;
    ctx.m["max_relative_phi_spread"] = rep.max_relative_phi_spread;
    ctx.m["max_l1_distance"] = rep.max_l1_distance;
    ctx.m["all_converged"] = rep.all_converged;
    const bool ok = rep.max_relative_phi_spread < ctx.cfg.multistart_tolerance;
    ctx.m["checks"] = checks_json({{"relative energy spread below tolerance", ok,
                                    "spread " + g17(rep.max_relative_phi_spread)}});
    if (!ok)
        ctx.outcome.exit_code = kExitCheck;
    else if (!rep.all_converged)
        ctx.outcome.exit_code = kExitSolver;
}

using Handler = std::function<void(Context&)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> table{
        {"solve", do_solve},
        {"check", do_check},
        {"minimize", [](Context& c) { do_optimize(c, Mode::minimize); }},
        {"maximize", [](Context& c) { do_optimize(c, Mode::maximize); }},
        {"shape", do_shape},
        {"sweep-gamma", do_sweep_gamma},
        {"sweep-alpha", do_sweep_alpha},
        {"oracle", do_oracle},
        {"multistart", do_multistart},
    };
    return table;
}

} // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [name, _] : handlers())
            v.push_back(name);
        return v;
    }();
    return names;
}

RunOutcome run(const RunRequest& request) {
    const auto it = handlers().find(request.subcommand);
    if (it == handlers().end())
        throw ConfigError("unknown subcommand '" + request.subcommand + "'");

    Context ctx(load_config(request.config));
    if (request.seed)
        ctx.cfg.optimizer.seed = request.seed;
    ctx.dir = request.out_dir ? *request.out_dir : ctx.cfg.output.dir;
    ctx.outcome.out_dir = ctx.dir;
    ctx.domain = build_domain(ctx.cfg.domain);
    std::filesystem::create_directories(ctx.dir);

    const std::string seed_text = ctx.cfg.optimizer.seed ? std::to_string(*ctx.cfg.optimizer.seed) : "none";
    auto& m = ctx.m;
    m["tool"] = "membrane-opt";
    m["version"] = kVersion;
    m["subcommand"] = request.subcommand;
    m["run_id"] = io::hex64(io::fnv1a(request.subcommand + "\n" + ctx.cfg.source.dump() + "\n" + seed_text));
    m["seed"] = ctx.cfg.optimizer.seed ? json(*ctx.cfg.optimizer.seed) : json(nullptr);
    m["config"] = ctx.cfg.source;
    m["domain"] = domain_json(*ctx.domain);

    it->second(ctx);

    m["exit_code"] = ctx.outcome.exit_code;
    if (ctx.cfg.output.json) {
        ctx.outcome.artifacts.push_back("manifest.json");
        m["artifacts"] = ctx.outcome.artifacts;
        m["created_utc"] = timestamp_utc();  // the only non-reproducible entry
        io::write_text(ctx.dir / "manifest.json", m.dump(2) + "\n");
    } else {
        m["artifacts"] = ctx.outcome.artifacts;
    }
    return ctx.outcome;
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const SolverError*>(&e))
        return kExitSolver;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const PreconditionError*>(&e))
        return kExitConfig;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e))
        return kExitConfig;
    return kExitSolver;
}

} // namespace membrane
