#include "membrane/membrane.h"

#include "membrane/domain.hpp"
#include "membrane/errors.hpp"
#include "membrane/fields.hpp"
#include "membrane/optimize.hpp"
#include "membrane/pde.hpp"
#include "membrane/runner.hpp"

#include <cstring>
#include <string>

struct membrane_domain {
    membrane::DomainPtr ptr;
};
struct membrane_field {
    membrane::ScalarField field;
};
struct membrane_shape {
    membrane::ShapeResult result;
};

namespace {

thread_local std::string g_last_error;

membrane_status fail(membrane_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

membrane_status status_for(const std::exception& e) {
    using namespace membrane;
    if (dynamic_cast<const SolverError*>(&e))
        return MEMBRANE_ERR_SOLVER;
    if (dynamic_cast<const ConfigError*>(&e))
        return MEMBRANE_ERR_CONFIG;
    if (dynamic_cast<const std::invalid_argument*>(&e))
        return MEMBRANE_ERR_INVALID_ARGUMENT;
    return MEMBRANE_ERR_INTERNAL;
}

// Runs fn, translating exceptions to status codes.
template <class Fn>
membrane_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MEMBRANE_OK;
    } catch (const std::exception& e) {
        return fail(status_for(e), e.what());
    } catch (...) {
        return fail(MEMBRANE_ERR_INTERNAL, "unknown error");
    }
}

membrane_status make_domain(const membrane::DomainSpec& spec, membrane_domain** out) {
    if (!out)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null output pointer");
    *out = nullptr;
    return guarded([&] { *out = new membrane_domain{membrane::build_domain(spec)}; });
}

} // namespace

extern "C" {

const char* membrane_version(void) { return "0.1.0"; }

const char* membrane_last_error(void) { return g_last_error.c_str(); }

membrane_status membrane_domain_rectangle(double width, double height, int resolution, membrane_domain** out) {
    return make_domain({membrane::Rectangle{width, height}, resolution, std::nullopt}, out);
}

membrane_status membrane_domain_disk(double radius, int resolution, membrane_domain** out) {
    return make_domain({membrane::Disk{radius}, resolution, std::nullopt}, out);
}

membrane_status membrane_domain_dumbbell(double lobe_radius, double neck_length, double neck_halfwidth, int resolution,
                                         double target_area, membrane_domain** out) {
    membrane::DomainSpec spec{membrane::Dumbbell{lobe_radius, neck_length, neck_halfwidth}, resolution, std::nullopt};
    if (target_area > 0.0)
        spec.target_area = target_area;
    return make_domain(spec, out);
}

void membrane_domain_free(membrane_domain* d) { delete d; }

size_t membrane_domain_cell_count(const membrane_domain* d) { return d ? d->ptr->size() : 0; }

double membrane_domain_spacing(const membrane_domain* d) { return d ? d->ptr->spacing() : 0.0; }

double membrane_domain_measure(const membrane_domain* d) { return d ? d->ptr->measure() : 0.0; }

membrane_status membrane_domain_centroid(const membrane_domain* d, size_t cell, double* x, double* y) {
    if (!d || !x || !y)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null argument");
    if (cell >= d->ptr->size())
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "cell index out of range");
    const auto p = d->ptr->centroid(cell);
    *x = p.x;
    *y = p.y;
    g_last_error.clear();
    return MEMBRANE_OK;
}

membrane_status membrane_field_create(const membrane_domain* d, const double* values, size_t count,
                                      membrane_field** out) {
    if (!d || !values || !out)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        *out = new membrane_field{membrane::ScalarField(d->ptr, std::vector<double>(values, values + count))};
    });
}

void membrane_field_free(membrane_field* f) { delete f; }

size_t membrane_field_size(const membrane_field* f) { return f ? f->field.size() : 0; }

membrane_status membrane_field_values(const membrane_field* f, double* out, size_t count) {
    if (!f || !out)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null argument");
    if (count != f->field.size())
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "buffer length does not match the field");
    std::memcpy(out, f->field.values().data(), count * sizeof(double));
    g_last_error.clear();
    return MEMBRANE_OK;
}

membrane_status membrane_solve_state(const membrane_field* g, const membrane_field* f, double tol,
                                     membrane_field** u_out, double* energy) {
    if (!g || !f)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null field");
    if (u_out)
        *u_out = nullptr;
    return guarded([&] {
        membrane::SolveOptions so;
        if (tol > 0.0)
            so.tol = tol;
        auto r = membrane::solve_state(g->field, f->field, so);
        if (energy)
            *energy = r.energy;
        if (u_out)
            *u_out = new membrane_field{std::move(r.u)};
    });
}

membrane_status membrane_minimize_shape(const membrane_field* f, double alpha, double beta, double gamma,
                                        membrane_shape** out) {
    if (!f || !out)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new membrane_shape{membrane::minimize_shape(f->field, alpha, beta, gamma)}; });
}

void membrane_shape_free(membrane_shape* s) { delete s; }

double membrane_shape_psi(const membrane_shape* s) { return s ? s->result.psi : 0.0; }

double membrane_shape_threshold(const membrane_shape* s, double* low, double* high) {
    if (!s)
        return 0.0;
    if (low)
        *low = s->result.threshold_low;
    if (high)
        *high = s->result.threshold_high;
    return s->result.c;
}

size_t membrane_shape_cell_count(const membrane_shape* s) { return s ? s->result.set.size() : 0; }

membrane_status membrane_shape_cells(const membrane_shape* s, size_t* out, size_t count) {
    if (!s || !out)
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "null argument");
    if (count != s->result.set.size())
        return fail(MEMBRANE_ERR_INVALID_ARGUMENT, "buffer length does not match the set");
    std::copy(s->result.set.cells.begin(), s->result.set.cells.end(), out);
    g_last_error.clear();
    return MEMBRANE_OK;
}

size_t membrane_shape_comonotone_violations(const membrane_shape* s) {
    return s ? s->result.cut_violations : 0;
}

int membrane_run(const char* subcommand, const char* config_path, const char* out_dir, const uint64_t* seed) {
    if (!subcommand || !config_path) {
        fail(MEMBRANE_ERR_INVALID_ARGUMENT, "subcommand and config path are required");
        return membrane::kExitConfig;
    }
    try {
        membrane::RunRequest req{subcommand, config_path, std::nullopt, std::nullopt};
        if (out_dir)
            req.out_dir = out_dir;
        if (seed)
            req.seed = *seed;
        const auto outcome = membrane::run(req);
        g_last_error.clear();
        if (outcome.exit_code == membrane::kExitCheck)
            g_last_error = "one or more theorem checks failed; see the manifest";
        else if (outcome.exit_code == membrane::kExitSolver)
            g_last_error = "optimizer did not converge; see the manifest";
        return outcome.exit_code;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return membrane::exit_code_for(e);
    } catch (...) {
        g_last_error = "unknown error";
        return membrane::kExitSolver;
    }
}

const char* membrane_subcommands(void) {
    static const std::string list = [] {
        std::string s;
        for (const auto& name : membrane::subcommands())
            s += (s.empty() ? "" : " ") + name;
        return s;
    }();
    return list.c_str();
}

} // extern "C"
