/* C interface to the membrane design library. All functions are thread-compatible;
   the last-error message is thread-local. Handles are opaque and owned by the caller. */
#ifndef MEMBRANE_MEMBRANE_H
#define MEMBRANE_MEMBRANE_H

#include <stddef.h>
#include <stdint.h>

#if defined(MEMBRANE_BUILDING_LIBRARY)
#define MEMBRANE_API __attribute__((visibility("default")))
#else
#define MEMBRANE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum membrane_status {
    MEMBRANE_OK = 0,
    MEMBRANE_ERR_INVALID_ARGUMENT = 1, /* null handle, bad length, precondition violated */
    MEMBRANE_ERR_CONFIG = 2,           /* bad configuration file or contents */
    MEMBRANE_ERR_SOLVER = 3,           /* linear solver or optimizer failure */
    MEMBRANE_ERR_CHECK = 4,            /* a theorem check failed (run only) */
    MEMBRANE_ERR_INTERNAL = 5
} membrane_status;

typedef struct membrane_domain membrane_domain;
typedef struct membrane_field membrane_field;
typedef struct membrane_shape membrane_shape;

MEMBRANE_API const char* membrane_version(void);
/* Message for the most recent failure on this thread; empty after success. */
MEMBRANE_API const char* membrane_last_error(void);

/* Domains. target_area <= 0 keeps the natural size. */
MEMBRANE_API membrane_status membrane_domain_rectangle(double width, double height, int resolution,
                                                       membrane_domain** out);
MEMBRANE_API membrane_status membrane_domain_disk(double radius, int resolution, membrane_domain** out);
MEMBRANE_API membrane_status membrane_domain_dumbbell(double lobe_radius, double neck_length, double neck_halfwidth,
                                                      int resolution, double target_area, membrane_domain** out);
MEMBRANE_API void membrane_domain_free(membrane_domain* d);
MEMBRANE_API size_t membrane_domain_cell_count(const membrane_domain* d);
MEMBRANE_API double membrane_domain_spacing(const membrane_domain* d);
MEMBRANE_API double membrane_domain_measure(const membrane_domain* d);
/* Centroid of interior cell `cell` in domain order. */
MEMBRANE_API membrane_status membrane_domain_centroid(const membrane_domain* d, size_t cell, double* x, double* y);

/* Fields: one value per interior cell. */
MEMBRANE_API membrane_status membrane_field_create(const membrane_domain* d, const double* values, size_t count,
                                                   membrane_field** out);
MEMBRANE_API void membrane_field_free(membrane_field* f);
MEMBRANE_API size_t membrane_field_size(const membrane_field* f);
MEMBRANE_API membrane_status membrane_field_values(const membrane_field* f, double* out, size_t count);

/* Solves (-Lap + g) u = f. `u_out` and `energy` may be null. tol <= 0 uses the default. */
MEMBRANE_API membrane_status membrane_solve_state(const membrane_field* g, const membrane_field* f, double tol,
                                                  membrane_field** u_out, double* energy);

/* Two-material problem: alpha on a set of measure gamma, beta elsewhere. */
MEMBRANE_API membrane_status membrane_minimize_shape(const membrane_field* f, double alpha, double beta, double gamma,
                                                     membrane_shape** out);
MEMBRANE_API void membrane_shape_free(membrane_shape* s);
MEMBRANE_API double membrane_shape_psi(const membrane_shape* s);
MEMBRANE_API double membrane_shape_threshold(const membrane_shape* s, double* low, double* high);
MEMBRANE_API size_t membrane_shape_cell_count(const membrane_shape* s);
/* Copies the set's cell indices (ascending) into `out`, which holds `count` entries. */
MEMBRANE_API membrane_status membrane_shape_cells(const membrane_shape* s, size_t* out, size_t count);
MEMBRANE_API size_t membrane_shape_comonotone_violations(const membrane_shape* s);

/* Runs a CLI subcommand. out_dir and seed may be null. The return value is
   the process exit status: 0, 2 (config), 3 (solver), 4 (check failure). */
MEMBRANE_API int membrane_run(const char* subcommand, const char* config_path, const char* out_dir,
                              const uint64_t* seed);
/* Space-separated list of subcommands. */
MEMBRANE_API const char* membrane_subcommands(void);

#ifdef __cplusplus
}
#endif

#endif
