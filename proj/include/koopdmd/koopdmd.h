/* SPDX-License-Identifier: Apache-2.0 */

/*
 * C interface to the koopdmd engine.
 *
 * Every object is an opaque handle released with its *_free function.
 * Functions return a kd_status; on failure kd_last_error() describes the
 * problem for the calling thread until its next failing call. Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with kd_string_free.
 */

#ifndef KOOPDMD_H
#define KOOPDMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(KD_BUILDING_LIBRARY)
#define KD_API __attribute__((visibility("default")))
#else
#define KD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kd_status {
  KD_OK = 0,
  KD_ERR_DIMENSION = 1,
  KD_ERR_DOMAIN = 2,
  KD_ERR_CONVERGENCE = 3,
  KD_ERR_INSUFFICIENT_DATA = 4,
  KD_ERR_DEGENERATE_DATA = 5,
  KD_ERR_ILL_CONDITIONED = 6,
  KD_ERR_SINGULAR_LOG = 7,
  KD_ERR_STEP_SIZE = 8,
  KD_ERR_IO = 9,
  KD_ERR_FORMAT = 10,
  KD_ERR_USAGE = 11,
  KD_ERR_PROTOCOL = 12,
  KD_ERR_INVALID_ARGUMENT = 13,
  KD_ERR_INTERNAL = 14
} kd_status;

typedef enum kd_rank_kind { KD_RANK_ENERGY = 0, KD_RANK_FIXED = 1 } kd_rank_kind;

typedef struct kd_mesh kd_mesh;
typedef struct kd_config kd_config;
typedef struct kd_snapshots kd_snapshots;
typedef struct kd_model kd_model;
typedef struct kd_session kd_session;
typedef struct kd_server kd_server;

KD_API const char* kd_version(void);
KD_API const char* kd_last_error(void);
KD_API const char* kd_status_string(kd_status status);
KD_API void kd_string_free(char* s);

/* Meshes: vertex, spring, fixed-vertex, mass and chamber records. */
KD_API kd_status kd_mesh_load(const char* path, kd_mesh** out);
KD_API kd_status kd_mesh_save(const kd_mesh* mesh, const char* path);
KD_API kd_status kd_mesh_set_linear(kd_mesh* mesh, int linear);
KD_API kd_status kd_mesh_set_gravity(kd_mesh* mesh, double gx, double gy, double gz);
KD_API size_t kd_mesh_vertex_count(const kd_mesh* mesh);
KD_API size_t kd_mesh_chamber_count(const kd_mesh* mesh);
/* Copies the n vertex masses into `masses`. */
KD_API kd_status kd_mesh_masses(const kd_mesh* mesh, double* masses, size_t n);
KD_API void kd_mesh_free(kd_mesh* mesh);

/* Run configurations (JSON). */
KD_API kd_status kd_config_load(const char* path, kd_config** out);
KD_API kd_status kd_config_set_seed(kd_config* config, uint64_t seed);
/* Writes the effective configuration as JSON. */
KD_API kd_status kd_config_to_json(const kd_config* config, char** json_out);
KD_API void kd_config_free(kd_config* config);

/* Snapshot sets. A frame is a lifted state of 6n doubles. */
KD_API kd_status kd_generate_snapshots(const kd_config* config, kd_snapshots** out);
KD_API kd_status kd_snapshots_load(const char* path, kd_snapshots** out);
KD_API kd_status kd_snapshots_save(const kd_snapshots* snaps, const char* path);
KD_API size_t kd_snapshots_frame_count(const kd_snapshots* snaps);
KD_API size_t kd_snapshots_dim(const kd_snapshots* snaps);
KD_API double kd_snapshots_h(const kd_snapshots* snaps);
KD_API kd_status kd_snapshots_frame(const kd_snapshots* snaps, size_t index, double* out, size_t dim);
KD_API void kd_snapshots_free(kd_snapshots* snaps);

/* Fitting. `report_json` (optional) receives the machine-readable fit report. */
KD_API kd_status kd_fit(const kd_snapshots* snaps, kd_rank_kind kind, double energy, size_t fixed_rank, int clamp,
                        kd_model** out, char** report_json);

/* Models. Derived models are new handles; the source is unchanged. */
KD_API kd_status kd_model_load(const char* path, kd_model** out);
KD_API kd_status kd_model_save(const kd_model* model, const char* path);
KD_API size_t kd_model_dim(const kd_model* model);
KD_API size_t kd_model_rank(const kd_model* model);
KD_API double kd_model_h(const kd_model* model);
/* Copies r eigenvalues as interleaved (re, im) pairs into `out` of length 2r. */
KD_API kd_status kd_model_eigenvalues(const kd_model* model, double* out, size_t len);
KD_API kd_status kd_model_rescale(const kd_model* model, double h_new, kd_model** out);
KD_API kd_status kd_model_damp(const kd_model* model, double mu, kd_model** out);
KD_API void kd_model_free(kd_model* model);

/* Stepping on lifted states of length dim; `out` may alias `x`. */
KD_API kd_status kd_step(const kd_model* model, const double* x, double* out, size_t dim);
KD_API kd_status kd_multi_step(const kd_model* model, const double* x, uint64_t n, double* out, size_t dim);
KD_API kd_status kd_real_multi_step(const kd_model* model, const double* x, uint64_t n, double* out, size_t dim);

/* Kinetic energy of a lifted state; `masses` of length dim/6, or NULL for unit masses. */
KD_API kd_status kd_kinetic_energy(const double* x, size_t dim, const double* masses, double h, double* out);

/* Advances a lifted state `steps` implicit Euler steps of the full-space simulator. */
KD_API kd_status kd_refsim_advance(const kd_mesh* mesh, const double* x, double h, uint64_t steps, double* out,
                                   size_t dim);

/*
 * Control. `problem_json` holds {"targets": [{"vertex": i, "displacement": [x,y,z]}],
 * "horizon": N, "iterations": 5, "momentum_weight": 1.0, "replay_steps": N}.
 * The result JSON carries pressures, per-iteration goal errors and residuals,
 * and the full-space replay's per-frame percentage MSE.
 */
KD_API kd_status kd_control_run(const kd_model* model, const kd_mesh* mesh, const char* problem_json,
                                char** result_json);

/* Interactive sessions. `replies_json` receives a JSON array of reply messages. */
KD_API kd_status kd_session_new(const char* default_model, const char* default_mesh, kd_session** out);
KD_API kd_status kd_session_handle(kd_session* session, const char* message_json, char** replies_json);
KD_API void kd_session_free(kd_session* session);

/* Session server over length-prefixed JSON frames. Port 0 picks a free port. */
KD_API kd_status kd_server_start(const char* host, uint16_t port, const char* default_model, const char* default_mesh,
                                 kd_server** out, uint16_t* bound_port);
KD_API kd_status kd_server_wait(kd_server* server);
KD_API kd_status kd_server_stop(kd_server* server);
KD_API void kd_server_free(kd_server* server);

#ifdef __cplusplus
}
#endif

#endif
