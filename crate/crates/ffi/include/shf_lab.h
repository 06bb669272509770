#ifndef SHF_LAB_H
#define SHF_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShfStatus {
  SHF_STATUS_OK = 0,
  SHF_STATUS_DOMAIN = 1,
  SHF_STATUS_NUMERICAL = 2,
  SHF_STATUS_GRAPH = 3,
  SHF_STATUS_TOO_LARGE = 4,
  SHF_STATUS_RESOURCE = 5,
  SHF_STATUS_IO = 6,
  SHF_STATUS_NULL_POINTER = 7,
  SHF_STATUS_INVALID_ARGUMENT = 8,
  SHF_STATUS_PANIC = 9,
} ShfStatus;

// Evaluator of `G_θ` and its primitive at a fixed `θ`.
typedef struct ShfDickman ShfDickman;

// Weighted graph with an optional boundary set.
typedef struct ShfGraph ShfGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library, static and NUL-terminated.
const char *shf_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t shf_last_error_message(char *buf, size_t len);

// Creates an edgeless graph on `vertex_count` vertices.
//
// # Safety
// `graph` must be a valid pointer to writable storage for a handle.
enum ShfStatus shf_graph_new(size_t vertex_count, struct ShfGraph **graph);

// Builds a graph from its JSON form `{"n": .., "edges": [[u, v, c], ..]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `graph` writable.
enum ShfStatus shf_graph_from_json(const char *json, struct ShfGraph **graph);

// Releases a graph; null is ignored.
//
// # Safety
// `graph` must come from this library and not be used afterwards.
void shf_graph_free(struct ShfGraph *graph);

// Adds conductance `c > 0` between `u` and `v`; parallel edges add up.
//
// # Safety
// `graph` must be a live handle.
enum ShfStatus shf_graph_add_edge(struct ShfGraph *graph, size_t u, size_t v, double c);

// # Safety
// `graph` must be a live handle and `boundary` point to `len` indices.
enum ShfStatus shf_graph_set_boundary(struct ShfGraph *graph, const size_t *boundary, size_t len);

// Log-determinant of the Laplacian with the `pinned` vertices removed.
//
// # Safety
// `graph` must be a live handle, `pinned` point to `len` indices and
// `log_det` be writable.
enum ShfStatus shf_graph_reduced_log_det(const struct ShfGraph *graph,
                                         const size_t *pinned,
                                         size_t len,
                                         double *log_det);

// Log partition function of the planar GFF with the `pinned` vertices at 0.
//
// # Safety
// As for [`shf_graph_reduced_log_det`].
enum ShfStatus shf_graph_gff_log_partition(const struct ShfGraph *graph,
                                           const size_t *pinned,
                                           size_t len,
                                           double *log_partition);

// Weighted spanning-tree sum by exhaustive enumeration (small graphs only).
//
// # Safety
// `graph` must be a live handle and `sum` writable.
enum ShfStatus shf_graph_spanning_tree_sum(const struct ShfGraph *graph, double *sum);

// Creates an evaluator of `G_θ`; `rel_tol ≤ 0` selects the default.
//
// # Safety
// `dickman` must be writable.
enum ShfStatus shf_dickman_new(double theta, double rel_tol, struct ShfDickman **dickman);

// # Safety
// `dickman` must come from this library and not be used afterwards.
void shf_dickman_free(struct ShfDickman *dickman);

// `G_θ(t)` for `t ∈ (0, 1]`.
//
// # Safety
// `dickman` must be a live handle and `value` writable.
enum ShfStatus shf_dickman_density(const struct ShfDickman *dickman, double t, double *value);

// `∫_0^t G_θ` for `t ∈ (0, 1]`.
//
// # Safety
// As for [`shf_dickman_density`].
enum ShfStatus shf_dickman_integral(const struct ShfDickman *dickman, double t, double *value);

// Truncated moment `E[Z(g_1)^h]` with its standard error.
//
// # Safety
// `value` and `std_error` must be writable.
enum ShfStatus shf_moment_gaussian(size_t h,
                                   double theta,
                                   size_t m_max,
                                   size_t samples,
                                   uint64_t seed,
                                   double *value,
                                   double *std_error);

// Expected collision count `R_N` of two walks up to time `n`.
//
// # Safety
// `value` must be writable.
enum ShfStatus shf_compute_r_n(uint64_t n, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHF_LAB_H */
