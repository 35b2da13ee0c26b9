#ifndef MM_REDUCE_H
#define MM_REDUCE_H

/* Generated by cbindgen from mm-reduce-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes: 0 success, 1 validation failure, 2 bad call
 * (null/invalid argument at the boundary), 3 numerical failure.
 */
typedef enum MmrStatus {
  MMR_STATUS_OK = 0,
  MMR_STATUS_VALIDATION = 1,
  MMR_STATUS_BAD_CALL = 2,
  MMR_STATUS_NUMERICAL = 3,
} MmrStatus;

/**
 * Opaque interpolation-design handle (generator + filter pair).
 */
typedef struct MmrDesign MmrDesign;

/**
 * Opaque reduced-model handle.
 */
typedef struct MmrRom MmrRom;

/**
 * Opaque full-order model handle.
 */
typedef struct MmrSystem MmrSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Valid until the
 * next failing call on the same thread; never null.
 */
const char *mmr_last_error_message(void);

/**
 * Build a full-order model from row-major A (n*n), B (n*m), C (p*n).
 *
 * # Safety
 * `a`, `b`, `c` must point to arrays of the stated lengths; `out` must
 * be a valid pointer.
 */
enum MmrStatus mmr_system_new(uintptr_t n,
                              uintptr_t m,
                              uintptr_t p,
                              const double *a,
                              const double *b,
                              const double *c,
                              struct MmrSystem **out);

/**
 * Load a full-order model from a matrix-container file (A, B, C).
 *
 * # Safety
 * `path` must be a valid C string; `out` must be a valid pointer.
 */
enum MmrStatus mmr_system_load(const char *path, struct MmrSystem **out);

/**
 * # Safety
 * `sys` must be a handle from this library or null (no-op).
 */
void mmr_system_free(struct MmrSystem *sys);

/**
 * # Safety
 * `sys` must be a live handle; `n`, `m`, `p` may be null to skip.
 */
enum MmrStatus mmr_system_dims(const struct MmrSystem *sys,
                               uintptr_t *n,
                               uintptr_t *m,
                               uintptr_t *p);

/**
 * Load and validate a JSON design file (rank and disjointness checks).
 *
 * # Safety
 * `path` must be a valid C string; `out` must be a valid pointer.
 */
enum MmrStatus mmr_design_load(const char *path, struct MmrDesign **out);

/**
 * # Safety
 * `design` must be a handle from this library or null (no-op).
 */
void mmr_design_free(struct MmrDesign *design);

/**
 * Reduced orders claimed on each side.
 *
 * # Safety
 * `design` must be a live handle; out-parameters may be null to skip.
 */
enum MmrStatus mmr_design_orders(const struct MmrDesign *design,
                                 uintptr_t *nu_right,
                                 uintptr_t *nu_left);

/**
 * Run the data-driven pipeline end to end: simulate both
 * interconnections over `[0, duration]` at step `dt`, estimate the
 * reduced quantities after discarding `warmup` seconds, and assemble
 * the two-sided reduced model. `q_tilde` is the robust estimation
 * window (1 = single snapshot).
 *
 * # Safety
 * `sys` and `design` must be live handles; `out` must be valid.
 */
enum MmrStatus mmr_reduce(const struct MmrSystem *sys,
                          const struct MmrDesign *design,
                          double dt,
                          double duration,
                          double warmup,
                          uintptr_t q_tilde,
                          struct MmrRom **out);

/**
 * # Safety
 * `rom` must be a handle from this library or null (no-op).
 */
void mmr_rom_free(struct MmrRom *rom);

/**
 * Reduced order and input/output counts.
 *
 * # Safety
 * `rom` must be a live handle; out-parameters may be null to skip.
 */
enum MmrStatus mmr_rom_dims(const struct MmrRom *rom, uintptr_t *nu, uintptr_t *m, uintptr_t *p);

/**
 * Copy F (nu*nu), G (nu*m), H (p*nu) row-major into caller buffers.
 * Any pointer may be null to skip that matrix (pass 0 for its length).
 *
 * # Safety
 * Non-null buffers must have the stated lengths.
 */
enum MmrStatus mmr_rom_matrices(const struct MmrRom *rom,
                                double *f,
                                uintptr_t f_len,
                                double *g,
                                uintptr_t g_len,
                                double *h,
                                uintptr_t h_len);

/**
 * Save the reduced model (matrix container plus JSON sidecar).
 *
 * # Safety
 * `rom` must be a live handle; `path` a valid C string.
 */
enum MmrStatus mmr_rom_save(const struct MmrRom *rom, const char *path);

/**
 * Load a reduced model saved by `mmr_rom_save`.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be valid.
 */
enum MmrStatus mmr_rom_load(const char *path, struct MmrRom **out);

/**
 * Check the reduced model's claimed interpolation conditions against
 * the full model. Writes the worst claimed relative error and a 0/1
 * pass flag; returns `MMR_STATUS_VALIDATION` when the check fails.
 *
 * # Safety
 * Handles must be live; out-parameters may be null to skip.
 */
enum MmrStatus mmr_verify(const struct MmrRom *rom,
                          const struct MmrSystem *sys,
                          const struct MmrDesign *design,
                          double tol,
                          double *worst_rel_error,
                          int32_t *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MM_REDUCE_H */
