#ifndef NMF_SUBSPACE_H
#define NMF_SUBSPACE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NmfStatus {
  NMF_STATUS_OK = 0,
  NMF_STATUS_NULL_POINTER = 1,
  NMF_STATUS_DIMENSION = 2,
  NMF_STATUS_PARAMETER = 3,
  NMF_STATUS_NEGATIVE = 4,
  NMF_STATUS_DATA = 5,
  NMF_STATUS_DEGENERATE = 6,
  NMF_STATUS_IO = 7,
  NMF_STATUS_PANIC = 8,
} NmfStatus;

/**
 * Opaque set of observed `(row, col)` positions.
 */
typedef struct NmfMask NmfMask;

/**
 * Opaque row-major matrix.
 */
typedef struct NmfMatrix NmfMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *nmf_last_error_message(void);

/**
 * Copies `rows * cols` row-major values into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles; `out` must be writable.
 */
enum NmfStatus nmf_matrix_new(size_t rows, size_t cols, const double *data, struct NmfMatrix **out);

/**
 * # Safety
 * `m` must come from this library and not be freed twice. Null is ignored.
 */
void nmf_matrix_free(struct NmfMatrix *m);

/**
 * Row count, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t nmf_matrix_rows(const struct NmfMatrix *m);

/**
 * Column count, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t nmf_matrix_cols(const struct NmfMatrix *m);

/**
 * Copies the row-major data into `out`, which must hold exactly
 * `rows * cols` values.
 *
 * # Safety
 * `m` must be a live handle and `out` must point to `len` writable doubles.
 */
enum NmfStatus nmf_matrix_copy_data(const struct NmfMatrix *m, double *out, size_t len);

/**
 * Mask from `count` pairs stored as `coords[2i] = row, coords[2i + 1] = col`.
 *
 * # Safety
 * `coords` must point to `2 * count` readable values; `out` must be writable.
 */
enum NmfStatus nmf_mask_new(size_t rows,
                            size_t cols,
                            const size_t *coords,
                            size_t count,
                            struct NmfMask **out);

/**
 * Each position observed independently with probability `p`.
 *
 * # Safety
 * `out` must be writable.
 */
enum NmfStatus nmf_mask_bernoulli(size_t rows,
                                  size_t cols,
                                  double p,
                                  uint64_t seed,
                                  struct NmfMask **out);

/**
 * # Safety
 * `m` must come from this library and not be freed twice. Null is ignored.
 */
void nmf_mask_free(struct NmfMask *m);

/**
 * Number of observed positions, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t nmf_mask_len(const struct NmfMask *m);

/**
 * `‖estimate − truth‖_F / ‖truth‖_F`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NmfStatus nmf_relative_error(const struct NmfMatrix *estimate,
                                  const struct NmfMatrix *truth,
                                  double *out);

/**
 * Correlation of the row spans of two nonnegative full-row-rank bases.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NmfStatus nmf_correlation_measure(const struct NmfMatrix *u_basis,
                                       const struct NmfMatrix *v_basis,
                                       double *out);

/**
 * `x ≈ W H` with `r` topics after `iters` multiplicative updates.
 *
 * # Safety
 * `x` must be live; `w_out` and `h_out` must be writable. The returned
 * handles are owned by the caller.
 */
enum NmfStatus nmf_factorize_matrix(const struct NmfMatrix *x,
                                    size_t r,
                                    size_t iters,
                                    uint64_t seed,
                                    struct NmfMatrix **w_out,
                                    struct NmfMatrix **h_out);

/**
 * Rank-`r` completion from the entries of `observed` on `mask`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum NmfStatus nmf_basic_completion(const struct NmfMatrix *observed,
                                    const struct NmfMask *mask,
                                    size_t r,
                                    size_t iters,
                                    uint64_t seed,
                                    struct NmfMatrix **out);

/**
 * Clusters the rows of `x` into `k` groups through a rank-`r` NMF.
 *
 * # Safety
 * `x` must be live; `labels_out` must point to `labels_len` writable slots
 * and `labels_len` must equal the row count.
 */
enum NmfStatus nmf_cluster(const struct NmfMatrix *x,
                           size_t r,
                           size_t k,
                           size_t iters,
                           uint64_t seed,
                           size_t *labels_out,
                           size_t labels_len);

/**
 * Block completion: whole-matrix completion at rank `r_full`, clustering
 * into `k` groups, then rank-`r_block` completion of each group. Clusters
 * too sparse to complete keep the whole-matrix rows.
 *
 * # Safety
 * Handles must be live; `completed_out` must be writable; `labels_out`
 * must point to `labels_len` writable slots (the row count).
 */
enum NmfStatus nmf_block_completion(const struct NmfMatrix *observed,
                                    const struct NmfMask *mask,
                                    size_t r_full,
                                    size_t r_block,
                                    size_t k,
                                    size_t iters,
                                    uint64_t seed,
                                    struct NmfMatrix **completed_out,
                                    size_t *labels_out,
                                    size_t labels_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NMF_SUBSPACE_H */
