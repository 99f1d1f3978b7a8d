#ifndef LDP_H
#define LDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum LdpStatus {
  LDP_STATUS_OK = 0,
  LDP_STATUS_NULL_POINTER = 1,
  LDP_STATUS_INVALID_UTF8 = 2,
  LDP_STATUS_DIMENSION_MISMATCH = 3,
  LDP_STATUS_UNKNOWN_FAMILY = 10,
  LDP_STATUS_INVALID_PARAMETER = 11,
  LDP_STATUS_DOMAIN_VIOLATION = 12,
  LDP_STATUS_NON_CONVERGENCE = 13,
  LDP_STATUS_UNSUPPORTED_TAIL = 14,
  LDP_STATUS_BELOW_RANGE = 15,
  LDP_STATUS_ASYMMETRIC_KERNEL = 16,
  LDP_STATUS_MAJORIZATION_UNAVAILABLE = 17,
  LDP_STATUS_CFL_VIOLATION = 18,
  LDP_STATUS_TRUNCATION_TOO_SMALL = 19,
  LDP_STATUS_GRID_MISMATCH = 20,
  LDP_STATUS_INSUFFICIENT_DATA = 21,
  LDP_STATUS_SATURATED = 22,
  LDP_STATUS_COMPARISON_VIOLATED = 23,
  LDP_STATUS_MISSING_COLUMN = 24,
  LDP_STATUS_EMPTY_TABLE = 25,
  LDP_STATUS_IO = 26,
  LDP_STATUS_JSON = 27,
  LDP_STATUS_PANIC = 99,
} LdpStatus;

// Opaque Hamiltonian handle; also evaluates its conjugate.
typedef struct LdpHamiltonian LdpHamiltonian;

// Opaque kernel handle.
typedef struct LdpKernel LdpKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *ldp_last_error(void);

// Library version as a static NUL-terminated string.
const char *ldp_version(void);

// Builds a kernel from a JSON spec such as
// `{"family": "compact_uniform", "params": {"rho": 1}}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum LdpStatus ldp_kernel_from_json(const char *json, struct LdpKernel **out);

// # Safety
// `k` must come from [`ldp_kernel_from_json`] and not be used afterwards. NULL is ignored.
void ldp_kernel_free(struct LdpKernel *k);

// Space dimension of the kernel, 0 for NULL.
//
// # Safety
// `k` must be NULL or a live kernel handle.
size_t ldp_kernel_dimension(const struct LdpKernel *k);

// `K⁻¹(z)` for a symmetric kernel.
//
// # Safety
// `k` must be a live kernel handle; `out` must be writable.
enum LdpStatus ldp_k_inverse(const struct LdpKernel *k, double z, double *out);

// Predicted exponent `−ln sup_{|x| ≤ θR} |u − u_R|` at horizon `t`.
//
// # Safety
// `k` must be a live kernel handle; `out` must be writable.
enum LdpStatus ldp_predicted_log_bound(const struct LdpKernel *k,
                                       double r,
                                       double theta,
                                       double t,
                                       double *out);

// Pure-jump Hamiltonian of `k`. The kernel handle may be freed afterwards.
//
// # Safety
// `k` must be a live kernel handle; `out` must be writable.
enum LdpStatus ldp_hamiltonian_new(const struct LdpKernel *k,
                                   bool compensated,
                                   struct LdpHamiltonian **out);

// # Safety
// `h` must come from [`ldp_hamiltonian_new`] and not be used afterwards. NULL is ignored.
void ldp_hamiltonian_free(struct LdpHamiltonian *h);

// `H(p)`.
//
// # Safety
// `h` live; `p` points to `dim` doubles; `out` writable.
enum LdpStatus ldp_hamiltonian_value(const struct LdpHamiltonian *h,
                                     const double *p,
                                     size_t dim,
                                     double *out);

// `DH(p)`, written to `grad[0..dim]`.
//
// # Safety
// `h` live; `p` and `grad` point to `dim` doubles.
enum LdpStatus ldp_hamiltonian_gradient(const struct LdpHamiltonian *h,
                                        const double *p,
                                        size_t dim,
                                        double *grad);

// `L(q) = sup_p (p·q − H(p))`. When `argmax` is not NULL the maximizer
// is written to `argmax[0..dim]`.
//
// # Safety
// `h` live; `q` points to `dim` doubles; `out` writable; `argmax` NULL or `dim` writable doubles.
enum LdpStatus ldp_lagrangian(const struct LdpHamiltonian *h,
                              const double *q,
                              size_t dim,
                              double *out,
                              double *argmax);

// Rate function `I∞(x, t)` on the unit ball.
//
// # Safety
// `h` live; `x` points to `dim` doubles; `out` writable.
enum LdpStatus ldp_rate(const struct LdpHamiltonian *h,
                        const double *x,
                        size_t dim,
                        double t,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LDP_H */
