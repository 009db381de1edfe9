#ifndef DYELIM_H
#define DYELIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef struct DyelimSequence DyelimSequence;
typedef struct DyelimCertificate DyelimCertificate;

// Result of every fallible call.
typedef enum DyelimStatus {
  DYELIM_STATUS_OK = 0,
  // Precision exhausted; retry with more bits.
  DYELIM_STATUS_PRECISION = 2,
  // A condition of the construction failed.
  DYELIM_STATUS_CONDITION = 3,
  // The cube budget was exceeded.
  DYELIM_STATUS_BUDGET = 4,
  // Certificate verification failed.
  DYELIM_STATUS_VERIFY = 5,
  // Invalid argument or malformed input.
  DYELIM_STATUS_USAGE = 64,
  // A required pointer was NULL.
  DYELIM_STATUS_NULL_POINTER = 65,
  // A string argument was not valid UTF-8.
  DYELIM_STATUS_INVALID_UTF8 = 66,
  // The engine panicked; the handle arguments are left unchanged.
  DYELIM_STATUS_INTERNAL = 70,
} DyelimStatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dyelim_version(void);

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call on the same thread.
const char *dyelim_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void dyelim_string_free(char *s);

// Builds a sequence from its JSON spec. `precision_bits = 0` selects the
// default precision.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
enum DyelimStatus dyelim_sequence_from_json(const char *spec_json,
                                            uint32_t precision_bits,
                                            DyelimSequence **out);

// Number of forms, or 0 for NULL.
//
// # Safety
// `seq` must be NULL or a live handle.
size_t dyelim_sequence_len(const DyelimSequence *seq);

// Dimension `d`, or 0 for NULL.
//
// # Safety
// `seq` must be NULL or a live handle.
size_t dyelim_sequence_dim(const DyelimSequence *seq);

// # Safety
// `seq` must be NULL or a handle not yet freed.
void dyelim_sequence_free(DyelimSequence *seq);

// δ of Theorem 1 or 2 as `[lo, hi]`, plus the full calculator output as
// JSON when `out_json` is not NULL.
//
// # Safety
// `lo` and `hi` must be valid; `out_json` may be NULL.
enum DyelimStatus dyelim_bound(uint32_t theorem,
                               uint64_t n,
                               uint64_t d,
                               uint32_t precision_bits,
                               double *lo,
                               double *hi,
                               char **out_json);

// Exact measure of `{θ ∈ [u, v] : ‖aθ + b‖ <= ε}` with rationals given as
// strings such as `"3/8"`; the result is written as a rational string.
//
// # Safety
// All string arguments must be NUL-terminated; `out` must be valid.
enum DyelimStatus dyelim_measure_1d(const char *a,
                                    const char *b,
                                    const char *eps,
                                    const char *u,
                                    const char *v,
                                    char **out);

// Runs the construction described by a run config (the JSON accepted by
// `dyelim construct --config`). Relative sequence paths resolve against the
// working directory. On a failed condition the violation is in
// [`dyelim_last_error`].
//
// # Safety
// `config_json` must be NUL-terminated; `out` must be valid.
enum DyelimStatus dyelim_construct(const char *config_json, DyelimCertificate **out);

// Parses a certificate without checking it.
//
// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum DyelimStatus dyelim_certificate_from_json(const char *json, DyelimCertificate **out);

// Canonical JSON of a certificate.
//
// # Safety
// `cert` must be a live handle; `out` must be valid.
enum DyelimStatus dyelim_certificate_to_json(const DyelimCertificate *cert, char **out);

// The recorded `certificate_digest`.
//
// # Safety
// `cert` must be a live handle; `out` must be valid.
enum DyelimStatus dyelim_certificate_digest(const DyelimCertificate *cert, char **out);

// Re-checks a certificate against a sequence. Returns `Ok` when every check
// passes and `Verify` otherwise; the report is written to `out_report` when
// it is not NULL.
//
// # Safety
// `cert` and `seq` must be live handles; `out_report` may be NULL.
enum DyelimStatus dyelim_verify(const DyelimCertificate *cert,
                                const DyelimSequence *seq,
                                char **out_report);

// # Safety
// `cert` must be NULL or a handle not yet freed.
void dyelim_certificate_free(DyelimCertificate *cert);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYELIM_H */
