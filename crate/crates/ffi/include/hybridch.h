#ifndef HYBRIDCH_H
#define HYBRIDCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Base channel-hopping protocol.
 */
typedef enum HcBase {
  HC_BASE_RANDOM = 0,
  HC_BASE_CRSEQ = 1,
  HC_BASE_JUMP_STAY = 2,
  HC_BASE_MODULAR = 3,
} HcBase;

/**
 * Result code of every fallible call.
 */
typedef enum HcStatus {
  HC_STATUS_OK = 0,
  HC_STATUS_NULL_POINTER = 1,
  HC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * No self-discovering schedule, or no overlap between two schedules.
   */
  HC_STATUS_INFEASIBLE = 3,
  /**
   * No padded channel count makes the base period coprime with the
   * number of awake slots.
   */
  HC_STATUS_NO_PADDING = 4,
  HC_STATUS_BUFFER_TOO_SMALL = 5,
  HC_STATUS_PANIC = 6,
} HcStatus;

/**
 * Opaque channel-hopping sequence.
 */
typedef struct HcSequence HcSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the base sequence of node `id` (1-based) over `n` channels.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum HcStatus hc_base_sequence_new(enum HcBase base,
                                   uint32_t n,
                                   uint64_t id,
                                   uint64_t seed,
                                   struct HcSequence **out);

/**
 * Creates the hybrid sequence that interleaves `base` with random hopping
 * under `schedule`, a NUL-terminated string of `0`/`1`. With `adversarial`
 * set, random slots never produce a rendezvous.
 *
 * # Safety
 * `schedule` must be a valid C string; `out` must be valid for a pointer
 * write.
 */
enum HcStatus hc_hybrid_sequence_new(enum HcBase base,
                                     uint32_t n,
                                     uint64_t id,
                                     const char *schedule,
                                     uint64_t seed,
                                     bool adversarial,
                                     struct HcSequence **out);

/**
 * Releases a sequence. Null is ignored.
 *
 * # Safety
 * `seq` must come from an `hc_*_new` call and not have been freed.
 */
void hc_sequence_free(struct HcSequence *seq);

/**
 * Channel (1-based) the sequence visits at slot `t`.
 *
 * # Safety
 * `seq` must be a live handle; `out` must be valid for a write.
 */
enum HcStatus hc_sequence_channel_at(const struct HcSequence *seq, uint64_t t, uint32_t *out);

/**
 * Guaranteed rendezvous bound: the base period for a base sequence, `τT`
 * for a hybrid one. Writes 0 when there is none (random hopping).
 *
 * # Safety
 * `seq` must be a live handle; `out` must be valid for a write.
 */
enum HcStatus hc_sequence_ttr_bound(const struct HcSequence *seq, uint64_t *out);

/**
 * Smallest period up to `max_period`; writes 0 when none is found.
 *
 * # Safety
 * `seq` must be a live handle; `out` must be valid for a write.
 */
enum HcStatus hc_detect_period(const struct HcSequence *seq, uint64_t max_period, uint64_t *out);

/**
 * First slot in `[0, horizon)` at which `a` and `b` meet under clock drift
 * `drift` (`b` runs `drift` slots ahead when positive). `found` is set to
 * false, and `slot` left untouched, if they never meet.
 *
 * # Safety
 * `a`, `b` must be live handles; `slot` and `found` valid for writes.
 */
enum HcStatus hc_first_rendezvous(const struct HcSequence *a,
                                  const struct HcSequence *b,
                                  int64_t drift,
                                  uint64_t horizon,
                                  uint64_t *slot,
                                  bool *found);

/**
 * Writes a self-discovering schedule with `awake` of `period` slots awake
 * as a NUL-terminated `0`/`1` string. `buf` needs `period + 1` bytes.
 *
 * # Safety
 * `buf` must be valid for `len` byte writes.
 */
enum HcStatus hc_generate_schedule(uint32_t period, uint32_t awake, char *buf, size_t len);

/**
 * Checks that schedules `x` and `y` share an awake slot under every
 * relative rotation. On success `horizon` receives the slot count within
 * which overlap is certified; otherwise the call returns `Infeasible`.
 *
 * # Safety
 * `x`, `y` must be valid C strings; `horizon` valid for a write or null.
 */
enum HcStatus hc_verify_discovery(const char *x, const char *y, uint64_t *horizon);

/**
 * `B/T · base_attr + (1 - B/T) · N`; NaN when `overlap > period`,
 * `period == 0` or `n == 0`.
 */
double hc_predict_attr(double base_attr, uint64_t overlap, uint64_t period, uint32_t n);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to fit, into `buf`. Returns the full message length in bytes;
 * 0 means the last call succeeded. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must be valid for `len` byte writes, or null.
 */
size_t hc_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRIDCH_H */
