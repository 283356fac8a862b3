#ifndef MIMQND_H
#define MIMQND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum MimqndStatus {
  MIMQND_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MIMQND_STATUS_NULL_POINTER = 1,
  // A string was not valid UTF-8, a key was unknown, or a value was out
  // of range for the call.
  MIMQND_STATUS_INVALID_ARGUMENT = 2,
  // Configuration text or file could not be parsed or failed validation.
  MIMQND_STATUS_CONFIG = 3,
  // A formula diverged or a fit or estimate failed.
  MIMQND_STATUS_NUMERICAL = 4,
  MIMQND_STATUS_IO = 5,
  // Internal error; the library state is unchanged.
  MIMQND_STATUS_PANIC = 6,
} MimqndStatus;

// Opaque experiment parameter set.
typedef struct MimqndParams MimqndParams;

// Opaque simulated phonon-number trajectory.
typedef struct MimqndTrajectory MimqndTrajectory;

// Validity conditions of a QND budget, one byte each (0 or 1).
typedef struct MimqndFlags {
  uint8_t qnd_time_ok;
  uint8_t gap_ok;
  uint8_t classical_bath_ok;
  uint8_t good_cavity;
} MimqndFlags;

// Plain-data copy of the QND budget. SI units throughout.
typedef struct MimqndBudget {
  double delta_omega;
  double kappa;
  double n_bar_photons;
  double n_bar_phonons;
  double s_omega;
  double tau_thermal;
  double tau_rwa;
  // Positive infinity when there is no linear coupling (`x0 = 0`).
  double tau_lin;
  double tau_total;
  double snr;
  double gap;
  struct MimqndFlags flags;
} MimqndBudget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mimqnd_version(void);

// Message describing the most recent failure on this thread, or an empty
// string after a successful call. The pointer stays valid until the next
// call into the library on this thread.
const char *mimqnd_last_error_message(void);

// One of the two built-in reference parameter sets (`row` = 1 or 2).
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum MimqndStatus mimqnd_params_reference(uint32_t row, struct MimqndParams **out);

// Parses and validates `key = value` configuration text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum MimqndStatus mimqnd_params_parse(const char *text, struct MimqndParams **out);

// Loads and validates a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MimqndStatus mimqnd_params_load(const char *path, struct MimqndParams **out);

// Reads a parameter by its configuration key (`"L"`, `"lambda"`, `"F"`,
// `"P_in"`, `"T"`, `"m"`, `"omega_m"`, `"Q"`, `"r_c"`, `"x0"`).
//
// # Safety
// `params` must be a live handle, `key` a NUL-terminated string and `out`
// writable.
enum MimqndStatus mimqnd_params_get(const struct MimqndParams *params,
                                    const char *key,
                                    double *out);

// Sets a parameter. No validation happens here; calls that consume the
// parameters validate them.
//
// # Safety
// `params` must be a live handle and `key` a NUL-terminated string.
enum MimqndStatus mimqnd_params_set(struct MimqndParams *params, const char *key, double value);

// Checks every parameter invariant; the first violation is reported.
//
// # Safety
// `params` must be a live handle.
enum MimqndStatus mimqnd_params_validate(const struct MimqndParams *params);

// Releases a parameter handle. NULL is ignored.
//
// # Safety
// `params` must be NULL or a handle not yet freed.
void mimqnd_params_free(struct MimqndParams *params);

// Full QND phonon-jump budget.
//
// # Safety
// `params` must be a live handle and `out` writable.
enum MimqndStatus mimqnd_jump_budget(const struct MimqndParams *params, struct MimqndBudget *out);

// Cavity resonance `(c/L)·acos(r_c·cos(4πx/λ))`, rad/s.
//
// # Safety
// `out` must be writable.
enum MimqndStatus mimqnd_dispersive_detuning(double x,
                                             double r_c,
                                             double length,
                                             double wavelength,
                                             double *out);

// Energy ringdown time `LF/(πc)` of a cavity with finesse `finesse`.
//
// # Safety
// `out` must be writable.
enum MimqndStatus mimqnd_ringdown_time(double finesse, double length, double *out);

// Simulates a ground-state-prepared trajectory of length `duration`
// seconds, stopping early after `max_events` events (0 = no cap).
//
// # Safety
// `params` must be a live handle and `out` writable.
enum MimqndStatus mimqnd_trajectory_simulate(const struct MimqndParams *params,
                                             double duration,
                                             uint64_t seed,
                                             bool measurement_channels,
                                             uint64_t max_events,
                                             struct MimqndTrajectory **out);

// Number of jump events; 0 for a NULL handle.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t mimqnd_trajectory_event_count(const struct MimqndTrajectory *traj);

// Simulated time span, s (shorter than requested when truncated).
//
// # Safety
// `traj` must be NULL or a live handle.
double mimqnd_trajectory_duration(const struct MimqndTrajectory *traj);

// True when the event cap ended the simulation early.
//
// # Safety
// `traj` must be NULL or a live handle.
bool mimqnd_trajectory_truncated(const struct MimqndTrajectory *traj);

// Copies the event times (s) and post-jump phonon numbers into caller
// buffers of `capacity` elements. Fails without writing if `capacity` is
// smaller than the event count.
//
// # Safety
// `traj` must be a live handle; `times` and `n_after` must each point to
// `capacity` writable elements.
enum MimqndStatus mimqnd_trajectory_events(const struct MimqndTrajectory *traj,
                                           double *times,
                                           uint64_t *n_after,
                                           size_t capacity);

// Releases a trajectory handle. NULL is ignored.
//
// # Safety
// `traj` must be NULL or a handle not yet freed.
void mimqnd_trajectory_free(struct MimqndTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMQND_H */
