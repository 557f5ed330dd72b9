#ifndef V2X_EDGE_H
#define V2X_EDGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum V2xStatus {
  V2X_STATUS_OK = 0,
  V2X_STATUS_NULL_POINTER = 1,
  V2X_STATUS_INVALID_STRING = 2,
  V2X_STATUS_CONFIG = 3,
  V2X_STATUS_SOLVER = 4,
  V2X_STATUS_IO = 5,
  V2X_STATUS_FINISHED = 6,
  V2X_STATUS_PANIC = 7,
} V2xStatus;

// Opaque configuration handle.
typedef struct V2xConfig V2xConfig;

// Opaque simulation handle.
typedef struct V2xSimulation V2xSimulation;

// Quantities derived from a configuration.
typedef struct V2xDerived {
  // Receiver noise power, W.
  double noise_power;
  // Interference temperature, W.
  double interference_temperature;
  double xi1;
  double upsilon;
  // Vehicle transmit power cap, W.
  double power_cap;
} V2xDerived;

// One simulated slot.
typedef struct V2xSlot {
  uint64_t t;
  uint64_t queue_tasks;
  uint64_t arrivals;
  uint64_t output_bits;
  uint64_t queue_after;
  uint64_t c_in_tasks;
  double budget;
  double p_v;
  double p_r;
  double computing_time;
  double energy_low;
} V2xSlot;

// Run summary.
typedef struct V2xMetrics {
  uint64_t slots;
  double avg_queue_tasks;
  double avg_energy_low;
  double avg_computing_time;
  double avg_offloaded_tasks;
  double third_quartile_queue;
  double last_quartile_queue;
  uint64_t final_queue;
} V2xMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t v2x_last_error_message(char *buf, size_t len);

// Creates a configuration holding the built-in defaults.
//
// # Safety
// `out` must be null or valid for a pointer write.
enum V2xStatus v2x_config_default(struct V2xConfig **out);

// Loads defaults overlaid with a TOML file.
//
// # Safety
// `path` must be null or a NUL-terminated string; `out` must be null or
// valid for a pointer write.
enum V2xStatus v2x_config_from_file(const char *path, struct V2xConfig **out);

// Sets one parameter. `value` is read as a TOML value, e.g. `"1e14"` or
// `"[0.1, 0.1]"`.
//
// # Safety
// `config` must be null or a live handle; `key` and `value` must be null or
// NUL-terminated strings.
enum V2xStatus v2x_config_set(struct V2xConfig *config, const char *key, const char *value);

// Validates the configuration and reports its derived quantities.
//
// # Safety
// `config` must be null or a live handle; `out` must be null or valid for a
// write.
enum V2xStatus v2x_config_derived(const struct V2xConfig *config, struct V2xDerived *out);

// # Safety
// `config` must be null or a handle not yet freed.
void v2x_config_free(struct V2xConfig *config);

// Starts a simulation from a snapshot of `config`; later changes to the
// configuration do not affect it.
//
// # Safety
// `config` must be null or a live handle; `out` must be null or valid for a
// pointer write.
enum V2xStatus v2x_simulation_new(const struct V2xConfig *config, struct V2xSimulation **out);

// Advances one slot. Returns `V2X_STATUS_FINISHED` once the horizon is
// reached. `out` may be null.
//
// # Safety
// `sim` must be null or a live handle; `out` must be null or valid for a
// write.
enum V2xStatus v2x_simulation_step(struct V2xSimulation *sim, struct V2xSlot *out);

// Runs the remaining slots and writes the summary of the whole run.
//
// # Safety
// `sim` must be null or a live handle; `out` must be null or valid for a
// write.
enum V2xStatus v2x_simulation_run(struct V2xSimulation *sim, struct V2xMetrics *out);

// # Safety
// `sim` must be null or a handle not yet freed.
void v2x_simulation_free(struct V2xSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* V2X_EDGE_H */
