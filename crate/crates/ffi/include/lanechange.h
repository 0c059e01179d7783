/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#ifndef LANECHANGE_H
#define LANECHANGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LC_GRID_COLS 5

#define LC_GRID_ROWS 100

#define LC_GRID_LEN 500

#define LC_ACTION_ACCELERATE 0

#define LC_ACTION_NO_ACTION 1

#define LC_ACTION_DECELERATE 2

#define LC_ACTION_SWITCH_RIGHT 3

#define LC_PLANNER_P1 0

#define LC_PLANNER_P2 1

#define LC_PLANNER_P3 2

#define LC_VEHICLE_CAR 0

#define LC_VEHICLE_MOTORCYCLE 1

typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_ARGUMENT = 2,
  LC_STATUS_CONFIG = 3,
  LC_STATUS_INIT = 4,
  LC_STATUS_PROTOCOL = 5,
  LC_STATUS_SHAPE = 6,
  LC_STATUS_NOT_READY = 7,
  LC_STATUS_PARSE = 8,
  LC_STATUS_CHECKPOINT = 9,
  LC_STATUS_IO = 10,
  LC_STATUS_NET = 11,
  // `lc_sim_step` on an episode that already ended.
  LC_STATUS_EPISODE_DONE = 12,
  LC_STATUS_PANIC = 13,
} LcStatus;

typedef struct LcAgent LcAgent;

typedef struct LcPlanner LcPlanner;

typedef struct LcSim LcSim;

typedef struct LcStepResult {
  double reward;
  uint64_t step_count;
  uint8_t collided;
  uint8_t safety_breach;
  uint8_t reached_rightmost;
  uint8_t timed_out;
  uint8_t done;
} LcStepResult;

// One vehicle, ego frame. `lane_change_progress` is negative when the
// vehicle is not changing lanes.
typedef struct LcVehicle {
  uint32_t id;
  uint32_t kind;
  uint32_t lane;
  uint32_t target_lane;
  double lateral_pos;
  double long_pos;
  double speed;
  double lane_change_progress;
  uint8_t adversarial;
} LcVehicle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until
// the next failing call on the same thread.
const char *lc_last_error_message(void);

// Library version as a static nul-terminated string.
const char *lc_version(void);

// Creates a simulator reset with `seed`. `config_toml` may be null.
//
// # Safety
// `config_toml` is null or a nul-terminated string; `out` is writable.
enum LcStatus lc_sim_new(const char *config_toml, uint64_t seed, struct LcSim **out);

// # Safety
// `sim` is null or a handle from `lc_sim_new` not yet freed.
void lc_sim_free(struct LcSim *sim);

// Starts a new episode with `seed`.
//
// # Safety
// `sim` is a live handle.
enum LcStatus lc_sim_reset(struct LcSim *sim, uint64_t seed);

// Advances one step with a primitive action (`LC_ACTION_*`).
//
// # Safety
// `sim` is a live handle; `out` is null or writable.
enum LcStatus lc_sim_step(struct LcSim *sim, uint32_t action, struct LcStepResult *out);

// Writes the occupancy grid, column-major, into `out[0..LC_GRID_LEN]`.
//
// # Safety
// `sim` is a live handle; `out` points to `len` writable floats.
enum LcStatus lc_sim_observe(const struct LcSim *sim, float *out, size_t len);

// Number of vehicles other than the ego.
//
// # Safety
// `sim` is a live handle; `out` is writable.
enum LcStatus lc_sim_vehicle_count(const struct LcSim *sim, size_t *out);

// # Safety
// `sim` is a live handle; `out` is writable.
enum LcStatus lc_sim_ego(const struct LcSim *sim, struct LcVehicle *out);

// Vehicle `index` among the others, `0 <= index < lc_sim_vehicle_count`.
//
// # Safety
// `sim` is a live handle; `out` is writable.
enum LcStatus lc_sim_vehicle(const struct LcSim *sim, size_t index, struct LcVehicle *out);

// Steps taken in the current episode and whether it has ended.
//
// # Safety
// `sim` is a live handle; outputs are null or writable.
enum LcStatus lc_sim_progress(const struct LcSim *sim, uint64_t *step_count, uint8_t *done);

// Creates a classical planner (`LC_PLANNER_*`). `config_toml` may be null.
//
// # Safety
// `config_toml` is null or a nul-terminated string; `out` is writable.
enum LcStatus lc_planner_new(uint32_t kind, const char *config_toml, struct LcPlanner **out);

// # Safety
// `planner` is null or a handle from `lc_planner_new` not yet freed.
void lc_planner_free(struct LcPlanner *planner);

// Clears controller state; call at every episode start.
//
// # Safety
// `planner` is a live handle.
enum LcStatus lc_planner_reset(struct LcPlanner *planner);

// The planner's primitive action for the current state.
//
// # Safety
// Handles are live; `action` is writable.
enum LcStatus lc_planner_suggest(struct LcPlanner *planner,
                                 const struct LcSim *sim,
                                 uint32_t *action);

// Loads a trained agent from a checkpoint file.
//
// # Safety
// `path` is a nul-terminated string; `out` is writable.
enum LcStatus lc_agent_load(const char *path, struct LcAgent **out);

// # Safety
// `agent` is null or a handle from `lc_agent_load` not yet freed.
void lc_agent_free(struct LcAgent *agent);

// Width of the agent's Q-vector: 4, or 5 with a planner option.
//
// # Safety
// `agent` is a live handle; `out` is writable.
enum LcStatus lc_agent_n_outputs(const struct LcAgent *agent, size_t *out);

// Clears the option planner's controller state; call at every episode
// start.
//
// # Safety
// `agent` is a live handle.
enum LcStatus lc_agent_begin_episode(struct LcAgent *agent);

// Q-values for the current state into `out[0..len]`, `len` equal to
// `lc_agent_n_outputs`.
//
// # Safety
// Handles are live; `out` points to `len` writable floats.
enum LcStatus lc_agent_q_values(const struct LcAgent *agent,
                                const struct LcSim *sim,
                                float *out,
                                size_t len);

// Greedy decision: the chosen output `index` and the primitive `action`
// it resolves to (the planner's suggestion for the option index).
//
// # Safety
// Handles are live; outputs are null or writable.
enum LcStatus lc_agent_act(struct LcAgent *agent,
                           const struct LcSim *sim,
                           uint32_t *index,
                           uint32_t *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANECHANGE_H */
