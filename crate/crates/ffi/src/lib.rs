//! C ABI over the `lanechange` crate.
//!
//! Every function returns an [`LcStatus`]. On failure a description is kept
//! per thread and can be read with [`lc_last_error_message`]. Handles are
//! opaque; each `*_new`/`*_load` must be paired with the matching `*_free`.
//! Panics never cross the boundary: they are caught and reported as
//! `LC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lanechange::config::AppConfig;
use lanechange::dqn::{argmax, Checkpoint, DqnAgent};
use lanechange::planners::{ClassicalPlanner, Planner, PlannerKind};
use lanechange::sim::{observe, Action, SimState, Vehicle, VehicleKind, GRID_LEN};
use lanechange::Error;

pub const LC_GRID_COLS: usize = 5;
pub const LC_GRID_ROWS: usize = 100;
pub const LC_GRID_LEN: usize = 500;

pub const LC_ACTION_ACCELERATE: u32 = 0;
pub const LC_ACTION_NO_ACTION: u32 = 1;
pub const LC_ACTION_DECELERATE: u32 = 2;
pub const LC_ACTION_SWITCH_RIGHT: u32 = 3;

pub const LC_PLANNER_P1: u32 = 0;
pub const LC_PLANNER_P2: u32 = 1;
pub const LC_PLANNER_P3: u32 = 2;

pub const LC_VEHICLE_CAR: u32 = 0;
pub const LC_VEHICLE_MOTORCYCLE: u32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Init = 4,
    Protocol = 5,
    Shape = 6,
    NotReady = 7,
    Parse = 8,
    Checkpoint = 9,
    Io = 10,
    Net = 11,
    /// `lc_sim_step` on an episode that already ended.
    EpisodeDone = 12,
    Panic = 13,
}

/// One vehicle, ego frame. `lane_change_progress` is negative when the
/// vehicle is not changing lanes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LcVehicle {
    pub id: u32,
    pub kind: u32,
    pub lane: u32,
    pub target_lane: u32,
    pub lateral_pos: f64,
    pub long_pos: f64,
    pub speed: f64,
    pub lane_change_progress: f64,
    pub adversarial: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LcStepResult {
    pub reward: f64,
    pub step_count: u64,
    pub collided: u8,
    pub safety_breach: u8,
    pub reached_rightmost: u8,
    pub timed_out: u8,
    pub done: u8,
}

pub struct LcSim {
    state: SimState,
}

pub struct LcPlanner {
    planner: ClassicalPlanner,
}

pub struct LcAgent {
    agent: DqnAgent,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(LcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => LcStatus::Config,
            Error::Init(_) => LcStatus::Init,
            Error::Protocol(_) => LcStatus::Protocol,
            Error::Shape(_) => LcStatus::Shape,
            Error::NotReady { .. } => LcStatus::NotReady,
            Error::Parse { .. } => LcStatus::Parse,
            Error::Checkpoint(_) => LcStatus::Checkpoint,
            Error::Io { .. } => LcStatus::Io,
            Error::Net(_) => LcStatus::Net,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: LcStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            LcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(LcStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(LcStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(LcStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(LcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// A null config means defaults.
unsafe fn config_arg(p: *const c_char) -> Result<AppConfig, Failure> {
    if p.is_null() {
        return Ok(AppConfig::default());
    }
    Ok(AppConfig::from_toml(str_arg(p, "config_toml")?)?)
}

fn action_arg(action: u32) -> Result<Action, Failure> {
    match Action::from_index(action as usize) {
        Some(a) => Ok(a),
        None => fail(LcStatus::InvalidArgument, format!("unknown action {action}")),
    }
}

fn vehicle_out(v: &Vehicle) -> LcVehicle {
    LcVehicle {
        id: v.id,
        kind: match v.kind {
            VehicleKind::Car => LC_VEHICLE_CAR,
            VehicleKind::Motorcycle => LC_VEHICLE_MOTORCYCLE,
        },
        lane: v.lane as u32,
        target_lane: v.destination_lane() as u32,
        lateral_pos: v.lateral_pos,
        long_pos: v.long_pos,
        speed: v.speed,
        lane_change_progress: v.lane_change.map_or(-1.0, |lc| lc.progress),
        adversarial: v.adversarial as u8,
    }
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    // SAFETY: callers pass a pointer to writable storage for one `T`.
    match unsafe { out.as_mut() } {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => fail(LcStatus::NullPointer, "output pointer is null"),
    }
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a simulator reset with `seed`. `config_toml` may be null.
///
/// # Safety
/// `config_toml` is null or a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_new(config_toml: *const c_char, seed: u64, out: *mut *mut LcSim) -> LcStatus {
    guard(|| {
        let app = config_arg(config_toml)?;
        let state = SimState::reset(&app.sim, seed)?;
        write_out(out, Box::into_raw(Box::new(LcSim { state })))
    })
}

/// # Safety
/// `sim` is null or a handle from `lc_sim_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_free(sim: *mut LcSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Starts a new episode with `seed`.
///
/// # Safety
/// `sim` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_reset(sim: *mut LcSim, seed: u64) -> LcStatus {
    guard(|| {
        let sim = deref_mut(sim, "sim")?;
        sim.state = SimState::reset(&sim.state.config, seed)?;
        Ok(())
    })
}

/// Advances one step with a primitive action (`LC_ACTION_*`).
///
/// # Safety
/// `sim` is a live handle; `out` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_step(sim: *mut LcSim, action: u32, out: *mut LcStepResult) -> LcStatus {
    guard(|| {
        let sim = deref_mut(sim, "sim")?;
        let action = action_arg(action)?;
        if sim.state.done {
            return fail(LcStatus::EpisodeDone, "episode already finished; reset first");
        }
        let o = sim.state.step(action)?;
        let result = LcStepResult {
            reward: o.reward,
            step_count: sim.state.step_count,
            collided: o.events.collided as u8,
            safety_breach: o.events.safety_breach as u8,
            reached_rightmost: o.events.reached_rightmost as u8,
            timed_out: o.events.timed_out as u8,
            done: o.done as u8,
        };
        if out.is_null() {
            Ok(())
        } else {
            write_out(out, result)
        }
    })
}

/// Writes the occupancy grid, column-major, into `out[0..LC_GRID_LEN]`.
///
/// # Safety
/// `sim` is a live handle; `out` points to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_observe(sim: *const LcSim, out: *mut f32, len: usize) -> LcStatus {
    guard(|| {
        let sim = deref(sim, "sim")?;
        if out.is_null() {
            return fail(LcStatus::NullPointer, "out is null");
        }
        if len != GRID_LEN {
            return fail(LcStatus::Shape, format!("grid has {GRID_LEN} cells, buffer has {len}"));
        }
        let grid = observe(&sim.state);
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(grid.as_slice());
        Ok(())
    })
}

/// Number of vehicles other than the ego.
///
/// # Safety
/// `sim` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_vehicle_count(sim: *const LcSim, out: *mut usize) -> LcStatus {
    guard(|| write_out(out, deref(sim, "sim")?.state.others.len()))
}

/// # Safety
/// `sim` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_ego(sim: *const LcSim, out: *mut LcVehicle) -> LcStatus {
    guard(|| write_out(out, vehicle_out(&deref(sim, "sim")?.state.ego)))
}

/// Vehicle `index` among the others, `0 <= index < lc_sim_vehicle_count`.
///
/// # Safety
/// `sim` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_vehicle(sim: *const LcSim, index: usize, out: *mut LcVehicle) -> LcStatus {
    guard(|| {
        let sim = deref(sim, "sim")?;
        match sim.state.others.get(index) {
            Some(v) => write_out(out, vehicle_out(v)),
            None => fail(LcStatus::InvalidArgument, format!("no vehicle {index}")),
        }
    })
}

/// Steps taken in the current episode and whether it has ended.
///
/// # Safety
/// `sim` is a live handle; outputs are null or writable.
#[no_mangle]
pub unsafe extern "C" fn lc_sim_progress(sim: *const LcSim, step_count: *mut u64, done: *mut u8) -> LcStatus {
    guard(|| {
        let sim = deref(sim, "sim")?;
        if !step_count.is_null() {
            write_out(step_count, sim.state.step_count)?;
        }
        if !done.is_null() {
            write_out(done, sim.state.done as u8)?;
        }
        Ok(())
    })
}

/// Creates a classical planner (`LC_PLANNER_*`). `config_toml` may be null.
///
/// # Safety
/// `config_toml` is null or a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_planner_new(kind: u32, config_toml: *const c_char, out: *mut *mut LcPlanner) -> LcStatus {
    guard(|| {
        let kind = match kind {
            LC_PLANNER_P1 => PlannerKind::P1,
            LC_PLANNER_P2 => PlannerKind::P2,
            LC_PLANNER_P3 => PlannerKind::P3,
            other => return fail(LcStatus::InvalidArgument, format!("unknown planner {other}")),
        };
        let app = config_arg(config_toml)?;
        let planner = ClassicalPlanner::new(kind, app.planner);
        write_out(out, Box::into_raw(Box::new(LcPlanner { planner })))
    })
}

/// # Safety
/// `planner` is null or a handle from `lc_planner_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_planner_free(planner: *mut LcPlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}

/// Clears controller state; call at every episode start.
///
/// # Safety
/// `planner` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_planner_reset(planner: *mut LcPlanner) -> LcStatus {
    guard(|| {
        deref_mut(planner, "planner")?.planner.reset();
        Ok(())
    })
}

/// The planner's primitive action for the current state.
///
/// # Safety
/// Handles are live; `action` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_planner_suggest(planner: *mut LcPlanner, sim: *const LcSim, action: *mut u32) -> LcStatus {
    guard(|| {
        let planner = deref_mut(planner, "planner")?;
        let sim = deref(sim, "sim")?;
        write_out(action, planner.planner.suggest(&sim.state).index() as u32)
    })
}

/// Loads a trained agent from a checkpoint file.
///
/// # Safety
/// `path` is a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_agent_load(path: *const c_char, out: *mut *mut LcAgent) -> LcStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let agent = Checkpoint::load(Path::new(path))?.restore()?;
        write_out(out, Box::into_raw(Box::new(LcAgent { agent })))
    })
}

/// # Safety
/// `agent` is null or a handle from `lc_agent_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_agent_free(agent: *mut LcAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Width of the agent's Q-vector: 4, or 5 with a planner option.
///
/// # Safety
/// `agent` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn lc_agent_n_outputs(agent: *const LcAgent, out: *mut usize) -> LcStatus {
    guard(|| write_out(out, deref(agent, "agent")?.agent.n_outputs()))
}

/// Clears the option planner's controller state; call at every episode
/// start.
///
/// # Safety
/// `agent` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_agent_begin_episode(agent: *mut LcAgent) -> LcStatus {
    guard(|| {
        deref_mut(agent, "agent")?.agent.begin_episode();
        Ok(())
    })
}

/// Q-values for the current state into `out[0..len]`, `len` equal to
/// `lc_agent_n_outputs`.
///
/// # Safety
/// Handles are live; `out` points to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn lc_agent_q_values(agent: *const LcAgent, sim: *const LcSim, out: *mut f32, len: usize) -> LcStatus {
    guard(|| {
        let agent = deref(agent, "agent")?;
        let sim = deref(sim, "sim")?;
        if out.is_null() {
            return fail(LcStatus::NullPointer, "out is null");
        }
        let q = agent.agent.q_values(&observe(&sim.state));
        if len != q.len() {
            return fail(LcStatus::Shape, format!("agent has {} outputs, buffer has {len}", q.len()));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&q);
        Ok(())
    })
}

/// Greedy decision: the chosen output `index` and the primitive `action`
/// it resolves to (the planner's suggestion for the option index).
///
/// # Safety
/// Handles are live; outputs are null or writable.
#[no_mangle]
pub unsafe extern "C" fn lc_agent_act(agent: *mut LcAgent, sim: *const LcSim, index: *mut u32, action: *mut u32) -> LcStatus {
    guard(|| {
        let agent = deref_mut(agent, "agent")?;
        let sim = deref(sim, "sim")?;
        let q = agent.agent.q_values(&observe(&sim.state));
        let i = argmax(&q);
        let a = agent.agent.resolve_action(i, &sim.state)?;
        if !index.is_null() {
            write_out(index, i as u32)?;
        }
        if !action.is_null() {
            write_out(action, a.index() as u32)?;
        }
        Ok(())
    })
}
