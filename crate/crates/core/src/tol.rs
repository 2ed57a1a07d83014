//! Named tolerances shared by the solvers and reconstruction procedures.

/// Absolute tolerance for scalar root finds, in state units.
pub const ROOT: f64 = 1e-12;

/// Relative tolerance on flux levels when dispatching Riemann cases.
pub const CASE: f64 = 1e-12;

/// Waves whose state jump is below this are dropped from fans.
pub const ZERO_WAVE: f64 = 1e-14;

/// Fronts whose speed difference is below this (relative) never collide.
pub const PARALLEL: f64 = 1e-13;

/// Abort front tracking after this many interaction events.
pub const MAX_EVENTS: usize = 10_000_000;

/// State equality used to recognise stationary jumps across two snapshots.
pub const STATE_EQ: f64 = 1e-11;

/// Position equality used to match fronts across snapshots.
pub const POSITION_EQ: f64 = 1e-10;

/// Fronts closer than this (relative to position magnitude) at a collision are merged.
pub const COLLISION_MERGE: f64 = 1e-12;
