//! Interactive navigation benchmark engine: a planar quasi-static simulator
//! with pushable objects and hinged doors, effort-aware metrics, a planner,
//! a range sensor, scripted agents and a deterministic benchmark runner.

pub mod agents;
pub mod bundled;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod physics;
pub mod planner;
pub mod scene;
pub mod seed;
pub mod sensors;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;
