//! Secrecy-rate maximization for a ground link protected by a UAV jammer
//! when the eavesdropper's position is unknown and only its average channel
//! power is known.
//!
//! The optimizer alternates between source power ([`power_alloc::solve_pa`]),
//! jamming power ([`power_alloc::solve_pu`]) and the UAV path
//! ([`trajectory::solve_traj`]); [`bcd::run`] drives the loop.

pub mod bcd;
pub mod cli;
pub mod oracle;
pub mod power_alloc;
pub mod scenario;
pub mod secrecy;
pub mod specfun;
pub mod trajectory;

pub use bcd::{run, run_baseline_straight, SolveReport, StopReason};
pub use scenario::{ConfigFile, PowerSchedule, ScenarioConfig, Trajectory, Vec3};
pub use secrecy::{evaluate, SecrecyEvaluation};
