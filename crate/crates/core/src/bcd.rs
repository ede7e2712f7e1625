//! Alternating maximization over source power, jamming power and trajectory.

use serde::Serialize;
use thiserror::Error;

use crate::power_alloc::{self, PaSubproblem, PowerError, PuSlotContext};
use crate::scenario::{straight_line_trajectory, PowerSchedule, ScenarioConfig, ScenarioError, Trajectory};
use crate::secrecy::{self, SecrecyError};
use crate::trajectory::{self, TrajError};

/// Sweeps whose improvement stays below this count toward a stall.
pub const STALL_IMPROVEMENT: f64 = 1e-12;
pub const STALL_SWEEPS: usize = 3;

#[derive(Debug, Error)]
pub enum BcdError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Secrecy(#[from] SecrecyError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Trajectory(#[from] TrajError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    Stalled,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "max_iters",
            StopReason::Stalled => "stalled",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which blocks reported no progress in a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepFlags {
    pub pa_kept: bool,
    pub pu_no_progress: bool,
    pub traj_no_progress: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Average secrecy rate, bits/channel-use. Entry 0 is the starting point.
    pub objective_trace: Vec<f64>,
    /// Relative improvement of each sweep; entry 0 is 0.
    pub relative_errors: Vec<f64>,
    pub stop_reason: StopReason,
    pub final_traj: Trajectory,
    pub final_powers: PowerSchedule,
    /// Number of sweeps performed.
    pub iterations: usize,
    pub sweep_flags: Vec<SweepFlags>,
}

impl SolveReport {
    pub fn final_rate(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    /// True if no sweep raised the objective above its starting value.
    pub fn never_improved(&self) -> bool {
        self.objective_trace.iter().all(|&r| r <= self.objective_trace[0])
    }
}

/// Straight path with every power at its average limit.
pub fn initialize(cfg: &ScenarioConfig) -> Result<(Trajectory, PowerSchedule), BcdError> {
    let traj = straight_line_trajectory(cfg)?;
    let powers = PowerSchedule::constant(cfg.num_slots, cfg.p_a_avg, cfg.p_u_avg);
    Ok((traj, powers))
}

fn relative_error(new: f64, old: f64) -> f64 {
    if new == 0.0 {
        0.0
    } else {
        (new - old) / new.abs()
    }
}

fn pu_contexts(traj: &Trajectory, p_a: &[f64], cfg: &ScenarioConfig) -> Vec<PuSlotContext> {
    let bob = cfg.bob.position();
    let d_ab = cfg.d_ab();
    traj.points
        .iter()
        .zip(p_a)
        .map(|(q, &p_a)| PuSlotContext {
            p_a,
            d_ab,
            d_qb: q.distance(bob),
            beta0: cfg.beta0,
            psi: cfg.pathloss,
            y_e: cfg.ye,
        })
        .collect()
}

fn update_pa(traj: &Trajectory, powers: &mut PowerSchedule, cfg: &ScenarioConfig) -> Result<bool, BcdError> {
    let sub = PaSubproblem {
        h_b: secrecy::slot_gains(traj, &powers.p_u, cfg),
        y_e: cfg.ye,
        p_a_max: cfg.p_a_max,
        p_a_avg: cfg.p_a_avg,
    };
    let sol = power_alloc::solve_pa(&sub)?;
    // the bisection is exact to rounding; never trade a worse schedule for it
    if power_alloc::pa_objective_nats(&sub, &sol.p_a)? < power_alloc::pa_objective_nats(&sub, &powers.p_a)? {
        return Ok(true);
    }
    powers.p_a = sol.p_a;
    Ok(false)
}

fn update_pu(traj: &Trajectory, powers: &mut PowerSchedule, cfg: &ScenarioConfig) -> Result<bool, BcdError> {
    let ctx = pu_contexts(traj, &powers.p_a, cfg);
    let surrogate = power_alloc::build_pu_surrogate(&powers.p_u, &ctx)?;
    let sol = power_alloc::solve_pu(&surrogate, &ctx, cfg.p_u_max, cfg.p_u_avg)?;
    powers.p_u = sol.p_u;
    Ok(sol.no_progress)
}

fn update_traj(traj: &mut Trajectory, powers: &PowerSchedule, cfg: &ScenarioConfig) -> Result<bool, BcdError> {
    let surrogate = trajectory::build_traj_surrogate(traj, powers, cfg)?;
    let sol = trajectory::solve_traj(&surrogate, powers, cfg)?;
    *traj = sol.trajectory;
    Ok(sol.no_progress)
}

/// One sweep over the three blocks in the order source power, jamming power,
/// trajectory.
pub fn sweep(traj: &mut Trajectory, powers: &mut PowerSchedule, cfg: &ScenarioConfig) -> Result<SweepFlags, BcdError> {
    Ok(SweepFlags {
        pa_kept: update_pa(traj, powers, cfg)?,
        pu_no_progress: update_pu(traj, powers, cfg)?,
        traj_no_progress: update_traj(traj, powers, cfg)?,
    })
}

pub fn run(cfg: &ScenarioConfig) -> Result<SolveReport, BcdError> {
    let (mut traj, mut powers) = initialize(cfg)?;
    let mut old = secrecy::evaluate(&traj, &powers, cfg)?.average_rate;
    let mut objective_trace = vec![old];
    let mut relative_errors = vec![0.0];
    let mut sweep_flags = Vec::new();
    let mut flat = 0;
    let mut iterations = 0;
    let stop_reason = loop {
        if iterations >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        iterations += 1;
        sweep_flags.push(sweep(&mut traj, &mut powers, cfg)?);
        let new = secrecy::evaluate(&traj, &powers, cfg)?.average_rate;
        let e = relative_error(new, old);
        objective_trace.push(new);
        relative_errors.push(e);
        flat = if new - old < STALL_IMPROVEMENT { flat + 1 } else { 0 };
        old = new;
        if e < cfg.theta {
            break StopReason::Converged;
        }
        if flat >= STALL_SWEEPS {
            break StopReason::Stalled;
        }
    };
    Ok(SolveReport {
        objective_trace,
        relative_errors,
        stop_reason,
        final_traj: traj,
        final_powers: powers,
        iterations,
        sweep_flags,
    })
}

/// Straight path at constant average powers, evaluated without optimization.
pub fn run_baseline_straight(cfg: &ScenarioConfig) -> Result<SolveReport, BcdError> {
    let (traj, powers) = initialize(cfg)?;
    let rate = secrecy::evaluate(&traj, &powers, cfg)?.average_rate;
    Ok(SolveReport {
        objective_trace: vec![rate],
        relative_errors: vec![0.0],
        stop_reason: StopReason::Converged,
        final_traj: traj,
        final_powers: powers,
        iterations: 0,
        sweep_flags: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.num_slots = 40;
        cfg.slot_delta = 250.0 / 40.0;
        cfg
    }

    #[test]
    fn initial_point_is_feasible_and_constant() {
        let cfg = ScenarioConfig::default();
        let (traj, powers) = initialize(&cfg).unwrap();
        assert!(traj.is_feasible(&cfg));
        assert!(powers.is_feasible(&cfg));
        assert!((powers.p_u[0] - 0.01).abs() < 1e-15);
        assert!((powers.p_a[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn peak_equal_to_average_is_feasible() {
        let mut cfg = ScenarioConfig::default();
        cfg.p_u_max = cfg.p_u_avg;
        let (_, powers) = initialize(&cfg).unwrap();
        assert!(powers.is_feasible(&cfg));
    }

    #[test]
    fn zero_source_power_converges_immediately() {
        let mut cfg = small();
        cfg.p_a_max = 0.0;
        cfg.p_a_avg = 0.0;
        let r = run(&cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.stop_reason, StopReason::Converged);
        assert!(r.objective_trace.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn relative_error_guard() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_is_monotone_and_beats_baseline() {
        let cfg = small();
        let r = run(&cfg).unwrap();
        for w in r.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{w:?}");
        }
        let base = run_baseline_straight(&cfg).unwrap();
        assert!(r.final_rate() >= base.final_rate());
        assert!(r.final_traj.is_feasible(&cfg));
        assert!(r.final_powers.is_feasible(&cfg));
    }

    #[test]
    fn run_is_deterministic() {
        let cfg = small();
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }
}
