//! Trajectory subproblem.
//!
//! With powers fixed, each slot's rate depends on the UAV only through
//! `m[n] = ‖q[n] − w_b‖²`. Eve's term is concave in `m`, so its tangent
//! `O_k + W_k (m − m_k)` bounds it from above; the squared distance is
//! convex in `q`, so its tangent `L_n(q) = m_k + 2(q^k − w_b)ᵀ(q − q^k)`
//! bounds it from below. Maximizing
//!
//! ```text
//! Σ_n ln(1 + A p_a / (β₀ P_u / m[n] + 1)) − W_k[n] m[n],   m[n] ≤ L_n(q[n])
//! ```
//!
//! over the flight constraints therefore never decreases the true rate.
//! The slack is eliminated slot by slot (`m = min(L_n(q), m̂_n)` where `m̂_n`
//! is the unconstrained maximizer), leaving a concave problem in the planar
//! points that is solved by a log-barrier Newton method.

mod ellipse;
mod interior;

use std::f64::consts::LN_2;

use thiserror::Error;

pub use ellipse::PlanarEllipse;
use interior::{ChainProblem, PointTerm};

use crate::scenario::{PowerSchedule, ScenarioConfig, Trajectory, Vec3, Violation};
use crate::secrecy::{self, SecrecyError};

/// Barrier duality gap at which the inner solve stops, nats.
pub const BARRIER_GAP: f64 = 1e-9;
/// Fraction of the way the inner solver's start is moved toward the interior.
const INTERIOR_PULL: f64 = 1e-6;
/// Slots closer than `H + DEGENERATE_GAP` to Bob are frozen for a round.
pub const DEGENERATE_GAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("trajectory subproblem input infeasible: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Infeasible(Vec<Violation>),
    #[error("flight altitude {0} m leaves no room inside the coverage ellipse")]
    EmptyEllipse(f64),
    #[error(transparent)]
    Secrecy(#[from] SecrecyError),
}

/// Fixed per-slot quantities of the trajectory subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotModel {
    /// `β₀ d_ab^{−ψ}`
    pub ground: f64,
    pub beta0: f64,
    pub p_a: f64,
    pub p_u: f64,
    pub y_e: f64,
}

impl SlotModel {
    pub fn gain(&self, m: f64) -> f64 {
        self.ground / (self.beta0 * self.p_u / m + 1.0)
    }

    /// Bob's rate as a function of the squared UAV-Bob distance, nats.
    pub fn bob_rate(&self, m: f64) -> f64 {
        (self.gain(m) * self.p_a).ln_1p()
    }

    fn bob_rate_slope(&self, m: f64) -> f64 {
        let k = self.p_a * self.ground;
        let c = self.beta0 * self.p_u;
        (1.0 + k) / (m * (1.0 + k) + c) - 1.0 / (m + c)
    }

    fn bob_rate_curvature(&self, m: f64) -> f64 {
        let k = self.p_a * self.ground;
        let c = self.beta0 * self.p_u;
        let a = (1.0 + k) / (m * (1.0 + k) + c);
        let b = 1.0 / (m + c);
        b * b - a * a
    }

    /// Eve's term as a function of the squared UAV-Bob distance, nats.
    pub fn eve_term(&self, m: f64) -> Result<f64, SecrecyError> {
        secrecy::eve_term_nats(self.gain(m), self.p_a, self.y_e)
    }

    /// `dEve/dm = [p_a e^{−h/y_e} / (1 + h p_a)] · A β₀ P_u / (β₀ P_u + m)²`.
    pub fn eve_slope(&self, m: f64) -> f64 {
        if self.p_u == 0.0 || self.p_a == 0.0 {
            return 0.0;
        }
        let h = self.gain(m);
        let c = self.beta0 * self.p_u;
        let dh_dm = self.ground * c / ((c + m) * (c + m));
        self.p_a * (-h / self.y_e).exp() / (1.0 + h * self.p_a) * dh_dm
    }

    /// Maximizer over `m > 0` of `bob_rate(m) − w·m` (`∞` when `w = 0`).
    fn best_slack(&self, w: f64) -> f64 {
        let k = self.p_a * self.ground;
        let c = self.beta0 * self.p_u;
        if c == 0.0 || k == 0.0 {
            return if w > 0.0 { 0.0 } else { f64::INFINITY };
        }
        if w <= 0.0 {
            return f64::INFINITY;
        }
        // Kc / ((m(1+K)+c)(m+c)) = w  ⇒  (1+K)m² + c(2+K)m + c² − Kc/w = 0
        let q = k * c / w - c * c;
        if q <= 0.0 {
            return 0.0;
        }
        let bq = c * (2.0 + k);
        2.0 * q / (bq + (bq * bq + 4.0 * (1.0 + k) * q).sqrt())
    }
}

/// Linearization of the trajectory subproblem at `q^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajSurrogate {
    pub expansion_traj: Trajectory,
    /// `‖q^k[n] − w_b‖²`
    pub m_k: Vec<f64>,
    /// Eve's term at `m_k`, nats.
    pub o_k: Vec<f64>,
    /// `dEve/dm` at `m_k`, nats per m².
    pub w_k: Vec<f64>,
    /// Gradient of the squared distance at `q^k`, `2(q^k[n] − w_b)`; with
    /// `m_k` this is the affine minorant `L_n(q)` of `‖q − w_b‖²`.
    pub distance_gradient: Vec<Vec3>,
    /// Slots whose point is held fixed this round.
    pub frozen: Vec<bool>,
    pub slots: Vec<SlotModel>,
    best_m: Vec<f64>,
}

impl TrajSurrogate {
    /// `L_n(q) = m_k + 2(q^k − w_b)ᵀ(q − q^k)`
    pub fn linearized_distance(&self, n: usize, q: Vec3) -> f64 {
        self.m_k[n] + self.distance_gradient[n].dot(q - self.expansion_traj.points[n])
    }

    /// Affine upper bound of Eve's term in slot `n`, nats.
    pub fn eve_bound(&self, n: usize, m: f64) -> f64 {
        self.o_k[n] + self.w_k[n] * (m - self.m_k[n])
    }

    /// Optimal slack for slot `n` when the linearized distance is `bound`.
    pub fn slack_for(&self, n: usize, bound: f64) -> f64 {
        bound.min(self.best_m[n])
    }

    /// Surrogate objective of slot `n` with the slack eliminated, as a
    /// function of the planar point: `ψ(min(L_n(q), m̂_n))` with
    /// `ψ(m) = bob(m) − W m`, nats. Concave in `q`.
    fn point_term(&self, n: usize, p: [f64; 2], z: f64) -> PointTerm {
        let bound = self.linearized_distance(n, Vec3::new(p[0], p[1], z));
        let m = self.slack_for(n, bound);
        let s = &self.slots[n];
        let value = s.bob_rate(m) - self.w_k[n] * m;
        if bound >= self.best_m[n] {
            return PointTerm { value, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
        }
        let g = self.distance_gradient[n];
        let d1 = s.bob_rate_slope(m) - self.w_k[n];
        let d2 = s.bob_rate_curvature(m);
        PointTerm {
            value,
            grad: [d1 * g.x, d1 * g.y],
            hess: [[d2 * g.x * g.x, d2 * g.x * g.y], [d2 * g.y * g.x, d2 * g.y * g.y]],
        }
    }
}

fn slot_models(powers: &PowerSchedule, cfg: &ScenarioConfig) -> Vec<SlotModel> {
    let ground = cfg.ground_gain();
    powers
        .p_a
        .iter()
        .zip(&powers.p_u)
        .map(|(&p_a, &p_u)| SlotModel { ground, beta0: cfg.beta0, p_a, p_u, y_e: cfg.ye })
        .collect()
}

pub fn build_traj_surrogate(
    traj_k: &Trajectory,
    powers: &PowerSchedule,
    cfg: &ScenarioConfig,
) -> Result<TrajSurrogate, TrajError> {
    let mut v = traj_k.violations(cfg);
    v.extend(powers.violations(cfg));
    if !v.is_empty() {
        return Err(TrajError::Infeasible(v));
    }
    let bob = cfg.bob.position();
    let slots = slot_models(powers, cfg);
    let n = traj_k.len();
    let mut m_k = Vec::with_capacity(n);
    let mut o_k = Vec::with_capacity(n);
    let mut w_k = Vec::with_capacity(n);
    let mut distance_gradient = Vec::with_capacity(n);
    let mut frozen = Vec::with_capacity(n);
    let mut best_m = Vec::with_capacity(n);
    for (q, s) in traj_k.points.iter().zip(&slots) {
        let d = *q - bob;
        let m = d.norm_sq();
        let w = s.eve_slope(m);
        m_k.push(m);
        o_k.push(s.eve_term(m)?);
        w_k.push(w);
        distance_gradient.push(Vec3::new(2.0 * d.x, 2.0 * d.y, 0.0));
        frozen.push(d.norm() < cfg.altitude + DEGENERATE_GAP);
        best_m.push(s.best_slack(w));
    }
    Ok(TrajSurrogate {
        expansion_traj: traj_k.clone(),
        m_k,
        o_k,
        w_k,
        distance_gradient,
        frozen,
        slots,
        best_m,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajSolveResult {
    pub trajectory: Trajectory,
    /// Slack values, m².
    pub m: Vec<f64>,
    /// Lower bound on the true objective from the linearization, bits.
    pub surrogate_objective: f64,
    /// `Σ_n` per-slot secrecy rate at the returned trajectory, bits.
    pub true_objective: f64,
    pub no_progress: bool,
    pub iterations: usize,
}

/// Sum of per-slot secrecy rates along a trajectory, bits.
pub fn traj_objective(traj: &Trajectory, powers: &PowerSchedule, cfg: &ScenarioConfig) -> Result<f64, TrajError> {
    Ok(secrecy::evaluate(traj, powers, cfg)?.total_rate())
}

fn surrogate_bits(s: &TrajSurrogate, m: &[f64]) -> f64 {
    let total: f64 = (0..m.len())
        .map(|n| s.slots[n].bob_rate(m[n]) - s.eve_bound(n, m[n]))
        .sum();
    total / LN_2
}

fn finish(
    s: &TrajSurrogate,
    traj: Trajectory,
    powers: &PowerSchedule,
    cfg: &ScenarioConfig,
    no_progress: bool,
    iterations: usize,
) -> Result<TrajSolveResult, TrajError> {
    let m: Vec<f64> = traj
        .points
        .iter()
        .enumerate()
        .map(|(n, &q)| s.slack_for(n, s.linearized_distance(n, q)))
        .collect();
    let true_objective = secrecy::evaluate_unchecked(&traj, powers, cfg)?.total_rate();
    Ok(TrajSolveResult {
        surrogate_objective: surrogate_bits(s, &m),
        trajectory: traj,
        m,
        true_objective,
        no_progress,
        iterations,
    })
}

/// Strictly feasible chain near `start`: each run of free points between
/// pinned ones is pulled slightly toward the evenly spaced segment joining
/// its pinned ends. `None` if some run has no slack.
fn interior_start(start: &[[f64; 2]], fixed: &[bool], step: f64) -> Option<Vec<[f64; 2]>> {
    let mut out = start.to_vec();
    let mut i = 0;
    while i + 1 < start.len() {
        let j = (i + 1..start.len()).find(|&j| fixed[j])?;
        if j > i + 1 {
            let (a, b) = (start[i], start[j]);
            let links = (j - i) as f64;
            let span = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            if span >= links * step * (1.0 - 1e-9) {
                return None;
            }
            for k in i + 1..j {
                let f = (k - i) as f64 / links;
                let anchor = [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
                out[k][0] += INTERIOR_PULL * (anchor[0] - out[k][0]);
                out[k][1] += INTERIOR_PULL * (anchor[1] - out[k][1]);
            }
        }
        i = j;
    }
    Some(out)
}

/// One SCA round for the trajectory: maximize the linearized subproblem over
/// the flight constraints, starting from the expansion trajectory.
pub fn solve_traj(
    surrogate: &TrajSurrogate,
    powers: &PowerSchedule,
    cfg: &ScenarioConfig,
) -> Result<TrajSolveResult, TrajError> {
    let start = &surrogate.expansion_traj;
    let n = start.len();
    let stay = |iters| finish(surrogate, start.clone(), powers, cfg, true, iters);
    let any_active = surrogate.w_k.iter().zip(&surrogate.slots).any(|(&w, s)| w > 0.0 || s.p_u > 0.0);
    if n < 2 || !any_active {
        return stay(0);
    }
    let ellipse = PlanarEllipse::at_altitude(cfg).ok_or(TrajError::EmptyEllipse(cfg.altitude))?;
    let z = cfg.altitude;

    // chain index 0 is q0, index i is q[i]
    let mut fixed = vec![false; n + 1];
    fixed[0] = true;
    fixed[n] = true;
    for i in 0..n {
        fixed[i + 1] |= surrogate.frozen[i];
    }
    let chain: Vec<[f64; 2]> = std::iter::once([cfg.q0.x, cfg.q0.y])
        .chain(start.points.iter().map(|p| [p.x, p.y]))
        .collect();
    let Some(init) = interior_start(&chain, &fixed, cfg.step_length()) else {
        return stay(0);
    };
    let halfplanes = (0..=n)
        .map(|i| {
            if i == 0 || fixed[i] {
                return None;
            }
            // L_n(q) > 0
            let g = surrogate.distance_gradient[i - 1];
            let q = start.points[i - 1];
            Some(([g.x, g.y], surrogate.m_k[i - 1] - g.x * q.x - g.y * q.y))
        })
        .collect();
    let objective = |i: usize, p: [f64; 2]| surrogate.point_term(i - 1, p, z);
    let problem = ChainProblem { ellipse, step: cfg.step_length(), fixed, halfplanes, objective: &objective };
    let Some(sol) = problem.solve(init, BARRIER_GAP) else {
        return stay(0);
    };
    let iters = sol.newton_steps;
    if !(problem.objective_value(&sol.points) > problem.objective_value(&chain)) {
        return stay(iters);
    }

    let mut candidate = Trajectory {
        points: sol.points[1..].iter().map(|p| Vec3::new(p[0], p[1], z)).collect(),
    };
    // pinned points are restored bit-exactly
    candidate.points[n - 1] = cfg.qf;
    for i in 0..n {
        if surrogate.frozen[i] {
            candidate.points[i] = start.points[i];
        }
    }
    if !candidate.is_feasible(cfg) {
        return stay(iters);
    }
    let before = secrecy::evaluate_unchecked(start, powers, cfg)?.total_rate();
    let after = secrecy::evaluate_unchecked(&candidate, powers, cfg)?.total_rate();
    if after < before {
        return stay(iters);
    }
    finish(surrogate, candidate, powers, cfg, false, iters)
}
