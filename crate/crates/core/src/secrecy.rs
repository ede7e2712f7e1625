//! The objective: Bob's jammed channel gain and the fading-averaged secrecy
//! rate per slot, in closed form and by quadrature.
//!
//! Per slot, with `c = 1/(y_e P_a)` and `b = h_b/y_e`,
//!
//! ```text
//! R = ln(1 + h_b P_a) − ∫_0^{h_b} P_a e^{−h/y_e} / (1 + h P_a) dh
//!   = ln(1 + h_b P_a) − e^{c} [Ei(−b − c) − Ei(−c)]
//!   = ln(1 + h_b P_a) − [e^{c}E1(c) − e^{−b} e^{b+c}E1(b+c)]
//! ```
//!
//! The first line is the fading average of `ln(1+h_b P) − ln(1+h_e P)` over
//! `h_e ∈ [0, h_b]` after integration by parts, which holds in natural
//! logarithms. All internal math is therefore in nats; public rates are
//! converted to bits at the boundary. The last line uses only scaled
//! exponential integrals, so nothing overflows as `P_a → 0`.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::oracle::{self, OracleError};
use crate::scenario::{PowerSchedule, ScenarioConfig, Trajectory, Violation};
use crate::specfun::{self, SpecFunError};

/// Absolute tolerance of [`slot_rate_quadrature`], nats.
pub const QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SecrecyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible trajectory or power schedule: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Infeasible(Vec<Violation>),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Quadrature(#[from] OracleError),
}

/// Distances that fix Bob's channel in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotGeometry {
    pub d_ab: f64,
    pub d_qb: f64,
}

impl SlotGeometry {
    pub fn new(d_ab: f64, d_qb: f64) -> Result<Self, SecrecyError> {
        if !(d_ab > 0.0) || !(d_qb > 0.0) {
            return Err(SecrecyError::InvalidInput(format!(
                "distances must be positive (d_ab = {d_ab}, d_qb = {d_qb})"
            )));
        }
        Ok(Self { d_ab, d_qb })
    }
}

/// Bob's channel gain under jamming,
/// `h_b = β₀ d_ab^{−ψ} / (P_u β₀ d_qb^{−2} + 1)`.
pub fn bob_gain(pu_n: f64, geom: SlotGeometry, beta0: f64, psi: f64) -> Result<f64, SecrecyError> {
    if !(pu_n >= 0.0) {
        return Err(SecrecyError::InvalidInput(format!("jamming power {pu_n} is negative")));
    }
    let geom = SlotGeometry::new(geom.d_ab, geom.d_qb)?;
    Ok(jammed_gain(beta0 * geom.d_ab.powf(-psi), beta0 / (geom.d_qb * geom.d_qb), pu_n))
}

/// `ground / (p_u·jam + 1)` where `jam = β₀/d_qb²`.
pub(crate) fn jammed_gain(ground: f64, jam: f64, p_u: f64) -> f64 {
    ground / (p_u * jam + 1.0)
}

/// Exponential density of Eve's channel power gain, `(1/y_e) e^{−h_e/y_e}`.
pub fn eve_pdf(h_e: f64, y_e: f64) -> Result<f64, SecrecyError> {
    if !(y_e > 0.0) {
        return Err(SecrecyError::InvalidInput(format!("y_e = {y_e} must be positive")));
    }
    if !(h_e >= 0.0) {
        return Err(SecrecyError::InvalidInput(format!("h_e = {h_e} must be nonnegative")));
    }
    Ok((-h_e / y_e).exp() / y_e)
}

fn check_slot_inputs(h_b: f64, p_a: f64, y_e: f64) -> Result<(), SecrecyError> {
    if !(y_e > 0.0) || !y_e.is_finite() {
        return Err(SecrecyError::InvalidInput(format!("y_e = {y_e} must be positive")));
    }
    if !(h_b >= 0.0) || !(p_a >= 0.0) || !h_b.is_finite() || !p_a.is_finite() {
        return Err(SecrecyError::InvalidInput(format!(
            "h_b = {h_b} and p_a = {p_a} must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// Eve's rate term `∫_0^{h_b} P_a e^{−h/y_e}/(1+h P_a) dh` in nats, closed form.
pub fn eve_term_nats(h_b: f64, p_a: f64, y_e: f64) -> Result<f64, SecrecyError> {
    check_slot_inputs(h_b, p_a, y_e)?;
    if p_a == 0.0 || h_b == 0.0 {
        return Ok(0.0);
    }
    let c = 1.0 / (y_e * p_a);
    let b = h_b / y_e;
    let near = specfun::e1_scaled(c)?.value;
    let far = specfun::e1_scaled(b + c)?.value;
    Ok((near - (-b).exp() * far).max(0.0))
}

/// Bob's and Eve's rate terms for one slot, nats.
pub fn slot_terms_nats(h_b: f64, p_a: f64, y_e: f64) -> Result<(f64, f64), SecrecyError> {
    let eve = eve_term_nats(h_b, p_a, y_e)?;
    Ok(((h_b * p_a).ln_1p(), eve))
}

/// Per-slot secrecy rate in nats, closed form.
pub fn slot_rate_nats(h_b: f64, p_a: f64, y_e: f64) -> Result<f64, SecrecyError> {
    let (bob, eve) = slot_terms_nats(h_b, p_a, y_e)?;
    Ok((bob - eve).max(0.0))
}

/// Per-slot secrecy rate in bits/channel-use, closed form.
pub fn slot_rate_closed(h_b: f64, p_a: f64, y_e: f64) -> Result<f64, SecrecyError> {
    Ok(slot_rate_nats(h_b, p_a, y_e)? / LN_2)
}

/// Per-slot secrecy rate in bits/channel-use with the Eve integral done by
/// adaptive quadrature. Used as the reference for [`slot_rate_closed`].
pub fn slot_rate_quadrature(h_b: f64, p_a: f64, y_e: f64) -> Result<f64, SecrecyError> {
    check_slot_inputs(h_b, p_a, y_e)?;
    let q = oracle::quadrature_split_rate(h_b, p_a, y_e, QUADRATURE_TOL)?;
    Ok(q.value / LN_2)
}

/// Per-slot and average rates, bits/channel-use.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyEvaluation {
    pub per_slot_bob: Vec<f64>,
    pub per_slot_eve: Vec<f64>,
    pub per_slot_net: Vec<f64>,
    pub average_rate: f64,
}

impl SecrecyEvaluation {
    /// Sum of per-slot net rates (the objective without the `1/N` factor).
    pub fn total_rate(&self) -> f64 {
        self.per_slot_net.iter().sum()
    }
}

/// Bob's gain in every slot for a trajectory and jamming schedule.
pub fn slot_gains(traj: &Trajectory, p_u: &[f64], cfg: &ScenarioConfig) -> Vec<f64> {
    let ground = cfg.ground_gain();
    let bob = cfg.bob.position();
    traj.points
        .iter()
        .zip(p_u)
        .map(|(q, &pu)| jammed_gain(ground, cfg.beta0 / q.distance(bob).powi(2), pu))
        .collect()
}

/// Rates without feasibility checks; for use inside the solvers.
pub(crate) fn evaluate_unchecked(
    traj: &Trajectory,
    powers: &PowerSchedule,
    cfg: &ScenarioConfig,
) -> Result<SecrecyEvaluation, SecrecyError> {
    let gains = slot_gains(traj, &powers.p_u, cfg);
    let n = gains.len();
    let mut per_slot_bob = Vec::with_capacity(n);
    let mut per_slot_eve = Vec::with_capacity(n);
    let mut per_slot_net = Vec::with_capacity(n);
    for (&h, &pa) in gains.iter().zip(&powers.p_a) {
        let (bob, eve) = slot_terms_nats(h, pa, cfg.ye)?;
        // the Eve integral never exceeds Bob's rate; clamp rounding
        let eve = eve.min(bob);
        per_slot_bob.push(bob / LN_2);
        per_slot_eve.push(eve / LN_2);
        per_slot_net.push((bob - eve) / LN_2);
    }
    let average_rate = if n == 0 { 0.0 } else { per_slot_net.iter().sum::<f64>() / n as f64 };
    Ok(SecrecyEvaluation { per_slot_bob, per_slot_eve, per_slot_net, average_rate })
}

/// Average secrecy rate of a feasible trajectory and power schedule.
pub fn evaluate(
    traj: &Trajectory,
    powers: &PowerSchedule,
    cfg: &ScenarioConfig,
) -> Result<SecrecyEvaluation, SecrecyError> {
    let mut v = crate::scenario::validate_config(cfg);
    if v.is_empty() {
        v.extend(traj.violations(cfg));
        v.extend(powers.violations(cfg));
    }
    if !v.is_empty() {
        return Err(SecrecyError::Infeasible(v));
    }
    evaluate_unchecked(traj, powers, cfg)
}
