//! Source-power and jamming-power subproblems.
//!
//! Source power: the per-slot rate `φ(p) = ∫_0^{h_b} (1 − e^{−u/y_e}) p/(1+u p) du`
//! is concave and increasing in `p`, so the average-power constraint is
//! handled with one multiplier `λ`: each slot maximizes `φ_n(p) − λp` by
//! bisection on `φ_n'`, and `λ` is found by an outer bisection.
//!
//! Jamming power: Eve's term is replaced by its tangent in `P_u` at the
//! current point. What remains per slot is Bob's rate
//! `ln(1 + A p_a/(B P_u + 1))` plus a linear term, which is *convex* in
//! `P_u`, so the surrogate is maximized exactly over the vertices of the
//! peak/average polytope rather than by a dual method.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::secrecy::{self, jammed_gain, SecrecyError};
use crate::specfun;

const SLOT_BISECTION_STEPS: usize = 200;
const LAMBDA_BISECTION_STEPS: usize = 200;
/// Upper limit of the multiplier search.
pub const LAMBDA_CAP: f64 = 1e12;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("invalid power subproblem: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Secrecy(#[from] SecrecyError),
    #[error(transparent)]
    SpecFun(#[from] specfun::SpecFunError),
}

/// Source-power subproblem for fixed trajectory and jamming.
#[derive(Debug, Clone, PartialEq)]
pub struct PaSubproblem {
    pub h_b: Vec<f64>,
    pub y_e: f64,
    pub p_a_max: f64,
    pub p_a_avg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaSolution {
    pub p_a: Vec<f64>,
    /// Multiplier of the average-power constraint, nats per watt.
    pub lambda: f64,
}

/// `dφ/dp` at `p = 0⁺`: `h_b − y_e (1 − e^{−h_b/y_e})`.
fn pa_slot_derivative_at_zero(h_b: f64, y_e: f64) -> f64 {
    h_b + y_e * (-h_b / y_e).exp_m1()
}

/// Derivative of the per-slot secrecy rate (nats) with respect to the
/// source power:
///
/// ```text
/// h_b/(1 + h_b p) − (1/(y_e p²)) e^{c} [Γ(−1, c) − Γ(−1, c + h_b/y_e)],  c = 1/(y_e p)
/// ```
///
/// evaluated with scaled incomplete gamma values.
pub fn pa_slot_derivative(p: f64, h_b: f64, y_e: f64) -> Result<f64, PowerError> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(PowerError::InvalidInput(format!("p = {p} must be positive")));
    }
    if !(y_e > 0.0) || !(h_b >= 0.0) {
        return Err(PowerError::InvalidInput(format!("h_b = {h_b}, y_e = {y_e}")));
    }
    if h_b == 0.0 {
        return Ok(0.0);
    }
    let c = 1.0 / (y_e * p);
    let b = h_b / y_e;
    let near = specfun::upper_gamma_m1_scaled(c)?.value;
    let far = specfun::upper_gamma_m1_scaled(c + b)?.value;
    // 1/(y p²) = y c²
    let eve = y_e * c * c * (near - (-b).exp() * far);
    Ok(h_b / (1.0 + h_b * p) - eve)
}

fn slot_derivative_or_zero_limit(p: f64, h_b: f64, y_e: f64) -> Result<f64, PowerError> {
    if p == 0.0 {
        Ok(pa_slot_derivative_at_zero(h_b, y_e))
    } else {
        pa_slot_derivative(p, h_b, y_e)
    }
}

/// argmax over `[0, p_max]` of `φ(p) − λp` for one slot.
fn pa_slot_argmax(h_b: f64, y_e: f64, p_max: f64, lambda: f64) -> Result<f64, PowerError> {
    if h_b == 0.0 || p_max == 0.0 {
        return Ok(0.0);
    }
    if slot_derivative_or_zero_limit(0.0, h_b, y_e)? <= lambda {
        return Ok(0.0);
    }
    if pa_slot_derivative(p_max, h_b, y_e)? >= lambda {
        return Ok(p_max);
    }
    let (mut lo, mut hi) = (0.0, p_max);
    for _ in 0..SLOT_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pa_slot_derivative(mid, h_b, y_e)? > lambda {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * p_max {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn pa_allocation(sub: &PaSubproblem, lambda: f64) -> Result<Vec<f64>, PowerError> {
    sub.h_b
        .iter()
        .map(|&h| pa_slot_argmax(h, sub.y_e, sub.p_a_max, lambda))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Maximizes `Σ_n φ_n(p_n)` subject to `0 ≤ p_n ≤ P_amax` and
/// `mean(p) ≤ P̄_ab`.
pub fn solve_pa(sub: &PaSubproblem) -> Result<PaSolution, PowerError> {
    if !(sub.p_a_avg >= 0.0) || !(sub.p_a_max >= sub.p_a_avg) {
        return Err(PowerError::InvalidInput(format!(
            "need 0 <= p_a_avg ({}) <= p_a_max ({})",
            sub.p_a_avg, sub.p_a_max
        )));
    }
    if !(sub.y_e > 0.0) {
        return Err(PowerError::InvalidInput(format!("y_e = {} must be positive", sub.y_e)));
    }
    if let Some(h) = sub.h_b.iter().find(|h| !(**h >= 0.0) || !h.is_finite()) {
        return Err(PowerError::InvalidInput(format!("gain {h} must be finite and nonnegative")));
    }
    let unconstrained = pa_allocation(sub, 0.0)?;
    if mean(&unconstrained) <= sub.p_a_avg {
        return Ok(PaSolution { p_a: unconstrained, lambda: 0.0 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut alloc = pa_allocation(sub, hi)?;
    while mean(&alloc) > sub.p_a_avg {
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_CAP {
            hi = LAMBDA_CAP;
            alloc = pa_allocation(sub, hi)?;
            break;
        }
        alloc = pa_allocation(sub, hi)?;
    }
    for _ in 0..LAMBDA_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        let trial = pa_allocation(sub, mid)?;
        if mean(&trial) > sub.p_a_avg {
            lo = mid;
        } else {
            hi = mid;
            alloc = trial;
        }
    }
    // keep the mean on the feasible side of the cap
    let m = mean(&alloc);
    if m > sub.p_a_avg {
        let s = sub.p_a_avg / m;
        alloc.iter_mut().for_each(|p| *p *= s);
    }
    Ok(PaSolution { p_a: alloc, lambda: hi })
}

/// `Σ_n` per-slot secrecy rate in nats for given source powers.
pub fn pa_objective_nats(sub: &PaSubproblem, p_a: &[f64]) -> Result<f64, PowerError> {
    let mut total = 0.0;
    for (&h, &p) in sub.h_b.iter().zip(p_a) {
        total += secrecy::slot_rate_nats(h, p, sub.y_e)?;
    }
    Ok(total)
}

/// Fixed per-slot quantities of the jamming subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuSlotContext {
    pub p_a: f64,
    pub d_ab: f64,
    pub d_qb: f64,
    pub beta0: f64,
    pub psi: f64,
    pub y_e: f64,
}

impl PuSlotContext {
    /// `β₀ d_ab^{−ψ}`
    pub fn ground(&self) -> f64 {
        self.beta0 * self.d_ab.powf(-self.psi)
    }

    /// `β₀ d_qb^{−2}`
    pub fn jam(&self) -> f64 {
        self.beta0 / (self.d_qb * self.d_qb)
    }

    pub fn gain(&self, p_u: f64) -> f64 {
        jammed_gain(self.ground(), self.jam(), p_u)
    }

    /// Bob's rate `ln(1 + h_b(P_u) p_a)`, nats.
    pub fn bob_rate(&self, p_u: f64) -> f64 {
        (self.gain(p_u) * self.p_a).ln_1p()
    }

    /// Eve's rate term at jamming power `p_u`, nats.
    pub fn eve_term(&self, p_u: f64) -> Result<f64, PowerError> {
        Ok(secrecy::eve_term_nats(self.gain(p_u), self.p_a, self.y_e)?)
    }

    /// Magnitude of the slope of Eve's term in `P_u`:
    ///
    /// ```text
    /// T = P_a A B e^{−h_b/y_e} / ((B P_u + 1)(P_a A + B P_u + 1))
    /// ```
    ///
    /// with `A = β₀ d_ab^{−ψ}`, `B = β₀ d_qb^{−2}`. Eve's term *decreases*
    /// with jamming, so its derivative is `−T`.
    pub fn eve_slope_magnitude(&self, p_u: f64) -> f64 {
        let a = self.ground();
        let b = self.jam();
        let h = self.gain(p_u);
        let x = b * p_u + 1.0;
        self.p_a * a * b * (-h / self.y_e).exp() / (x * (self.p_a * a + x))
    }
}

/// Tangent of Eve's term in `P_u` at the expansion point `P_u^k`:
/// `G_k − T_k (P_u − P_u^k)`, nats.
#[derive(Debug, Clone, PartialEq)]
pub struct PuSurrogate {
    pub expansion_point: Vec<f64>,
    pub g_k: Vec<f64>,
    pub t_k: Vec<f64>,
}

impl PuSurrogate {
    /// Surrogate of Eve's term in slot `n` at jamming power `p`.
    pub fn eve_surrogate(&self, n: usize, p: f64) -> f64 {
        self.g_k[n] - self.t_k[n] * (p - self.expansion_point[n])
    }
}

pub fn build_pu_surrogate(pu_k: &[f64], ctx: &[PuSlotContext]) -> Result<PuSurrogate, PowerError> {
    if pu_k.len() != ctx.len() {
        return Err(PowerError::InvalidInput("expansion point and context lengths differ".into()));
    }
    let mut g_k = Vec::with_capacity(ctx.len());
    let mut t_k = Vec::with_capacity(ctx.len());
    for (&p, c) in pu_k.iter().zip(ctx) {
        if !(p >= 0.0) {
            return Err(PowerError::InvalidInput(format!("expansion point {p} is negative")));
        }
        g_k.push(c.eve_term(p)?);
        t_k.push(c.eve_slope_magnitude(p));
    }
    Ok(PuSurrogate { expansion_point: pu_k.to_vec(), g_k, t_k })
}

/// Non-constant part of the surrogate jamming objective,
/// `Σ_n ln(1 + A p_a/(B P_u + 1)) + T_k P_u`, nats.
pub fn p3b_objective_nats(p_u: &[f64], surrogate: &PuSurrogate, ctx: &[PuSlotContext]) -> f64 {
    p_u.iter()
        .zip(ctx)
        .zip(&surrogate.t_k)
        .map(|((&p, c), &t)| c.bob_rate(p) + t * p)
        .sum()
}

/// True jamming objective `Σ_n` Bob − Eve, nats.
pub fn p3_objective_nats(p_u: &[f64], ctx: &[PuSlotContext]) -> Result<f64, PowerError> {
    let mut total = 0.0;
    for (&p, c) in p_u.iter().zip(ctx) {
        let bob = c.bob_rate(p);
        total += bob - c.eve_term(p)?.min(bob);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuSolution {
    pub p_u: Vec<f64>,
    /// Set when no candidate improved the true objective and the expansion
    /// point was returned.
    pub no_progress: bool,
}

/// Exact maximizer of `Σ_n s_n(p_n)` with every `s_n` convex, over
/// `0 ≤ p_n ≤ p_max`, `Σ p_n ≤ n·p_avg`. The optimum is a vertex: some slots
/// at `p_max`, at most one at the remainder, the rest at zero.
pub(crate) fn maximize_separable_convex<F: Fn(usize, f64) -> f64>(
    s: F,
    n: usize,
    p_max: f64,
    p_avg: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 || p_max <= 0.0 || p_avg <= 0.0 {
        return out;
    }
    let budget = n as f64 * p_avg;
    let full = ((budget / p_max) * (1.0 + 1e-12)).floor() as usize;
    let gain_full: Vec<f64> = (0..n).map(|i| s(i, p_max) - s(i, 0.0)).collect();
    if full >= n {
        for i in 0..n {
            if gain_full[i] > 0.0 {
                out[i] = p_max;
            }
        }
        return out;
    }
    let rest = (budget - full as f64 * p_max).clamp(0.0, p_max);
    let mut order: Vec<usize> = (0..n).filter(|&i| gain_full[i] > 0.0).collect();
    order.sort_by(|&a, &b| gain_full[b].total_cmp(&gain_full[a]).then(a.cmp(&b)));
    let top = full.min(order.len());
    let top_sum: f64 = order[..top].iter().map(|&i| gain_full[i]).sum();
    let next = order.get(top).map(|&i| gain_full[i]).unwrap_or(0.0);
    let in_top = |j: usize| order[..top].contains(&j);

    let mut best_value = top_sum;
    let mut best_partial: Option<usize> = None;
    if rest > 0.0 {
        for j in 0..n {
            let fj = s(j, rest) - s(j, 0.0);
            if fj <= 0.0 {
                continue;
            }
            let others = if in_top(j) { top_sum - gain_full[j] + next } else { top_sum };
            let v = fj + others;
            if v > best_value {
                best_value = v;
                best_partial = Some(j);
            }
        }
    }
    let mut count = 0;
    for &i in &order {
        if count == full {
            break;
        }
        if Some(i) == best_partial {
            continue;
        }
        out[i] = p_max;
        count += 1;
    }
    if let Some(j) = best_partial {
        out[j] = rest;
    }
    out
}

/// Exact maximizer of the surrogate jamming objective over the power
/// constraints. Lengths must already agree.
pub fn maximize_pu_surrogate(surrogate: &PuSurrogate, ctx: &[PuSlotContext], p_u_max: f64, p_u_avg: f64) -> Vec<f64> {
    maximize_separable_convex(|i, p| ctx[i].bob_rate(p) + surrogate.t_k[i] * p, ctx.len(), p_u_max, p_u_avg)
}

/// One SCA step for the jamming powers: maximize the surrogate objective
/// exactly, then keep the step only if the true objective does not drop
/// (halving toward the expansion point if needed).
pub fn solve_pu(
    surrogate: &PuSurrogate,
    ctx: &[PuSlotContext],
    p_u_max: f64,
    p_u_avg: f64,
) -> Result<PuSolution, PowerError> {
    let n = ctx.len();
    if surrogate.expansion_point.len() != n {
        return Err(PowerError::InvalidInput("surrogate and context lengths differ".into()));
    }
    if !(p_u_avg >= 0.0) || !(p_u_max >= p_u_avg) {
        return Err(PowerError::InvalidInput(format!(
            "need 0 <= p_u_avg ({p_u_avg}) <= p_u_max ({p_u_max})"
        )));
    }
    let candidate = maximize_pu_surrogate(surrogate, ctx, p_u_max, p_u_avg);
    let base = &surrogate.expansion_point;
    let base_true = p3_objective_nats(base, ctx)?;
    let base_sur = p3b_objective_nats(base, surrogate, ctx);
    let mut step = 1.0;
    for _ in 0..31 {
        let trial: Vec<f64> = base.iter().zip(&candidate).map(|(&b, &c)| b + step * (c - b)).collect();
        if p3_objective_nats(&trial, ctx)? >= base_true && p3b_objective_nats(&trial, surrogate, ctx) >= base_sur {
            let no_progress = trial == *base;
            return Ok(PuSolution { p_u: trial, no_progress });
        }
        step *= 0.5;
    }
    Ok(PuSolution { p_u: base.clone(), no_progress: true })
}

/// Convenience: objective values in bits.
pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}
