//! Brute-force verification tools.
//!
//! Nothing here calls into `specfun`, `secrecy` closed forms or the
//! subproblem solvers; the integrands are written out with elementary
//! functions only, so the checks stay independent of what they verify.

use thiserror::Error;

/// Refinement depth at which adaptive quadrature gives up.
pub const MAX_QUAD_DEPTH: usize = 60;
/// Largest grid `grid_search` will enumerate.
pub const MAX_GRID_POINTS: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("quadrature did not reach tolerance {tol:e} within {depth} refinement levels on [{lo}, {hi}]")]
    QuadratureNoConvergence { lo: f64, hi: f64, tol: f64, depth: usize },
    #[error("invalid tolerance {0}")]
    BadTolerance(f64),
    #[error("grid of {0} points exceeds the size guard")]
    GridTooLarge(f64),
    #[error("invalid grid: {0}")]
    BadGrid(String),
}

/// Quadrature value with its accumulated error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_bound: f64,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with Richardson
/// extrapolation. Each accepted panel contributes `|S₂ − S₁|/15` to the error
/// estimate; the per-panel tolerance halves with every split.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult, OracleError> {
    if !(tol > 0.0) {
        return Err(OracleError::BadTolerance(tol));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error_bound: 0.0 });
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let root = Panel { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb) };
    let mut value = 0.0;
    let mut error_bound = 0.0;
    // explicit stack, left panel processed first so summation order is fixed
    let mut stack = vec![(root, tol, 0usize)];
    while let Some((p, ptol, depth)) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        // panels whose estimate is already at rounding level cannot be improved
        let rounding = 8.0 * f64::EPSILON * (left.abs() + right.abs());
        if diff.abs() <= 15.0 * ptol || diff.abs() <= rounding {
            value += left + right + diff / 15.0;
            error_bound += diff.abs() / 15.0 + rounding;
        } else if depth >= MAX_QUAD_DEPTH {
            return Err(OracleError::QuadratureNoConvergence {
                lo: a,
                hi: b,
                tol,
                depth: MAX_QUAD_DEPTH,
            });
        } else {
            stack.push((
                Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right },
                0.5 * ptol,
                depth + 1,
            ));
            stack.push((
                Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left },
                0.5 * ptol,
                depth + 1,
            ));
        }
    }
    Ok(QuadResult { value, error_bound })
}

/// Upper integration limit beyond which `e^{−u/y}` contributes less than
/// `tail_tol` (the integrands below are bounded by `scale·e^{−u/y}`).
fn truncation_point(h_b: f64, y_e: f64, scale: f64, tail_tol: f64) -> (f64, f64) {
    // ∫_U^∞ scale·e^{−u/y} du = scale·y·e^{−U/y}
    let u = y_e * ((scale * y_e / tail_tol).max(1.0)).ln();
    if u >= h_b {
        (h_b, 0.0)
    } else {
        (u, scale * y_e * (-u / y_e).exp())
    }
}

/// `∫_0^{h_b} p_a e^{−h/y_e} / (1 + h p_a) dh` in nats, by adaptive
/// quadrature (the Eve-rate term).
pub fn quadrature_eve_term(h_b: f64, p_a: f64, y_e: f64, tol: f64) -> Result<QuadResult, OracleError> {
    if !(tol > 0.0) {
        return Err(OracleError::BadTolerance(tol));
    }
    if p_a == 0.0 || h_b == 0.0 {
        return Ok(QuadResult { value: 0.0, error_bound: 0.0 });
    }
    let (upper, tail) = truncation_point(h_b, y_e, p_a, 0.25 * tol);
    let q = adaptive_simpson(|h| p_a * (-h / y_e).exp() / (1.0 + h * p_a), 0.0, upper, 0.5 * tol)?;
    Ok(QuadResult { value: q.value, error_bound: q.error_bound + tail })
}

/// The per-slot secrecy rate in nats from its definition: the fading average
/// `∫_0^{h_b} [ln(1+h_b p_a) − ln(1+h p_a)] (1/y_e) e^{−h/y_e} dh`.
pub fn quadrature_definition_rate(h_b: f64, p_a: f64, y_e: f64, tol: f64) -> Result<QuadResult, OracleError> {
    if !(tol > 0.0) {
        return Err(OracleError::BadTolerance(tol));
    }
    if p_a == 0.0 || h_b == 0.0 {
        return Ok(QuadResult { value: 0.0, error_bound: 0.0 });
    }
    let bob = (h_b * p_a).ln_1p();
    let (upper, _) = truncation_point(h_b, y_e, bob / y_e, 0.25 * tol);
    let q = adaptive_simpson(
        |h| (bob - (h * p_a).ln_1p()) * (-h / y_e).exp() / y_e,
        0.0,
        upper,
        0.5 * tol,
    )?;
    // tail of the truncated part: integrand ≤ bob·(1/y)e^{−h/y}
    let tail = if upper < h_b { bob * (-upper / y_e).exp() } else { 0.0 };
    Ok(QuadResult { value: q.value, error_bound: q.error_bound + tail })
}

/// The per-slot secrecy rate in nats in its split form: Bob's log rate minus
/// the quadrature Eve term.
pub fn quadrature_split_rate(h_b: f64, p_a: f64, y_e: f64, tol: f64) -> Result<QuadResult, OracleError> {
    let eve = quadrature_eve_term(h_b, p_a, y_e, tol)?;
    Ok(QuadResult {
        value: (h_b * p_a).ln_1p() - eve.value,
        error_bound: eve.error_bound + f64::EPSILON * (h_b * p_a).ln_1p(),
    })
}

/// Axis-aligned grid for exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: usize,
    pub points_per_dim: usize,
    pub bounds: Vec<(f64, f64)>,
    /// Optional cap on the mean of the coordinates.
    pub coupling_cap: Option<f64>,
}

impl GridSpec {
    pub fn total_points(&self) -> f64 {
        (self.points_per_dim as f64).powi(self.dims as i32)
    }

    fn coordinate(&self, dim: usize, idx: usize) -> f64 {
        let (lo, hi) = self.bounds[dim];
        lo + (hi - lo) * idx as f64 / (self.points_per_dim - 1) as f64
    }
}

/// Best grid point found by [`grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Exhaustive maximization of `objective` over the grid. Points violating the
/// coupling cap are filtered out. Ties go to the lexicographically smallest
/// point. Returns `Ok(None)` when no grid point is feasible.
pub fn grid_search<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    spec: &GridSpec,
) -> Result<Option<GridOptimum>, OracleError> {
    if spec.points_per_dim < 2 {
        return Err(OracleError::BadGrid("points_per_dim must be at least 2".into()));
    }
    if spec.bounds.len() != spec.dims || spec.dims == 0 {
        return Err(OracleError::BadGrid(format!(
            "{} bounds for {} dims",
            spec.bounds.len(),
            spec.dims
        )));
    }
    // with nonnegative coordinates, a prefix over the cap rules out every
    // completion, so whole subtrees are skipped and only feasible points
    // count toward the size guard
    let prunable = spec.coupling_cap.is_some() && spec.bounds.iter().all(|&(lo, hi)| lo >= 0.0 && hi >= lo);
    if !prunable && spec.total_points() > MAX_GRID_POINTS {
        return Err(OracleError::GridTooLarge(spec.total_points()));
    }
    let cap_total = spec.coupling_cap.map(|c| c * spec.dims as f64 * (1.0 + 1e-12) + 1e-15);
    let over_cap = |idx: &[usize], upto: usize| match cap_total {
        Some(cap) => {
            let head: f64 = (0..=upto).map(|d| spec.coordinate(d, idx[d])).sum();
            let tail: f64 = spec.bounds[upto + 1..].iter().map(|b| b.0).sum();
            head + tail > cap
        }
        None => false,
    };
    let mut evaluated = 0.0;
    let mut idx = vec![0usize; spec.dims];
    let mut point = vec![0.0; spec.dims];
    let mut best: Option<GridOptimum> = None;
    // odometer order with the last dimension fastest is lexicographic order
    loop {
        for (d, &i) in idx.iter().enumerate() {
            point[d] = spec.coordinate(d, i);
        }
        let feasible = match spec.coupling_cap {
            Some(cap) => point.iter().sum::<f64>() / spec.dims as f64 <= cap * (1.0 + 1e-12) + 1e-15,
            None => true,
        };
        if feasible {
            evaluated += 1.0;
            if evaluated > MAX_GRID_POINTS {
                return Err(OracleError::GridTooLarge(evaluated));
            }
            let v = objective(&point);
            if best.as_ref().map_or(true, |b| v > b.value) {
                best = Some(GridOptimum { point: point.clone(), value: v });
            }
        }
        let mut d = spec.dims;
        loop {
            if d == 0 {
                return Ok(best);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < spec.points_per_dim && !(prunable && over_cap(&idx, d)) {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Central-difference check of an analytic gradient. Returns the worst
/// relative discrepancy `|fd − g| / max(|g|, |fd|)` over the coordinates.
pub fn finite_diff_check<F: Fn(&[f64]) -> f64>(f: F, point: &[f64], analytic: &[f64], h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let fp = f(&x);
        x[i] = point[i] - h;
        let fm = f(&x);
        x[i] = point[i];
        let fd = (fp - fm) / (2.0 * h);
        let scale = analytic[i].abs().max(fd.abs());
        let err = if scale == 0.0 { 0.0 } else { (fd - analytic[i]).abs() / scale };
        worst = worst.max(err);
    }
    worst
}

/// Central difference quotient of the per-slot rate (nats) in source power,
/// step `d`. The rate is `∫_0^h (1 − e^{−u/y}) p/(1+up) du`, so the quotient
/// is itself an integral and avoids the cancellation of differencing `f`.
pub fn source_power_difference(h_b: f64, p_a: f64, y_e: f64, d: f64) -> Result<f64, OracleError> {
    let magnitude = -(-h_b / y_e).exp_m1() * h_b / (1.0 + h_b * p_a).powi(2);
    if magnitude == 0.0 {
        return Ok(0.0);
    }
    let f = |u: f64| -(-u / y_e).exp_m1() / ((1.0 + u * (p_a + d)) * (1.0 + u * (p_a - d)));
    Ok(adaptive_simpson(f, 0.0, h_b, 1e-15 * magnitude)?.value)
}
