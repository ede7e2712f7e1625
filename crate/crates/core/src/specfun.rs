//! Exponential integrals and the upper incomplete gamma function Γ(−1, z).
//!
//! Sign convention: `Ei` is the standard principal-value exponential
//! integral, so for negative arguments `Ei(x) = −E1(−x)` and the value is
//! negative. This is the convention under which the closed-form slot rate
//! agrees with direct quadrature of the Eve integral (see `secrecy`).
//!
//! Two regimes are used for `E1`:
//!
//! ```text
//! z < 1   E1(z) = −γ − ln z − Σ_{k≥1} (−z)^k / (k·k!)
//! z ≥ 1   e^z E1(z) = 1/(z+1− 1²/(z+3− 2²/(z+5− …)))   (modified Lentz)
//! ```
//!
//! The continued fraction naturally produces the scaled value `e^z E1(z)`,
//! which is what the objective needs: the closed form multiplies `E1` by
//! `e^{1/(y_e P_a)}`, and working with scaled values avoids the overflow of
//! that prefactor when the source power is small.

use thiserror::Error;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_CUTOFF: f64 = 1.0;
const MAX_TERMS: usize = 5000;
const TINY: f64 = 1e-300;

/// Arguments below this underflow `Ei` to (signed) zero.
pub const EI_UNDERFLOW: f64 = -746.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("{func}: argument {arg} outside the supported domain ({domain})")]
    Domain {
        func: &'static str,
        arg: f64,
        domain: &'static str,
    },
    #[error("{func}: no convergence after {iters} terms at argument {arg}")]
    NoConvergence {
        func: &'static str,
        arg: f64,
        iters: usize,
    },
}

/// A special-function value together with a computed bound on its
/// absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFunResult {
    pub value: f64,
    pub est_abs_error: f64,
    /// Set when the true value is below the smallest representable
    /// magnitude and `value` is a signed zero.
    pub underflow: bool,
}

impl SpecFunResult {
    fn new(value: f64, est_abs_error: f64) -> Self {
        Self {
            value,
            est_abs_error: est_abs_error.abs(),
            underflow: false,
        }
    }
}

/// Power series for `E1(z)`, valid (and used) for small `z`.
/// Returns `(value, error bound)`.
pub(crate) fn e1_series(z: f64) -> Result<(f64, f64), SpecFunError> {
    let mut sum = 0.0;
    let mut term = 1.0; // (−z)^k / k!
    let mut abs_sum = 0.0;
    for k in 1..MAX_TERMS {
        term *= -z / k as f64;
        let contrib = term / k as f64;
        sum += contrib;
        abs_sum += contrib.abs();
        // alternating series with decreasing terms once k > z: next term bounds the tail
        let next = (term * z / (k + 1) as f64 / (k + 1) as f64).abs();
        if k as f64 > z && next <= f64::EPSILON * sum.abs().max(TINY) * 0.5 {
            let value = -EULER_GAMMA - z.ln() - sum;
            let rounding = f64::EPSILON * (abs_sum + z.ln().abs() + EULER_GAMMA + value.abs());
            return Ok((value, next + rounding));
        }
    }
    Err(SpecFunError::NoConvergence {
        func: "e1_series",
        arg: z,
        iters: MAX_TERMS,
    })
}

/// Continued fraction for `x^{-a} e^x Γ(a, x)` with `a ≤ 0`, by the modified
/// Lentz method. With `a = 0` this is `e^x E1(x)`.
fn upper_gamma_cf_scaled(a: f64, x: f64) -> Result<(f64, f64), SpecFunError> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            // truncation ~ |del − 1|·h, plus accumulated rounding of the product
            let err = h.abs() * ((del - 1.0).abs() + 4.0 * f64::EPSILON * i as f64);
            return Ok((h, err));
        }
    }
    Err(SpecFunError::NoConvergence {
        func: "upper_gamma_cf",
        arg: x,
        iters: MAX_TERMS,
    })
}

pub(crate) fn e1_cf_scaled(z: f64) -> Result<(f64, f64), SpecFunError> {
    upper_gamma_cf_scaled(0.0, z)
}

/// Scaled exponential integral `e^z E1(z)` for `z > 0`.
///
/// Finite for all positive arguments; behaves like `1/z` for large `z`.
pub fn e1_scaled(z: f64) -> Result<SpecFunResult, SpecFunError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(SpecFunError::Domain {
            func: "e1_scaled",
            arg: z,
            domain: "z > 0",
        });
    }
    if z < SERIES_CUTOFF {
        let (v, err) = e1_series(z)?;
        let ez = z.exp();
        Ok(SpecFunResult::new(v * ez, err * ez + f64::EPSILON * (v * ez).abs()))
    } else {
        let (v, err) = e1_cf_scaled(z)?;
        Ok(SpecFunResult::new(v, err))
    }
}

/// Exponential integral `E1(z) = ∫_z^∞ e^{−t}/t dt` for `z > 0`.
pub fn expint_e1(z: f64) -> Result<SpecFunResult, SpecFunError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(SpecFunError::Domain {
            func: "expint_e1",
            arg: z,
            domain: "z > 0",
        });
    }
    if z < SERIES_CUTOFF {
        let (v, err) = e1_series(z)?;
        return Ok(SpecFunResult::new(v, err));
    }
    let (s, err) = e1_cf_scaled(z)?;
    let emz = (-z).exp();
    let value = s * emz;
    let mut r = SpecFunResult::new(value, err * emz + f64::EPSILON * value);
    r.underflow = value == 0.0;
    Ok(r)
}

/// Principal-value exponential integral `Ei(x)` for `x < 0`.
///
/// Negative and decreasing on `(−∞, 0)`: `Ei(−∞) = 0⁻`, `Ei(0⁻) = −∞`.
/// Below [`EI_UNDERFLOW`] the result is `−0.0` with `underflow` set.
pub fn expint_ei_neg(x: f64) -> Result<SpecFunResult, SpecFunError> {
    if !(x < 0.0) || x.is_nan() {
        return Err(SpecFunError::Domain {
            func: "expint_ei_neg",
            arg: x,
            domain: "x < 0",
        });
    }
    if x < EI_UNDERFLOW {
        return Ok(SpecFunResult {
            value: -0.0,
            est_abs_error: 0.0,
            underflow: true,
        });
    }
    let e1 = expint_e1(-x)?;
    Ok(SpecFunResult {
        value: -e1.value,
        ..e1
    })
}

/// Scaled `e^z Γ(−1, z)` for `z > 0`; behaves like `1/z²` for large `z`.
pub fn upper_gamma_m1_scaled(z: f64) -> Result<SpecFunResult, SpecFunError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(SpecFunError::Domain {
            func: "upper_gamma_m1_scaled",
            arg: z,
            domain: "z > 0",
        });
    }
    if z < SERIES_CUTOFF {
        // no cancellation here: 1/z > 1 while e^z E1(z) < 0.6
        let s = e1_scaled(z)?;
        let value = 1.0 / z - s.value;
        Ok(SpecFunResult::new(
            value,
            s.est_abs_error + f64::EPSILON * (1.0 / z + value.abs()),
        ))
    } else {
        let (h, err) = upper_gamma_cf_scaled(-1.0, z)?;
        Ok(SpecFunResult::new(h / z, err / z))
    }
}

/// Upper incomplete gamma `Γ(−1, z) = e^{−z}/z − E1(z)` for `z > 0`.
///
/// Always positive and strictly below `e^{−z}/z`.
pub fn upper_gamma_m1(z: f64) -> Result<SpecFunResult, SpecFunError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(SpecFunError::Domain {
            func: "upper_gamma_m1",
            arg: z,
            domain: "z > 0",
        });
    }
    if z < SERIES_CUTOFF {
        let e1 = expint_e1(z)?;
        let lead = (-z).exp() / z;
        let value = lead - e1.value;
        return Ok(SpecFunResult::new(
            value,
            e1.est_abs_error + f64::EPSILON * (lead + value.abs()),
        ));
    }
    let g = upper_gamma_m1_scaled(z)?;
    let emz = (-z).exp();
    let value = g.value * emz;
    let mut r = SpecFunResult::new(value, g.est_abs_error * emz + f64::EPSILON * value);
    r.underflow = value == 0.0;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn known_values() {
        // E1(1) = 0.21938393439552027368 (A&S table 5.1)
        let e1 = expint_e1(1.0).unwrap();
        assert!((e1.value - 0.219_383_934_395_520_27).abs() < 1e-15);
        assert!(e1.est_abs_error < 1e-12);
        let ei = expint_ei_neg(-1.0).unwrap();
        assert!((ei.value + 0.219_383_934_395_520_27).abs() < 1e-15);
        // E1(0.5) = 0.55977359477616081
        assert!((expint_e1(0.5).unwrap().value - 0.559_773_594_776_160_8).abs() < 1e-15);
        // E1(10) = 4.1569689296853242e-6
        assert!(rel(expint_e1(10.0).unwrap().value, 4.156_968_929_685_324e-6) < 1e-13);
    }

    #[test]
    fn ei_is_negative_and_decreasing_on_negative_axis() {
        let a = expint_ei_neg(-2.0).unwrap().value;
        let b = expint_ei_neg(-1.0).unwrap().value;
        assert!(a < 0.0 && b < 0.0);
        assert!(a > b);
        assert!(expint_ei_neg(-700.0).unwrap().value > -1e-300);
    }

    #[test]
    fn ei_underflow_and_domain() {
        let r = expint_ei_neg(-800.0).unwrap();
        assert!(r.underflow);
        assert_eq!(r.value, 0.0);
        assert!(r.value.is_sign_negative());
        assert!(expint_ei_neg(0.0).is_err());
        assert!(expint_ei_neg(1.0).is_err());
        assert!(expint_e1(0.0).is_err());
        assert!(expint_e1(-1.0).is_err());
        assert!(upper_gamma_m1(0.0).is_err());
        assert!(upper_gamma_m1_scaled(f64::NAN).is_err());
    }

    #[test]
    fn e1_small_argument_stays_finite() {
        let z = 1e-300;
        let v = expint_e1(z).unwrap().value;
        assert!(v.is_finite());
        assert!(rel(v, -z.ln() - EULER_GAMMA) < 1e-15);
    }

    #[test]
    fn e1_asymptotic_leading_term() {
        for z in [50.0, 200.0, 600.0] {
            let v = e1_scaled(z).unwrap().value * z;
            // e^z E1(z) z = 1 − 1/z + 2/z² − …
            assert!((v - (1.0 - 1.0 / z + 2.0 / (z * z))).abs() < 6.0 / z.powi(3));
        }
    }

    #[test]
    fn series_and_fraction_agree_in_overlap_band() {
        let mut z = 0.8;
        while z <= 1.25 {
            let (s, _) = e1_series(z).unwrap();
            let (cf, _) = e1_cf_scaled(z).unwrap();
            assert!((s - cf * (-z).exp()).abs() < 1e-12, "z = {z}");
            z += 0.01;
        }
    }

    #[test]
    fn gamma_m1_recurrence_and_bounds() {
        for i in 0..50 {
            let z = 1e-6 * (50.0f64 / 1e-6).powf(i as f64 / 49.0);
            let g = upper_gamma_m1(z).unwrap().value;
            let e1 = expint_e1(z).unwrap().value;
            assert!((g - ((-z).exp() / z - e1)).abs() <= 1e-12 * (1.0 / z).max(1.0));
            assert!(g > 0.0);
            assert!(g < (-z).exp() / z);
            let ei = expint_ei_neg(-z).unwrap().value;
            assert!((ei + e1).abs() <= 1e-13 * e1.abs());
        }
    }

    #[test]
    fn gamma_m1_asymptotic() {
        for z in [100.0, 400.0] {
            let v = upper_gamma_m1_scaled(z).unwrap().value * z * z;
            assert!((v - 1.0).abs() < 3.0 / z);
        }
    }

    #[test]
    fn scaled_gamma_branches_agree_across_cutoff() {
        for z in [0.9, 0.99, 1.0, 1.01, 1.2] {
            let cf = upper_gamma_cf_scaled(-1.0, z).unwrap().0 / z;
            let direct = 1.0 / z - e1_scaled(z).unwrap().value;
            assert!((cf - direct).abs() < 1e-12, "z = {z}");
        }
    }
}
