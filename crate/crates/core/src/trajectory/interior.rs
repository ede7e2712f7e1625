//! Log-barrier Newton method for a concave objective over a planar chain
//! `x[0..=N]` with link constraints `‖x[i+1] − x[i]‖ ≤ r`, an ellipse
//! constraint on every free point, and one optional half-plane per point.
//! The Newton system is block tridiagonal with 2×2 blocks and is solved in
//! `O(N)`.

use super::ellipse::PlanarEllipse;

type Mat2 = [[f64; 2]; 2];
type Pt = [f64; 2];

const ZERO: Mat2 = [[0.0; 2]; 2];
const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
const BARRIER_GROWTH: f64 = 10.0;
const MAX_NEWTON: usize = 200;
const MAX_BACKTRACK: usize = 80;
/// Stop centering once the Newton decrement, in objective units, is below this.
const CENTERING_TOL: f64 = 1e-13;

/// Value, gradient and Hessian of one point's objective term.
#[derive(Debug, Clone, Copy)]
pub struct PointTerm {
    pub value: f64,
    pub grad: Pt,
    pub hess: Mat2,
}

pub struct ChainProblem<'a> {
    pub ellipse: PlanarEllipse,
    pub step: f64,
    pub fixed: Vec<bool>,
    /// `g·x + c > 0` for the point at the same index.
    pub halfplanes: Vec<Option<(Pt, f64)>>,
    /// Concave term of the point at a chain index.
    pub objective: &'a dyn Fn(usize, Pt) -> PointTerm,
}

#[derive(Debug, Clone)]
pub struct InteriorResult {
    pub points: Vec<Pt>,
    pub newton_steps: usize,
}

fn add(a: Mat2, b: Mat2, s: f64) -> Mat2 {
    [[a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]], [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]]]
}

fn outer(u: Pt, v: Pt) -> Mat2 {
    [[u[0] * v[0], u[0] * v[1]], [u[1] * v[0], u[1] * v[1]]]
}

fn mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn apply(a: Mat2, v: Pt) -> Pt {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn transpose(a: Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn inverse(a: Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

impl ChainProblem<'_> {
    fn link_slack(&self, pts: &[Pt], i: usize) -> f64 {
        let d = [pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]];
        self.step * self.step - d[0] * d[0] - d[1] * d[1]
    }

    fn link_active(&self, i: usize) -> bool {
        !(self.fixed[i] && self.fixed[i + 1])
    }

    fn halfplane(&self, i: usize, p: Pt) -> Option<(Pt, f64)> {
        self.halfplanes[i].map(|(g, c)| (g, g[0] * p[0] + g[1] * p[1] + c))
    }

    /// Number of barrier terms.
    pub fn constraint_count(&self) -> usize {
        let links = (0..self.fixed.len() - 1).filter(|&i| self.link_active(i)).count();
        let points = (0..self.fixed.len())
            .filter(|&i| !self.fixed[i])
            .map(|i| 1 + self.halfplanes[i].is_some() as usize)
            .sum::<usize>();
        links + points
    }

    /// True if every barrier term is finite at `pts`.
    pub fn strictly_feasible(&self, pts: &[Pt]) -> bool {
        (0..pts.len() - 1).all(|i| !self.link_active(i) || self.link_slack(pts, i) > 0.0)
            && (0..pts.len()).all(|i| {
                self.fixed[i]
                    || (self.ellipse.slack(pts[i]).0 > 0.0
                        && self.halfplane(i, pts[i]).map_or(true, |(_, s)| s > 0.0))
            })
    }

    pub fn objective_value(&self, pts: &[Pt]) -> f64 {
        (0..pts.len()).filter(|&i| !self.fixed[i]).map(|i| (self.objective)(i, pts[i]).value).sum()
    }

    /// `−t f + barrier`, or `None` outside the domain.
    fn merit(&self, pts: &[Pt], t: f64) -> Option<f64> {
        if !self.strictly_feasible(pts) {
            return None;
        }
        let mut g = -t * self.objective_value(pts);
        for i in 0..pts.len() - 1 {
            if self.link_active(i) {
                g -= self.link_slack(pts, i).ln();
            }
        }
        for i in 0..pts.len() {
            if self.fixed[i] {
                continue;
            }
            g -= self.ellipse.slack(pts[i]).0.ln();
            if let Some((_, s)) = self.halfplane(i, pts[i]) {
                g -= s.ln();
            }
        }
        Some(g)
    }

    /// Gradient, diagonal blocks and super-diagonal blocks of the merit.
    fn derivatives(&self, pts: &[Pt], t: f64) -> (Vec<Pt>, Vec<Mat2>, Vec<Mat2>) {
        let n = pts.len();
        let mut grad = vec![[0.0; 2]; n];
        let mut diag = vec![ZERO; n];
        let mut upper = vec![ZERO; n.saturating_sub(1)];
        for i in 0..n {
            if self.fixed[i] {
                continue;
            }
            let term = (self.objective)(i, pts[i]);
            grad[i] = [-t * term.grad[0], -t * term.grad[1]];
            diag[i] = add(diag[i], term.hess, -t);
            let (e, mc, m) = self.ellipse.slack(pts[i]);
            grad[i][0] += 2.0 * mc[0] / e;
            grad[i][1] += 2.0 * mc[1] / e;
            diag[i] = add(add(diag[i], m, 2.0 / e), outer(mc, mc), 4.0 / (e * e));
            if let Some((g, s)) = self.halfplane(i, pts[i]) {
                grad[i][0] -= g[0] / s;
                grad[i][1] -= g[1] / s;
                diag[i] = add(diag[i], outer(g, g), 1.0 / (s * s));
            }
        }
        for i in 0..n - 1 {
            if !self.link_active(i) {
                continue;
            }
            let s = self.link_slack(pts, i);
            let d = [pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]];
            let h = add(add(ZERO, IDENTITY, 2.0 / s), outer(d, d), 4.0 / (s * s));
            grad[i + 1][0] += 2.0 * d[0] / s;
            grad[i + 1][1] += 2.0 * d[1] / s;
            grad[i][0] -= 2.0 * d[0] / s;
            grad[i][1] -= 2.0 * d[1] / s;
            diag[i] = add(diag[i], h, 1.0);
            diag[i + 1] = add(diag[i + 1], h, 1.0);
            upper[i] = add(upper[i], h, -1.0);
        }
        for i in 0..n {
            if self.fixed[i] {
                grad[i] = [0.0; 2];
                diag[i] = IDENTITY;
                if i > 0 {
                    upper[i - 1] = ZERO;
                }
                if i + 1 < n {
                    upper[i] = ZERO;
                }
            }
        }
        (grad, diag, upper)
    }

    /// Newton direction `−H⁻¹ ∇` by block elimination.
    fn newton_direction(grad: &[Pt], diag: &[Mat2], upper: &[Mat2]) -> Option<Vec<Pt>> {
        let n = grad.len();
        let mut d_inv = Vec::with_capacity(n);
        let mut rhs: Vec<Pt> = grad.iter().map(|g| [-g[0], -g[1]]).collect();
        let mut d = diag[0];
        for i in 0..n {
            if i > 0 {
                let l = transpose(upper[i - 1]);
                let prev: Mat2 = d_inv[i - 1];
                let lp = mul(l, prev);
                d = add(diag[i], mul(lp, upper[i - 1]), -1.0);
                let r = apply(lp, rhs[i - 1]);
                rhs[i][0] -= r[0];
                rhs[i][1] -= r[1];
            }
            d_inv.push(inverse(d)?);
        }
        let mut x = vec![[0.0; 2]; n];
        for i in (0..n).rev() {
            let mut r = rhs[i];
            if i + 1 < n {
                let u = apply(upper[i], x[i + 1]);
                r[0] -= u[0];
                r[1] -= u[1];
            }
            x[i] = apply(d_inv[i], r);
        }
        Some(x)
    }

    fn center(&self, pts: &mut Vec<Pt>, t: f64) -> usize {
        let mut steps = 0;
        let Some(mut value) = self.merit(pts, t) else { return 0 };
        while steps < MAX_NEWTON {
            steps += 1;
            let (grad, diag, upper) = self.derivatives(pts, t);
            let Some(dir) = Self::newton_direction(&grad, &diag, &upper) else { break };
            let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g[0] * d[0] + g[1] * d[1]).sum();
            if !(slope < 0.0) || -0.5 * slope <= CENTERING_TOL * t {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..MAX_BACKTRACK {
                let trial: Vec<Pt> =
                    pts.iter().zip(&dir).map(|(p, d)| [p[0] + alpha * d[0], p[1] + alpha * d[1]]).collect();
                if let Some(v) = self.merit(&trial, t) {
                    if v <= value + 0.25 * alpha * slope {
                        *pts = trial;
                        value = v;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        steps
    }

    /// Maximizes the objective from a strictly feasible start until the
    /// barrier gap is below `gap_tol` (objective units).
    pub fn solve(&self, start: Vec<Pt>, gap_tol: f64) -> Option<InteriorResult> {
        if !self.strictly_feasible(&start) {
            return None;
        }
        let m = self.constraint_count() as f64;
        let mut pts = start;
        let mut t = 1.0;
        let mut newton_steps = 0;
        loop {
            newton_steps += self.center(&mut pts, t);
            if m / t <= gap_tol {
                break;
            }
            t *= BARRIER_GROWTH;
        }
        Some(InteriorResult { points: pts, newton_steps })
    }
}
