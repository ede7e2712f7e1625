use crate::scenario::ScenarioConfig;

/// Planar slice of the coverage spheroid at the flight altitude.
///
/// With foci on the ground, `‖q − w_a‖ + ‖q − w_b‖ ≤ 2a` at height `H` is the
/// ellipse `u²/a² + v²/b² ≤ 1 − H²/b²`, `b² = a² − (d_ab/2)²`, in
/// coordinates `u` along the focal axis and `v` across it.
#[derive(Debug, Clone, Copy)]
pub struct PlanarEllipse {
    center: [f64; 2],
    axis: [f64; 2],
    semi_u: f64,
    semi_v: f64,
}

impl PlanarEllipse {
    /// `None` if the altitude is at or above the spheroid's minor radius.
    pub fn at_altitude(cfg: &ScenarioConfig) -> Option<Self> {
        let wa = cfg.alice.position();
        let wb = cfg.bob.position();
        let d = [wb.x - wa.x, wb.y - wa.y];
        let focal = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let a = cfg.semi_major;
        let b_sq = a * a - 0.25 * focal * focal;
        let h = cfg.altitude;
        if b_sq <= h * h {
            return None;
        }
        let shrink = (1.0 - h * h / b_sq).sqrt();
        let axis = if focal > 0.0 { [d[0] / focal, d[1] / focal] } else { [1.0, 0.0] };
        Some(Self {
            center: [0.5 * (wa.x + wb.x), 0.5 * (wa.y + wb.y)],
            axis,
            semi_u: a * shrink,
            semi_v: b_sq.sqrt() * shrink,
        })
    }

    fn to_local(&self, p: [f64; 2]) -> (f64, f64) {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        (dx * self.axis[0] + dy * self.axis[1], -dx * self.axis[1] + dy * self.axis[0])
    }

    fn to_world(&self, u: f64, v: f64) -> [f64; 2] {
        [
            self.center[0] + u * self.axis[0] - v * self.axis[1],
            self.center[1] + u * self.axis[1] + v * self.axis[0],
        ]
    }

    /// `1 − cᵀMc` at `p`, with `c` the offset from the center, together with
    /// `M c` and `M` in world coordinates. Positive strictly inside.
    pub fn slack(&self, p: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let [ux, uy] = self.axis;
        let (ia, ib) = (1.0 / (self.semi_u * self.semi_u), 1.0 / (self.semi_v * self.semi_v));
        // R diag(ia, ib) Rᵀ with R = [[ux, −uy], [uy, ux]]
        let m = [
            [ia * ux * ux + ib * uy * uy, (ia - ib) * ux * uy],
            [(ia - ib) * ux * uy, ia * uy * uy + ib * ux * ux],
        ];
        let c = [p[0] - self.center[0], p[1] - self.center[1]];
        let mc = [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]];
        (1.0 - c[0] * mc[0] - c[1] * mc[1], mc, m)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (u, v) = self.to_local(p);
        (u / self.semi_u).powi(2) + (v / self.semi_v).powi(2) <= 1.0
    }

    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        let (u0, v0) = self.to_local(p);
        let (a, b) = (self.semi_u, self.semi_v);
        if (u0 / a).powi(2) + (v0 / b).powi(2) <= 1.0 {
            return p;
        }
        // closest boundary point is (a²u0/(a²+t), b²v0/(b²+t)) with F(t) = 0
        let f = |t: f64| (a * u0 / (a * a + t)).powi(2) + (b * v0 / (b * b + t)).powi(2) - 1.0;
        let (mut lo, mut hi) = (0.0, a * u0.abs() + b * v0.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = hi;
        self.to_world(a * a * u0 / (a * a + t), b * b * v0 / (b * b + t))
    }
}
