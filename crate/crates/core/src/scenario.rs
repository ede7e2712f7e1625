//! Problem geometry, physical constants and feasibility checks.
//!
//! Everything in [`ScenarioConfig`] is linear-scale (watts, dimensionless
//! gains, meters). The config file carries dB/dBm values; they are converted
//! once in [`ConfigFile::into_config`].

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geometric slack allowed by the trajectory feasibility predicates, meters.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.x, self.y, self.z)
    }
}

/// A node on the ground plane (z = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundNode {
    position: Vec3,
}

impl GroundNode {
    pub fn new(position: Vec3) -> Result<Self, ScenarioError> {
        if position.z != 0.0 || !position.is_finite() {
            return Err(ScenarioError::NotOnGround(position));
        }
        Ok(Self { position })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("ground node {0} must have z = 0")]
    NotOnGround(Vec3),
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonFinite,
    NonPositive,
    EllipseDegenerate,
    Unreachable,
    EndpointOffAltitude,
    EndpointOutsideEllipse,
    NodeOffGround,
    PowerBounds,
    SlotCount,
    SpeedLimit,
    FirstStep,
    FinalPoint,
    Altitude,
    OutsideEllipse,
    PeakPower,
    AveragePower,
}

/// One violated invariant and the amount by which it is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
    pub margin: f64,
}

impl Violation {
    fn new(kind: ViolationKind, message: impl Into<String>, margin: f64) -> Self {
        Self { kind, message: message.into(), margin }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (by {:.6e})", self.message, self.margin)
    }
}

/// All physical constants, node positions and flight/power limits.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub alice: GroundNode,
    pub bob: GroundNode,
    pub q0: Vec3,
    pub qf: Vec3,
    pub altitude: f64,
    pub speed: f64,
    pub slot_delta: f64,
    pub num_slots: usize,
    pub semi_major: f64,
    /// Reference SNR at 1 m, linear.
    pub beta0: f64,
    pub pathloss: f64,
    /// Eve's average received envelope power, linear.
    pub ye: f64,
    pub p_a_max: f64,
    pub p_a_avg: f64,
    pub p_u_max: f64,
    pub p_u_avg: f64,
    pub theta: f64,
    pub max_iters: usize,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ConfigFile::default().into_config()
    }
}

impl ScenarioConfig {
    /// Distance flown in one slot, `Vδ`.
    pub fn step_length(&self) -> f64 {
        self.speed * self.slot_delta
    }

    /// Total flight time `Nδ`.
    pub fn flight_time(&self) -> f64 {
        self.num_slots as f64 * self.slot_delta
    }

    pub fn d_ab(&self) -> f64 {
        self.alice.position().distance(self.bob.position())
    }

    /// Ground channel gain without jamming, `β₀ d_ab^{−ψ}`.
    pub fn ground_gain(&self) -> f64 {
        self.beta0 * self.d_ab().powf(-self.pathloss)
    }

    /// Copy with the UAV endpoints lifted to the configured altitude.
    pub fn with_altitude(mut self, h: f64) -> Self {
        self.altitude = h;
        self.q0.z = h;
        self.qf.z = h;
        self
    }

    /// Copy with the flight time changed by rescaling the slot length.
    pub fn with_flight_time(mut self, t: f64) -> Self {
        self.slot_delta = t / self.num_slots as f64;
        self
    }

    pub fn ensure_valid(&self) -> Result<(), ScenarioError> {
        let v = validate_config(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(v))
        }
    }
}

/// `2a − ‖q − w_a‖ − ‖q − w_b‖`: positive strictly inside the coverage
/// ellipse. Uses full 3-D distances.
pub fn ellipse_margin(q: Vec3, cfg: &ScenarioConfig) -> f64 {
    2.0 * cfg.semi_major - q.distance(cfg.alice.position()) - q.distance(cfg.bob.position())
}

/// Every violated scenario invariant; empty means valid.
pub fn validate_config(cfg: &ScenarioConfig) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let scalars = [
        ("altitude", cfg.altitude),
        ("speed", cfg.speed),
        ("slot length", cfg.slot_delta),
        ("semi-major axis", cfg.semi_major),
        ("beta0", cfg.beta0),
        ("ye", cfg.ye),
    ];
    for (name, v) in scalars {
        if !v.is_finite() {
            out.push(Violation::new(NonFinite, format!("{name} is not finite"), f64::INFINITY));
        } else if v <= 0.0 {
            out.push(Violation::new(NonPositive, format!("{name} must be positive"), -v));
        }
    }
    let others = [
        ("pathloss", cfg.pathloss),
        ("theta", cfg.theta),
        ("p_a_max", cfg.p_a_max),
        ("p_a_avg", cfg.p_a_avg),
        ("p_u_max", cfg.p_u_max),
        ("p_u_avg", cfg.p_u_avg),
    ];
    for (name, v) in others {
        if !v.is_finite() {
            out.push(Violation::new(NonFinite, format!("{name} is not finite"), f64::INFINITY));
        }
    }
    for (name, p) in [("q0", cfg.q0), ("qf", cfg.qf)] {
        if !p.is_finite() {
            out.push(Violation::new(NonFinite, format!("{name} is not finite"), f64::INFINITY));
        }
    }
    if !out.is_empty() {
        return out;
    }
    if cfg.theta < 0.0 {
        out.push(Violation::new(NonPositive, "theta must be nonnegative", -cfg.theta));
    }
    if cfg.num_slots == 0 {
        out.push(Violation::new(SlotCount, "num_slots must be at least 1", 1.0));
    }
    if cfg.max_iters == 0 {
        out.push(Violation::new(SlotCount, "max_iters must be at least 1", 1.0));
    }
    for (name, node) in [("alice", cfg.alice), ("bob", cfg.bob)] {
        if node.position().z != 0.0 {
            out.push(Violation::new(NodeOffGround, format!("{name} must be on the ground"), node.position().z.abs()));
        }
    }
    let focal = cfg.d_ab();
    if 2.0 * cfg.semi_major <= focal {
        out.push(Violation::new(
            EllipseDegenerate,
            format!("ellipse degenerate: 2a = {} does not exceed the Alice-Bob distance {}", 2.0 * cfg.semi_major, focal),
            focal - 2.0 * cfg.semi_major,
        ));
    }
    if focal == 0.0 {
        out.push(Violation::new(NonPositive, "alice and bob coincide", 0.0));
    }
    let reach = cfg.num_slots as f64 * cfg.step_length();
    let needed = cfg.q0.distance(cfg.qf);
    if reach < needed * (1.0 - 1e-12) {
        out.push(Violation::new(
            Unreachable,
            format!("unreachable final point: N*V*delta = {reach} < |qf - q0| = {needed}"),
            needed - reach,
        ));
    }
    for (name, p) in [("q0", cfg.q0), ("qf", cfg.qf)] {
        if p.z != cfg.altitude {
            out.push(Violation::new(
                EndpointOffAltitude,
                format!("{name} must fly at altitude {}", cfg.altitude),
                (p.z - cfg.altitude).abs(),
            ));
        }
        let m = ellipse_margin(p, cfg);
        if m < 0.0 {
            out.push(Violation::new(EndpointOutsideEllipse, format!("{name} lies outside the coverage ellipse"), -m));
        }
    }
    for (name, avg, max) in [("source", cfg.p_a_avg, cfg.p_a_max), ("UAV", cfg.p_u_avg, cfg.p_u_max)] {
        if avg < 0.0 {
            out.push(Violation::new(PowerBounds, format!("{name} average power is negative"), -avg));
        }
        if avg > max {
            out.push(Violation::new(PowerBounds, format!("{name} average power exceeds its peak"), avg - max));
        }
    }
    out
}

/// Ordered UAV sample points `q[1..=N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec3>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Violations of the flight constraints (speed chain, endpoints, ellipse,
    /// altitude), each allowed [`FEAS_TOL`] meters of slack.
    pub fn violations(&self, cfg: &ScenarioConfig) -> Vec<Violation> {
        use ViolationKind::*;
        let mut out = Vec::new();
        if self.points.len() != cfg.num_slots {
            out.push(Violation::new(
                SlotCount,
                format!("trajectory has {} points, expected {}", self.points.len(), cfg.num_slots),
                (self.points.len() as f64 - cfg.num_slots as f64).abs(),
            ));
            return out;
        }
        let step = cfg.step_length();
        let mut prev = cfg.q0;
        for (n, &q) in self.points.iter().enumerate() {
            let gap = q.distance(prev) - step;
            if gap > FEAS_TOL {
                let kind = if n == 0 { FirstStep } else { SpeedLimit };
                out.push(Violation::new(kind, format!("slot {}: step exceeds V*delta", n + 1), gap));
            }
            if (q.z - cfg.altitude).abs() > FEAS_TOL {
                out.push(Violation::new(Altitude, format!("slot {}: off altitude", n + 1), (q.z - cfg.altitude).abs()));
            }
            let m = ellipse_margin(q, cfg);
            if m < -FEAS_TOL {
                out.push(Violation::new(OutsideEllipse, format!("slot {}: outside ellipse", n + 1), -m));
            }
            prev = q;
        }
        if let Some(&last) = self.points.last() {
            let d = last.distance(cfg.qf);
            if d > FEAS_TOL {
                out.push(Violation::new(FinalPoint, "last point differs from qf", d));
            }
        }
        out
    }

    pub fn is_feasible(&self, cfg: &ScenarioConfig) -> bool {
        self.violations(cfg).is_empty()
    }
}

/// Per-slot source and jamming powers, watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSchedule {
    pub p_a: Vec<f64>,
    pub p_u: Vec<f64>,
}

impl PowerSchedule {
    pub fn constant(n: usize, p_a: f64, p_u: f64) -> Self {
        Self { p_a: vec![p_a; n], p_u: vec![p_u; n] }
    }

    pub fn len(&self) -> usize {
        self.p_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_a.is_empty()
    }

    pub fn violations(&self, cfg: &ScenarioConfig) -> Vec<Violation> {
        use ViolationKind::*;
        let mut out = Vec::new();
        let n = cfg.num_slots;
        if self.p_a.len() != n || self.p_u.len() != n {
            out.push(Violation::new(SlotCount, format!("power schedule length differs from N = {n}"), 0.0));
            return out;
        }
        let slack = |cap: f64| 1e-12 * cap.max(1e-300);
        for (label, powers, max, avg) in [
            ("p_a", &self.p_a, cfg.p_a_max, cfg.p_a_avg),
            ("p_u", &self.p_u, cfg.p_u_max, cfg.p_u_avg),
        ] {
            for (i, &p) in powers.iter().enumerate() {
                if !(p >= 0.0) || p > max + slack(max) {
                    let by = if p < 0.0 { -p } else { p - max };
                    out.push(Violation::new(PeakPower, format!("{label}[{}] outside [0, {max}]", i + 1), by));
                }
            }
            let mean = powers.iter().sum::<f64>() / n as f64;
            if mean > avg + slack(avg) {
                out.push(Violation::new(AveragePower, format!("mean {label} exceeds {avg}"), mean - avg));
            }
        }
        out
    }

    pub fn is_feasible(&self, cfg: &ScenarioConfig) -> bool {
        self.violations(cfg).is_empty()
    }
}

/// The direct flight: `N` equally spaced points on the segment `q0 → qf`,
/// ending at `qf`.
pub fn straight_line_trajectory(cfg: &ScenarioConfig) -> Result<Trajectory, ScenarioError> {
    cfg.ensure_valid()?;
    let n = cfg.num_slots;
    let delta = cfg.qf - cfg.q0;
    let points = (1..=n)
        .map(|i| {
            if i == n {
                cfg.qf
            } else {
                let mut p = cfg.q0 + delta * (i as f64 / n as f64);
                p.z = cfg.altitude;
                p
            }
        })
        .collect();
    Ok(Trajectory { points })
}

/// On-disk config: flat key/value TOML with dB-scale power and SNR entries.
/// Missing keys take the default scenario's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub alice_xyz: [f64; 3],
    pub bob_xyz: [f64; 3],
    pub q0_xyz: [f64; 3],
    pub qf_xyz: [f64; 3],
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub slot_s: f64,
    pub num_slots: usize,
    pub semi_major_m: f64,
    pub beta0_db: f64,
    pub pathloss: f64,
    pub ye_dbm: f64,
    pub pa_max_dbm: f64,
    pub pa_avg_dbm: f64,
    pub pu_max_dbm: f64,
    pub pu_avg_dbm: f64,
    pub theta: f64,
    pub max_iters: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            alice_xyz: [0.0, 0.0, 0.0],
            bob_xyz: [300.0, 0.0, 0.0],
            q0_xyz: [-100.0, 100.0, 100.0],
            qf_xyz: [500.0, 100.0, 100.0],
            altitude_m: 100.0,
            speed_mps: 3.0,
            slot_s: 0.5,
            num_slots: 400,
            semi_major_m: 450.0,
            beta0_db: 90.0,
            pathloss: 3.4,
            ye_dbm: 20.0,
            pa_max_dbm: 36.0,
            pa_avg_dbm: 30.0,
            // P_umax = 4 * P_ub
            pu_max_dbm: 10.0 + 10.0 * 4f64.log10(),
            pu_avg_dbm: 10.0,
            theta: 1e-5,
            max_iters: 200,
        }
    }
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Converts to linear units without validating. Ground nodes off the
    /// ground plane are kept as given and reported by `validate_config`.
    pub fn into_config(self) -> ScenarioConfig {
        ScenarioConfig {
            alice: GroundNode { position: Vec3::from_array(self.alice_xyz) },
            bob: GroundNode { position: Vec3::from_array(self.bob_xyz) },
            q0: Vec3::from_array(self.q0_xyz),
            qf: Vec3::from_array(self.qf_xyz),
            altitude: self.altitude_m,
            speed: self.speed_mps,
            slot_delta: self.slot_s,
            num_slots: self.num_slots,
            semi_major: self.semi_major_m,
            beta0: db_to_linear(self.beta0_db),
            pathloss: self.pathloss,
            ye: dbm_to_watts(self.ye_dbm),
            p_a_max: dbm_to_watts(self.pa_max_dbm),
            p_a_avg: dbm_to_watts(self.pa_avg_dbm),
            p_u_max: dbm_to_watts(self.pu_max_dbm),
            p_u_avg: dbm_to_watts(self.pu_avg_dbm),
            theta: self.theta,
            max_iters: self.max_iters,
        }
    }
}

/// Reads, converts and validates a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let cfg = ConfigFile::load(path)?.into_config();
    cfg.ensure_valid()?;
    Ok(cfg)
}
