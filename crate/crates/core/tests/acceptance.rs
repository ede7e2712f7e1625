//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::LN_2;
use std::fs;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uavjam::bcd;
use uavjam::cli::{self, Overrides, SweepParameter, SweepSpec};
use uavjam::oracle::{self, GridSpec};
use uavjam::power_alloc::{self, PaSubproblem, PuSlotContext};
use uavjam::scenario::{
    straight_line_trajectory, validate_config, GroundNode, PowerSchedule, ScenarioConfig, Trajectory, Vec3,
};
use uavjam::secrecy;
use uavjam::specfun;
use uavjam::trajectory::{self, PlanarEllipse, SlotModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn table_one_with_flight_time(n: usize, t: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.num_slots = n;
    cfg.with_flight_time(t)
}

fn closed_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (h, p, y) = cli::sample_slot_inputs(&mut rng);
        let c = secrecy::slot_rate_closed(h, p, y).unwrap();
        let q = secrecy::slot_rate_quadrature(h, p, y).unwrap();
        worst = worst.max((c - q).abs() / c.abs().max(1.0));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(10),
        format!("1000 tuples, worst scaled gap {worst:.2e} (tol 1e-8), {:.2} s", elapsed.as_secs_f64()),
    )
}

fn definition_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (h, p, y) = cli::sample_slot_inputs(&mut rng);
        let def = oracle::quadrature_definition_rate(h, p, y, 1e-13).unwrap().value / LN_2;
        let closed = secrecy::slot_rate_closed(h, p, y).unwrap();
        let split = oracle::quadrature_split_rate(h, p, y, 1e-13).unwrap().value / LN_2;
        worst = worst.max((def - closed).abs()).max((def - split).abs());
    }
    outcome(worst <= 1e-10, format!("200 tuples, worst absolute gap {worst:.2e} bits (tol 1e-10)"))
}

fn special_functions() -> Outcome {
    // ∫_1^∞ t^{−k} e^{−t} dt with t = 1 + s, truncated where e^{−s} < 1e−20
    let tail = |k: i32| {
        oracle::adaptive_simpson(|s: f64| (1.0 + s).powi(-k) * (-(1.0 + s)).exp(), 0.0, 46.0, 1e-15)
            .unwrap()
            .value
    };
    let e1_gap = (specfun::expint_e1(1.0).unwrap().value - tail(1)).abs();
    let g_gap = (specfun::upper_gamma_m1(1.0).unwrap().value - tail(2)).abs();
    let mut rec: f64 = 0.0;
    for k in 0..50 {
        let z = 10f64.powf(-6.0 + (50f64.log10() + 6.0) * k as f64 / 49.0);
        let lhs = specfun::upper_gamma_m1(z).unwrap().value;
        let rhs = (-z).exp() / z - specfun::expint_e1(z).unwrap().value;
        rec = rec.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    outcome(
        e1_gap <= 1e-12 && g_gap <= 1e-12 && rec <= 1e-12,
        format!("E1(1) gap {e1_gap:.1e}, Gamma(-1,1) gap {g_gap:.1e}, recurrence worst {rec:.1e} (tol 1e-12)"),
    )
}

fn pa_grid_gap() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4A);
    let cfg = ScenarioConfig::default();
    let h_b: Vec<f64> = (0..4).map(|_| 10f64.powf(rng.gen_range(-1.5..1.0))).collect();
    let sub = PaSubproblem { h_b: h_b.clone(), y_e: cfg.ye, p_a_max: cfg.p_a_max, p_a_avg: cfg.p_a_max / 4.0 };
    let sol = power_alloc::solve_pa(&sub).unwrap();
    let solver = power_alloc::pa_objective_nats(&sub, &sol.p_a).unwrap() / LN_2;
    let delta = cfg.p_a_max / 200.0;
    // the grid objective is separable: tabulate each slot once
    let table: Vec<Vec<f64>> = h_b
        .iter()
        .map(|&h| (0..=200).map(|k| secrecy::slot_rate_closed(h, k as f64 * delta, cfg.ye).unwrap()).collect())
        .collect();
    let spec = GridSpec { dims: 4, points_per_dim: 201, bounds: vec![(0.0, cfg.p_a_max); 4], coupling_cap: Some(sub.p_a_avg) };
    let best = oracle::grid_search(
        |x| x.iter().enumerate().map(|(n, &p)| table[n][(p / delta).round() as usize]).sum(),
        &spec,
    )
    .unwrap()
    .unwrap();
    best.value - solver
}

fn pu_contexts(p_a: f64, d_qb: &[f64], cfg: &ScenarioConfig) -> Vec<PuSlotContext> {
    d_qb.iter()
        .map(|&d| PuSlotContext { p_a, d_ab: cfg.d_ab(), d_qb: d, beta0: cfg.beta0, psi: cfg.pathloss, y_e: cfg.ye })
        .collect()
}

fn pu_grid_gap() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4B);
    let cfg = ScenarioConfig::default();
    let d_qb: Vec<f64> = (0..3).map(|_| rng.gen_range(110.0..500.0)).collect();
    let ctx = pu_contexts(cfg.p_a_avg, &d_qb, &cfg);
    let sur = power_alloc::build_pu_surrogate(&[cfg.p_u_avg; 3], &ctx).unwrap();
    let p_avg = cfg.p_u_max / 4.0;
    let x = power_alloc::maximize_pu_surrogate(&sur, &ctx, cfg.p_u_max, p_avg);
    let solver = power_alloc::p3b_objective_nats(&x, &sur, &ctx) / LN_2;
    let spec = GridSpec { dims: 3, points_per_dim: 201, bounds: vec![(0.0, cfg.p_u_max); 3], coupling_cap: Some(p_avg) };
    let best = oracle::grid_search(|p| power_alloc::p3b_objective_nats(p, &sur, &ctx) / LN_2, &spec).unwrap().unwrap();
    best.value - solver
}

fn two_slot_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.num_slots = 2;
    cfg.slot_delta = 120.0;
    cfg
}

fn traj_grid_gap() -> f64 {
    let cfg = two_slot_config();
    let traj = straight_line_trajectory(&cfg).unwrap();
    let powers = PowerSchedule::constant(2, cfg.p_a_avg, cfg.p_u_avg);
    let sur = trajectory::build_traj_surrogate(&traj, &powers, &cfg).unwrap();
    let sol = trajectory::solve_traj(&sur, &powers, &cfg).unwrap();
    let ellipse = PlanarEllipse::at_altitude(&cfg).unwrap();
    let r = cfg.step_length();
    let surrogate_bits = |q: Vec3| {
        let mut total = 0.0;
        for (n, p) in [q, cfg.qf].into_iter().enumerate() {
            let m = sur.slack_for(n, sur.linearized_distance(n, p));
            total += sur.slots[n].bob_rate(m) - sur.eve_bound(n, m);
        }
        total / LN_2
    };
    let spec = GridSpec {
        dims: 2,
        points_per_dim: 2001,
        bounds: vec![(cfg.qf.x - r, cfg.q0.x + r), (cfg.q0.y - r, cfg.q0.y + r)],
        coupling_cap: None,
    };
    let best = oracle::grid_search(
        |x| {
            let q = Vec3::new(x[0], x[1], cfg.altitude);
            let ok = q.distance(cfg.q0) <= r && q.distance(cfg.qf) <= r && ellipse.contains([x[0], x[1]]);
            if ok && sur.linearized_distance(0, q) > 0.0 {
                surrogate_bits(q)
            } else {
                f64::NEG_INFINITY
            }
        },
        &spec,
    )
    .unwrap()
    .unwrap();
    best.value - surrogate_bits(sol.trajectory.points[0])
}

fn subproblem_optimality() -> Outcome {
    let start = Instant::now();
    let pa = pa_grid_gap();
    let pu = pu_grid_gap();
    let tr = traj_grid_gap();
    let elapsed = start.elapsed();
    outcome(
        pa <= 1e-4 && pu <= 1e-4 && tr <= 1e-3 && elapsed < Duration::from_secs(120),
        format!(
            "grid minus solver: source {pa:.2e}, jamming {pu:.2e} (tol 1e-4), path {tr:.2e} (tol 1e-3) bits; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn surrogate_soundness() -> Outcome {
    let cfg = table_one_with_flight_time(60, 300.0);
    let traj = straight_line_trajectory(&cfg).unwrap();
    let bob = cfg.bob.position();
    let d_qb: Vec<f64> = traj.points.iter().map(|q| q.distance(bob)).collect();

    // jamming tangent in P_u
    let ctx = pu_contexts(cfg.p_a_avg, &d_qb, &cfg);
    let pu_k = vec![cfg.p_u_avg; ctx.len()];
    let sur = power_alloc::build_pu_surrogate(&pu_k, &ctx).unwrap();
    let (mut pu_tangent, mut pu_violation, mut pu_bad) = (0.0f64, 0.0f64, 0usize);
    for (n, c) in ctx.iter().enumerate() {
        pu_tangent = pu_tangent.max((sur.eve_surrogate(n, pu_k[n]) - c.eve_term(pu_k[n]).unwrap()).abs());
        let mut bad = false;
        for k in 0..100 {
            let p = cfg.p_u_max * k as f64 / 99.0;
            let v = c.eve_term(p).unwrap() - sur.eve_surrogate(n, p);
            pu_violation = pu_violation.max(v);
            bad |= v > 1e-10;
        }
        pu_bad += bad as usize;
    }

    // distance tangent in m
    let powers = PowerSchedule::constant(cfg.num_slots, cfg.p_a_avg, cfg.p_u_avg);
    let ts = trajectory::build_traj_surrogate(&traj, &powers, &cfg).unwrap();
    let (mut m_tangent, mut m_violation) = (0.0f64, 0.0f64);
    let (lo, hi) = (cfg.altitude.powi(2), (2.0 * cfg.semi_major).powi(2));
    for n in 0..cfg.num_slots {
        let s = ts.slots[n];
        m_tangent = m_tangent.max((ts.eve_bound(n, ts.m_k[n]) - s.eve_term(ts.m_k[n]).unwrap()).abs());
        for k in 0..100 {
            let m = lo * (hi / lo).powf(k as f64 / 99.0);
            m_violation = m_violation.max(s.eve_term(m).unwrap() - ts.eve_bound(n, m));
        }
    }
    let pass = pu_tangent <= 1e-10 && pu_violation <= 1e-10 && m_tangent <= 1e-10 && m_violation <= 1e-10;
    outcome(
        pass,
        format!(
            "jamming tangent gap {pu_tangent:.1e}, bound violated in {pu_bad}/{} slots (worst {pu_violation:.2e}); \
             distance tangent gap {m_tangent:.1e}, worst violation {m_violation:.1e}",
            ctx.len()
        ),
    )
}

fn monotone(trace: &[f64], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - slack)
}

fn convergence() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [200.0, 250.0, 300.0] {
        let cfg = table_one_with_flight_time(120, t);
        let start = Instant::now();
        let r = bcd::run(&cfg).unwrap();
        let elapsed = start.elapsed();
        let e = *r.relative_errors.last().unwrap();
        let ok = monotone(&r.objective_trace, 1e-9)
            && r.stop_reason == bcd::StopReason::Converged
            && e < cfg.theta
            && r.iterations <= 200
            && elapsed < Duration::from_secs(300);
        pass &= ok;
        parts.push(format!(
            "T={t}s: {} sweeps, {} , rs {:.6e}, {:.1} s",
            r.iterations,
            r.stop_reason,
            r.final_rate(),
            elapsed.as_secs_f64()
        ));
    }
    outcome(pass, parts.join("; "))
}

/// Feasible scenario drawn around the default geometry.
fn random_scenario(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    loop {
        let mut cfg = ScenarioConfig::default();
        cfg.num_slots = 40;
        cfg.bob = GroundNode::new(Vec3::new(rng.gen_range(150.0..400.0), rng.gen_range(-50.0..50.0), 0.0)).unwrap();
        cfg.ye = 10f64.powf(rng.gen_range(-2.0..0.5));
        cfg.speed = rng.gen_range(2.0..5.0);
        cfg = cfg.with_altitude(rng.gen_range(60.0..140.0));
        let span = cfg.q0.distance(cfg.qf);
        let t = span / cfg.speed * rng.gen_range(1.0..1.6);
        cfg = cfg.with_flight_time(t);
        if validate_config(&cfg).is_empty() {
            return cfg;
        }
    }
}

fn scheme_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut worst_gap = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..20 {
        let cfg = random_scenario(&mut rng);
        let opt = bcd::run(&cfg).unwrap();
        let base = bcd::run_baseline_straight(&cfg).unwrap();
        worst_gap = worst_gap.min(opt.final_rate() - base.final_rate());
        violations += opt.final_traj.violations(&cfg).len() + opt.final_powers.violations(&cfg).len();
    }
    outcome(
        worst_gap >= 0.0 && violations == 0,
        format!("20 scenarios, smallest optimized-minus-straight gap {worst_gap:.3e}, {violations} violations"),
    )
}

fn sweep_rates(parameter: SweepParameter, values: &[f64], base: &ScenarioConfig) -> Vec<f64> {
    let spec = SweepSpec { parameter, values: values.to_vec(), base_config: base.clone() };
    cli::run_sweep(&spec, Overrides::default())
        .into_iter()
        .map(|r| r.rs_optimized.unwrap_or(f64::NAN))
        .collect()
}

fn slots_near_uav(traj: &Trajectory, cfg: &ScenarioConfig) -> Vec<usize> {
    let bob = cfg.bob.position();
    let mut idx: Vec<usize> = (0..traj.len()).collect();
    idx.sort_by(|&a, &b| traj.points[a].distance(bob).total_cmp(&traj.points[b].distance(bob)));
    idx.truncate((traj.len() / 10).max(1));
    idx
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn trends() -> Outcome {
    let base = table_one_with_flight_time(60, 300.0);
    let ye = sweep_rates(SweepParameter::Ye, &[0.01, 0.1, 1.0, 10.0], &base);
    let dec: Vec<f64> = ye.windows(2).map(|w| w[0] - w[1]).collect();
    let a = dec.iter().all(|&d| d > 0.0) && dec.windows(2).all(|w| w[1] < w[0]);

    let speed = sweep_rates(SweepParameter::Speed, &[2.5, 3.0, 3.5, 4.0], &base);
    let snr = sweep_rates(SweepParameter::SnrBeta0, &[80.0, 85.0, 90.0, 95.0], &base);
    let b = monotone(&speed, 1e-12) && monotone(&snr, 1e-12);

    let cfg = table_one_with_flight_time(120, 300.0);
    let r = bcd::run(&cfg).unwrap();
    let near = slots_near_uav(&r.final_traj, &cfg);
    let p = &r.final_powers;
    let (pu_near, pu_all) = (mean(near.iter().map(|&i| p.p_u[i])), mean(p.p_u.iter().copied()));
    let (pa_near, pa_all) = (mean(near.iter().map(|&i| p.p_a[i])), mean(p.p_a.iter().copied()));
    let c = pu_near < pu_all && pa_near > pa_all;

    outcome(
        a && b && c,
        format!(
            "(a) {} ye {}; (b) {} speed {} snr {}; (c) {} near-Bob p_u {pu_near:.3e} vs {pu_all:.3e}, p_a {pa_near:.3e} vs {pa_all:.3e}",
            if a { "ok" } else { "FAIL" },
            list(&ye),
            if b { "ok" } else { "FAIL" },
            list(&speed),
            list(&snr),
            if c { "ok" } else { "FAIL" },
        ),
    )
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `∫_lo^hi f` to roughly full relative precision, given a magnitude estimate.
fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, magnitude: f64) -> f64 {
    if magnitude == 0.0 || lo == hi {
        return 0.0;
    }
    oracle::adaptive_simpson(f, lo, hi, 1e-15 * magnitude).unwrap().value
}

/// Eve's term is `∫_0^{h(m)} p e^{−u/y}/(1+up) du`, so its central difference
/// in `m` is the integral over `[h(m−d), h(m+d)]`.
fn distance_central_difference(s: &SlotModel, m: f64, d: f64) -> f64 {
    let (lo, hi) = (s.gain(m - d), s.gain(m + d));
    let f = |u: f64| s.p_a * (-u / s.y_e).exp() / (1.0 + u * s.p_a);
    integrate(f, lo, hi, (hi - lo) * f(lo)) / (2.0 * d)
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let mut pa_worst: f64 = 0.0;
    for _ in 0..200 {
        let (h, p, y) = cli::sample_slot_inputs(&mut rng);
        let analytic = power_alloc::pa_slot_derivative(p, h, y).unwrap();
        pa_worst = pa_worst.max(relative_gap(analytic, oracle::source_power_difference(h, p, y, 1e-4 * p).unwrap()));
    }
    let cfg = ScenarioConfig::default();
    let mut w_worst: f64 = 0.0;
    for _ in 0..200 {
        let s = SlotModel {
            ground: cfg.ground_gain(),
            beta0: cfg.beta0,
            p_a: 10f64.powf(rng.gen_range(-1.0..0.6)),
            p_u: 10f64.powf(rng.gen_range(-3.0..-1.4)),
            y_e: 10f64.powf(rng.gen_range(-2.0..1.0)),
        };
        let m = 10f64.powf(rng.gen_range(4.0..5.9));
        w_worst = w_worst.max(relative_gap(s.eve_slope(m), distance_central_difference(&s, m, 1e-4 * m)));
    }
    outcome(
        pa_worst <= 1e-6 && w_worst <= 1e-5,
        format!("source-power slope worst {pa_worst:.1e} (tol 1e-6), distance slope worst {w_worst:.1e} (tol 1e-5)"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    fs::write(&config, "num_slots = 60\nslot_s = 5.0\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ca = cli::cmd_solve(&config, &a, Overrides::default()).unwrap();
    let cb = cli::cmd_solve(&config, &b, Overrides::default()).unwrap();
    let mut same = ca == cb;
    for name in ["trajectory.csv", "powers.csv", "trace.csv", "summary.csv"] {
        same &= fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap();
    }
    outcome(same, "two solves of the same config, four CSVs compared byte for byte".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed form matches quadrature oracle", closed_vs_quadrature),
        ("definition integral matches split form", definition_consistency),
        ("special functions", special_functions),
        ("subproblem optimality against grid search", subproblem_optimality),
        ("surrogate tangency and upper bound", surrogate_soundness),
        ("alternating optimizer convergence", convergence),
        ("optimized scheme beats straight baseline", scheme_ordering),
        ("parameter trends", trends),
        ("gradient checks", gradient_checks),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
