use std::fs;
use std::path::Path;

use uavjam::cli::{self, Overrides, EXIT_INPUT, EXIT_OK};
use uavjam::scenario::{ConfigFile, PowerSchedule, Trajectory, Vec3};
use uavjam::secrecy;

const SMALL: &str = "num_slots = 30\nslot_s = 8.0\nmax_iters = 20\n";

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn column(path: &Path, col: usize) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn solve_writes_fixed_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli::cmd_solve(&cfg, &out, Overrides::default()).unwrap(), EXIT_OK);
    assert_eq!(header(&out.join("trajectory.csv")), "n,x_m,y_m,z_m");
    assert_eq!(header(&out.join("powers.csv")), "n,pa_w,pu_w");
    assert_eq!(header(&out.join("trace.csv")), "iter,rs_bits,rel_err");
    assert_eq!(header(&out.join("summary.csv")), "rs_bits,iterations,stop_reason");
}

#[test]
fn emitted_rate_is_reproducible_from_emitted_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.toml");
    fs::write(&cfg_path, SMALL).unwrap();
    let out = dir.path().join("out");
    cli::cmd_solve(&cfg_path, &out, Overrides::default()).unwrap();
    let cfg = ConfigFile::from_toml(SMALL).unwrap().into_config();
    let (x, y, z) = (
        column(&out.join("trajectory.csv"), 1),
        column(&out.join("trajectory.csv"), 2),
        column(&out.join("trajectory.csv"), 3),
    );
    let traj = Trajectory { points: (0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect() };
    let powers = PowerSchedule { p_a: column(&out.join("powers.csv"), 1), p_u: column(&out.join("powers.csv"), 2) };
    let rate = secrecy::evaluate(&traj, &powers, &cfg).unwrap().average_rate;
    let reported = column(&out.join("summary.csv"), 0)[0];
    assert!((rate - reported).abs() <= 1e-9, "{rate} vs {reported}");
}

#[test]
fn zero_source_power_reports_zero_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("{SMALL}pa_max_dbm = -inf\npa_avg_dbm = -inf\n")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli::cmd_solve(&cfg, &out, Overrides::default()).unwrap(), EXIT_OK);
    assert_eq!(column(&out.join("summary.csv"), 0), vec![0.0]);
}

#[test]
fn invalid_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    // too slow to reach the final point
    fs::write(&cfg, "speed_mps = 1.0\n").unwrap();
    let err = cli::cmd_solve(&cfg, &dir.path().join("out"), Overrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let err = cli::cmd_solve(&cfg, &dir.path().join("out"), Overrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);
}

#[test]
fn overrides_change_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = Overrides { max_iters: Some(1), theta: Some(0.0) };
    cli::cmd_solve(&cfg, &out, o).unwrap();
    let mut r = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let rec = r.records().next().unwrap().unwrap();
    assert_eq!(&rec[1], "1");
    assert_eq!(&rec[2], "max_iters");
}

#[test]
fn compare_reports_nonnegative_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli::cmd_compare(&cfg, &out, Overrides::default()).unwrap(), EXIT_OK);
    assert_eq!(header(&out.join("compare.csv")), "rs_optimized,rs_straight,gap");
    assert!(column(&out.join("compare.csv"), 2)[0] >= 0.0);
}

#[test]
fn compare_runs_with_coincident_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("{SMALL}qf_xyz = [-100.0, 100.0, 100.0]\n")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli::cmd_compare(&cfg, &out, Overrides::default()).unwrap(), EXIT_OK);
}

#[test]
fn sweep_keeps_input_order_and_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("base.toml"), SMALL).unwrap();
    let spec = dir.path().join("s.toml");
    fs::write(&spec, "parameter = \"speed\"\nvalues = [3.0, 0.1, 2.5]\nbase_config = \"base.toml\"\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli::cmd_sweep(&spec, &out, Overrides::default()).unwrap(), EXIT_OK);
    let path = out.join("sweep.csv");
    assert_eq!(header(&path), "parameter_value,rs_optimized,rs_straight,status");
    assert_eq!(column(&path, 0), vec![3.0, 0.1, 2.5]);
    let mut r = csv::Reader::from_path(&path).unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert!(rows[1][3].starts_with("invalid"));
    assert_eq!(&rows[1][1], "");
    assert!(!rows[0][3].starts_with("invalid"));
}

#[test]
fn empty_sweep_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    fs::write(&spec, "parameter = \"ye\"\nvalues = []\n").unwrap();
    let err = cli::cmd_sweep(&spec, &dir.path().join("out"), Overrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);
}

#[test]
fn selftest_passes() {
    assert_eq!(cli::cmd_selftest(7, 50), EXIT_OK);
}
