use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levy-solow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "CRLF in {}", path.display());
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn sidecar(path: &Path) -> Value {
    let meta = PathBuf::from(format!("{}.meta.json", path.display()));
    serde_json::from_str(&fs::read_to_string(meta).unwrap()).unwrap()
}

fn out_dir(tmp: &TempDir, name: &str) -> String {
    tmp.path().join(name).display().to_string()
}

#[test]
fn simulate_three_eq_row_count_and_columns() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "simulate",
        "--out",
        &dir,
        "--set",
        "variant=three_eq",
        "--set",
        "integrator.horizon=10",
    ]);
    let (header, rows) = read_csv(&Path::new(&dir).join("trajectory.csv"));
    assert_eq!(header, ["t", "k", "I", "X"]);
    assert_eq!(rows.len(), 1001);
    let side = sidecar(&Path::new(&dir).join("trajectory.csv"));
    assert_eq!(side["config"]["seed"], 0);
    assert_eq!(side["summary"]["steps"], 1000);
    assert!(side["schema_version"].is_number());
}

#[test]
fn full4_columns_follow_fixed_order() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "simulate",
        "--out",
        &dir,
        "--set",
        "variant=full4",
        "--set",
        "integrator.horizon=0.1",
        "--set",
        "integrator.dt=0.001",
    ]);
    let (header, rows) = read_csv(&Path::new(&dir).join("trajectory.csv"));
    assert_eq!(header, ["t", "k", "X", "z", "p"]);
    assert_eq!(rows.len(), 101);
}

#[test]
fn fixed_point_gives_constant_column() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "simulate",
        "--out",
        &dir,
        "--set",
        "preset=balanced",
        "--set",
        "variant=deterministic",
        "--set",
        "integrator.horizon=5",
    ]);
    let (_, rows) = read_csv(&Path::new(&dir).join("trajectory.csv"));
    assert!(column(&rows, 1).iter().all(|&k| k == 1.0));
}

#[test]
fn same_seed_same_bytes_and_seed_flag_changes_output() {
    let tmp = TempDir::new().unwrap();
    let a = out_dir(&tmp, "a");
    let b = out_dir(&tmp, "b");
    let c = out_dir(&tmp, "c");
    let common = [
        "--set",
        "integrator.horizon=3",
        "--set",
        "params.noise.lambda=5",
    ];
    run_ok(&[&["simulate", "--seed", "7", "--out", &a][..], &common].concat());
    run_ok(&[&["simulate", "--seed", "7", "--out", &b][..], &common].concat());
    run_ok(&[&["simulate", "--seed", "8", "--out", &c][..], &common].concat());
    let read = |d: &str| fs::read(Path::new(d).join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn bifurcate_single_point_above_critical() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "bifurcate",
        "--out",
        &dir,
        "--set",
        "preset=balanced",
        "--set",
        "bifurcate.gamma_grid=[4.0]",
    ]);
    let path = Path::new(&dir).join("bifurcation.csv");
    let (header, rows) = read_csv(&path);
    assert_eq!(&header[..4], ["gamma", "branch", "k", "stability"]);
    let flags: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(flags, ["stable", "unstable", "stable"]);
    let gc = sidecar(&path)["summary"]["gamma_c"].as_f64().unwrap();
    assert!((gc - 7.0 / 3.0).abs() < 1e-12);
}

#[test]
fn bifurcate_below_critical_has_one_row_per_gamma() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "bifurcate",
        "--out",
        &dir,
        "--set",
        "preset=balanced",
        "--set",
        "bifurcate.gamma_grid=[0.0,0.5,1.0,1.5,2.0]",
    ]);
    let (_, rows) = read_csv(&Path::new(&dir).join("bifurcation.csv"));
    assert_eq!(rows.len(), 5);
}

#[test]
fn phase_potential_files_per_gamma() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    let mut ks: Vec<String> = (1..=300).map(|i| format!("{}", i as f64 / 100.0)).collect();
    ks.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse().unwrap()));
    let grid = format!("phase.k_values=[{}]", ks.join(","));
    run_ok(&[
        "phase-potential",
        "--out",
        &dir,
        "--set",
        "preset=balanced",
        "--set",
        "phase.gammas=[0.0,1e-8,4.0]",
        "--set",
        &grid,
    ]);
    let read = |g: &str| read_csv(&Path::new(&dir).join(format!("phase_potential_gamma_{g}.csv")));
    let (header, g4) = read("4");
    assert_eq!(header, ["k", "dkdt", "V"]);
    let one = g4
        .iter()
        .find(|r| r[0].parse::<f64>().unwrap() == 1.0)
        .unwrap();
    assert_eq!(one[1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(one[2].parse::<f64>().unwrap(), 0.0);
    let side = sidecar(&Path::new(&dir).join("phase_potential_gamma_4.csv"));
    assert_eq!(side["summary"]["sign_changes"], 3);
    let (_, g0) = read("0");
    let (_, gtiny) = read("0.00000001");
    for (a, b) in g0.iter().zip(&gtiny) {
        for i in 1..3 {
            let (x, y): (f64, f64) = (a[i].parse().unwrap(), b[i].parse().unwrap());
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn lyapunov_linear_mode_and_sigma_echo() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "lyapunov",
        "--out",
        &dir,
        "--set",
        "variant=linear_decay",
        "--set",
        "params.rho=0.7",
        "--set",
        "integrator.dt=0.001",
        "--set",
        "integrator.horizon=10",
        "--set",
        "lyapunov.sigmas=[0.0,0.1,0.3]",
        "--set",
        "lyapunov.seeds=2",
    ]);
    let (header, rows) = read_csv(&Path::new(&dir).join("lyapunov.csv"));
    assert_eq!(
        header,
        ["sigma", "mean", "half_width", "n_seeds", "unreliable"]
    );
    assert_eq!(column(&rows, 0), [0.0, 0.1, 0.3]);
    for m in column(&rows, 1) {
        assert!((m + 0.7).abs() < 1e-3, "{m}");
    }
}

#[test]
fn slowfast_rows_and_deterministic_limit() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&["slowfast", "--out", &dir, "--set", "preset=figure1"]);
    let (_, rows) = read_csv(&Path::new(&dir).join("slowfast.csv"));
    assert_eq!(rows.len(), 3);
    let rms = column(&rows, 1);
    assert!(rms[0] > rms[1] && rms[1] > rms[2], "{rms:?}");

    let det = out_dir(&tmp, "b");
    run_ok(&[
        "slowfast",
        "--out",
        &det,
        "--set",
        "preset=figure1",
        "--set",
        "params.noise.sigma=0",
        "--set",
        "slowfast.eps_list=[0.001]",
    ]);
    let (_, rows) = read_csv(&Path::new(&det).join("slowfast.csv"));
    assert!(column(&rows, 1)[0] < 1e-3);
}

#[test]
fn ensemble_singleton_restates_simulation() {
    let tmp = TempDir::new().unwrap();
    let e = out_dir(&tmp, "e");
    let s = out_dir(&tmp, "s");
    let common = [
        "--set",
        "variant=capital",
        "--set",
        "integrator.horizon=2",
        "--set",
        "params.noise.lambda=3",
        "--seed",
        "5",
    ];
    run_ok(
        &[
            &[
                "ensemble",
                "--out",
                &e,
                "--set",
                "ensemble.n_paths=1",
                "--set",
                "ensemble.record_every=1",
            ][..],
            &common,
        ]
        .concat(),
    );
    run_ok(&[&["simulate", "--out", &s][..], &common].concat());
    let (header, stats) = read_csv(&Path::new(&e).join("ensemble.csv"));
    assert_eq!(&header[..4], ["t", "component", "mean", "var"]);
    let (_, traj) = read_csv(&Path::new(&s).join("trajectory.csv"));
    assert_eq!(stats.len(), traj.len());
    for (a, b) in stats.iter().zip(&traj) {
        assert_eq!(a[0], b[0]);
        assert_eq!(a[2], b[1]);
        assert_eq!(a[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn ensemble_zero_intensity_comparison_has_unit_ratios() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "ensemble",
        "--out",
        &dir,
        "--set",
        "variant=capital",
        "--set",
        "params.noise.lambda=0",
        "--set",
        "integrator.horizon=2",
        "--set",
        "ensemble.n_paths=16",
        "--set",
        "ensemble.compare=true",
    ]);
    let (header, rows) = read_csv(&Path::new(&dir).join("noise_comparison.csv"));
    let get = |name: &str| {
        rows[0][header.iter().position(|h| h == name).unwrap()]
            .parse::<f64>()
            .unwrap()
    };
    assert_eq!(get("kurtosis_ratio"), 1.0);
    assert_eq!(get("max_step_ratio"), 1.0);
    let g = fs::read(Path::new(&dir).join("ensemble_gaussian.csv")).unwrap();
    let j = fs::read(Path::new(&dir).join("ensemble_gaussian_poisson.csv")).unwrap();
    assert_eq!(g, j);
    let (_, stats) = read_csv(&Path::new(&dir).join("ensemble_gaussian.csv"));
    assert!(column(&stats, 3).iter().all(|&v| v >= 0.0));
}

#[test]
fn every_csv_has_one_sidecar() {
    let tmp = TempDir::new().unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "ensemble",
        "--out",
        &dir,
        "--set",
        "integrator.horizon=1",
        "--set",
        "ensemble.n_paths=4",
        "--set",
        "ensemble.compare=true",
    ]);
    let names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let csvs: Vec<&String> = names.iter().filter(|n| n.ends_with(".csv")).collect();
    assert_eq!(csvs.len(), 5);
    for c in csvs {
        assert!(names.contains(&format!("{c}.meta.json")));
    }
    assert_eq!(names.len(), 10);
}

#[test]
fn exit_codes() {
    let unknown = run(&["simulate", "--set", "params.bogus=1"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("params.bogus"));

    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"integrator": {"dt": 0.01, "horizn": 5}}"#).unwrap();
    let typo = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(typo.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("integrator.horizn"));

    let bad = run(&["simulate", "--set", "integrator.dt=0"]);
    assert_eq!(bad.status.code(), Some(2));

    let dir = out_dir(&tmp, "x");
    let overflow = run(&["simulate", "--out", &dir, "--set", "variant=three_eq"]);
    assert_eq!(overflow.status.code(), Some(3));

    let missing = run(&["simulate", "--config", "/definitely/not/here.json"]);
    assert_eq!(missing.status.code(), Some(4));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let unwritable = run(&[
        "simulate",
        "--out",
        blocker.join("sub").to_str().unwrap(),
        "--set",
        "integrator.horizon=0.1",
    ]);
    assert_eq!(unwritable.status.code(), Some(4));

    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn config_file_is_applied_and_flags_override_it() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"variant": "capital", "integrator": {"horizon": 1.0}, "seed": 3}"#,
    )
    .unwrap();
    let dir = out_dir(&tmp, "a");
    run_ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        &dir,
        "--set",
        "integrator.dt=0.1",
    ]);
    let path = Path::new(&dir).join("trajectory.csv");
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["t", "k"]);
    assert_eq!(rows.len(), 11);
    assert_eq!(sidecar(&path)["config"]["seed"], 4);
}
