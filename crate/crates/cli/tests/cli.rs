use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn default_config() -> String {
    config("default_n2_m1.json").display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn edited_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(default_config()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("edited.json");
    fs::write(&path, v.to_string()).unwrap();
    path.display().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn certify_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = hgl(&["certify", "--config", &default_config(), "--out", &out, "--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("certificate: PASS"));

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
    for u in report["units"].as_array().unwrap() {
        assert!(u["d_margin"].as_f64().unwrap() > 0.0);
        assert!(u["gamma_margin"].as_f64().unwrap() > 0.0);
        assert!(u["q11_min_eig"].as_f64().unwrap() > 0.0);
    }
    assert!(report["q22_min"].as_f64().unwrap() > 0.0);
    assert_eq!(report["spectra"].as_array().unwrap().len(), 4);
}

#[test]
fn certify_strict_fails_without_angle_gain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |v| v["control"]["gamma"] = serde_json::json!([0.0, 0.0]));
    let o = hgl(&["certify", "--config", &cfg, "--strict"]);
    assert_eq!(o.status.code(), Some(3));
    let o = hgl(&["certify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("certificate: FAIL"));
}

#[test]
fn simulate_returns_to_stable_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = hgl(&[
        "simulate", "--config", &default_config(), "--t-end", "50", "--perturb", "delta:0:3.1415",
        "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    let (n, m) = (2, 1);
    assert_eq!(header.len(), 1 + (11 * n + m) + 2);
    assert_eq!(header[0], "t");
    assert_eq!(header[1], "delta_0");
    assert_eq!(&header[header.len() - 2..], ["V", "Vdot"]);

    let e = hgl(&["equilibria", "--config", &default_config()]);
    let eq: Value = serde_json::from_str(&stdout(&e)).unwrap();
    let k = eq["stable_index"].as_u64().unwrap() as usize;
    let xs = &eq["points"][k]["state"];
    let mut expected = Vec::new();
    for block in ["delta", "i_dc_n", "i_dc_g", "v_dc", "i", "v", "i_g", "omega_g", "t_m"] {
        expected.extend(xs[block].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()));
    }
    let last = rows.last().unwrap();
    assert!((last[0] - 50.0).abs() < 1e-12);
    let dev = expected
        .iter()
        .zip(&last[1..])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(dev < 1e-4, "final deviation {dev}");

    let v: Vec<f64> = rows.iter().map(|r| r[r.len() - 2]).collect();
    assert!(v[0] > 1.0);
    assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn csv_is_stable_across_runs() {
    let args = [
        "simulate", "--config", &default_config(), "--t-end", "2", "--method", "rk4", "--step", "0.01",
        "--perturb", "omega_g:1:0.2",
    ];
    let a = hgl(&args);
    let b = hgl(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 201);
    assert!(text.lines().all(|l| l.split(',').count() == 26));
}

#[test]
fn effective_config_round_trip_is_idempotent() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = hgl(&["equilibria", "--config", &default_config(), "--out", &first.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eff = first.path().join("effective_config.json");
    let o = hgl(&["equilibria", "--config", &eff.display().to_string(), "--out", &second.path().display().to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["effective_config.json", "equilibria.json"] {
        assert_eq!(
            fs::read(first.path().join(name)).unwrap(),
            fs::read(second.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
    let v: Value = serde_json::from_slice(&fs::read(&eff).unwrap()).unwrap();
    assert_eq!(v["references"]["mode"], "strict");
    assert_eq!(v["references"]["T_r"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = hgl(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    let o = hgl(&["simulate", "--config", &default_config(), "--method", "euler"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hgl(&["simulate", "--config", &default_config(), "--perturb", "delta:0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn self_loop_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |v| v["incidence"] = serde_json::json!([[0, 0]]));
    let o = hgl(&["certify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("incidence[0]: self-loop"), "{}", stderr(&o));
}

#[test]
fn modulation_index_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited_config(dir.path(), |v| v["ilcs"][1]["mu"] = 0.7.into());
    let o = hgl(&["equilibria", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ilcs[1].mu: mu must lie in (0, 0.5]"), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_one() {
    let o = hgl(&["certify", "--config", "/nonexistent/grid.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = hgl(&["simulate", "--config", &default_config(), "--perturb", "i_dc_n:3:1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out of range"));
}

#[test]
fn single_unit_config() {
    let cfg = config("single_unit.json").display().to_string();
    let o = hgl(&["equilibria", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eq: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(eq["points"].as_array().unwrap().len(), 2);
    assert!(eq["max_residual"].as_f64().unwrap() < 1e-9);
    let o = hgl(&["certify", "--config", &cfg, "--strict"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn lyapunov_check_reports_decrease() {
    let o = hgl(&[
        "lyapunov-check", "--config", &default_config(), "--t-end", "20", "--perturb", "delta:1:-2.5",
        "--strict",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("decrease: PASS"));
}

#[test]
fn mc_agas_is_reproducible_and_respects_thread_cap() {
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_hgl"))
            .args(["mc-agas", "--config", &default_config(), "--trials", "6", "--seed", "11", "--t-end", "60"])
            .env("HGL_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a["outcomes"], b["outcomes"]);
    assert_eq!(a["trials"], 6);
    assert_eq!(a["certified"], true);

    let o = Command::new(env!("CARGO_BIN_EXE_hgl"))
        .args(["mc-agas", "--config", &default_config(), "--trials", "1"])
        .env("HGL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plot_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgl(&[
        "simulate", "--config", &default_config(), "--t-end", "5", "--perturb", "delta:0:1",
        "--out", &dir.path().display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = dir.path().join("trajectory.csv").display().to_string();
    let svg = dir.path().join("delta.svg");
    let o = hgl(&["plot", "--input", &csv, "--columns", "delta_0,V", "--out", &svg.display().to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("delta_0"));
    assert!(text.contains("<polyline"));

    let o = hgl(&["plot", "--input", &csv, "--columns", "nope", "--out", &svg.display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("column `nope` not found"));
}
