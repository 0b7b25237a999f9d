use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hgl_core::certificates::{certify as run_certify, CertificateReport};
use hgl_core::equilibria::{max_residual, solve_stationary, EquilibriumSet};
use hgl_core::model::StateRecord;
use hgl_core::simulator::{
    classify_state, integrate, monte_carlo_agas, InitialSampling, IntegratorConfig, Method,
    Trajectory, CLASSIFY_TOL,
};
use hgl_core::{ControllerKind, EquilibriumLabel, GridParameters, StateLayout, SystemState};
use serde::Serialize;

use crate::config::{parse_config, LoadedConfig};
use crate::output::{write_json, write_trajectory_csv};

pub enum Outcome {
    Ok,
    CheckFailed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub block: String,
    pub index: usize,
    pub value: f64,
}

const BLOCKS: [&str; 9] = [
    "delta", "i_dc_n", "i_dc_g", "v_dc", "i", "v", "i_g", "omega_g", "T_m",
];

pub fn parse_perturbation(s: &str) -> std::result::Result<Perturbation, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [block, index, value] = parts[..] else {
        return Err(format!("expected BLOCK:INDEX:VALUE, got `{s}`"));
    };
    if !BLOCKS.contains(&block) {
        return Err(format!("unknown block `{block}` (one of {})", BLOCKS.join(", ")));
    }
    let index = index
        .parse()
        .map_err(|_| format!("bad index `{index}`"))?;
    let value: f64 = value
        .parse()
        .map_err(|_| format!("bad value `{value}`"))?;
    if !value.is_finite() {
        return Err("perturbation must be finite".into());
    }
    Ok(Perturbation {
        block: block.to_string(),
        index,
        value,
    })
}

fn block_range(lay: StateLayout, block: &str) -> std::ops::Range<usize> {
    match block {
        "delta" => lay.delta(),
        "i_dc_n" => lay.i_dc_n(),
        "i_dc_g" => lay.i_dc_g(),
        "v_dc" => lay.v_dc(),
        "i" => lay.i(),
        "v" => lay.v(),
        "i_g" => lay.i_g(),
        "omega_g" => lay.omega_g(),
        "T_m" => lay.t_m(),
        _ => unreachable!("block names are checked while parsing"),
    }
}

pub fn perturbed_state(xs: &SystemState, perturb: &[Perturbation]) -> Result<SystemState> {
    let lay = xs.layout();
    let mut x = xs.as_slice().to_vec();
    for p in perturb {
        let r = block_range(lay, &p.block);
        if p.index >= r.len() {
            bail!(
                "perturbation {}:{} out of range (block has {} entries)",
                p.block,
                p.index,
                r.len()
            );
        }
        x[r.start + p.index] += p.value;
    }
    let mut s = SystemState::from_flat(lay, x)?;
    s.wrap();
    Ok(s)
}

fn load(path: &Path) -> Result<(LoadedConfig, EquilibriumSet)> {
    let cfg = parse_config(path).with_context(|| format!("loading {}", path.display()))?;
    let eq = solve_stationary(&cfg.params)?;
    Ok((cfg, eq))
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

#[derive(Serialize)]
struct ReferencesOut<'a> {
    #[serde(rename = "T_r")]
    torque_ref: &'a [f64],
    i_dc_r: &'a [f64],
}

#[derive(Serialize)]
struct PointOut<'a> {
    label: EquilibriumLabel,
    shifted: &'a [bool],
    state: StateRecord,
}

#[derive(Serialize)]
struct EquilibriaOut<'a> {
    references: ReferencesOut<'a>,
    stable_index: usize,
    max_residual: f64,
    points: Vec<PointOut<'a>>,
}

pub fn equilibria(config: &Path, out: Option<&Path>) -> Result<Outcome> {
    let (cfg, eq) = load(config)?;
    let report = EquilibriaOut {
        references: ReferencesOut {
            torque_ref: &cfg.params.torque_ref,
            i_dc_r: &cfg.params.i_dc_ref,
        },
        stable_index: eq.stable_index,
        max_residual: max_residual(&eq, &cfg.params)?,
        points: eq
            .points
            .iter()
            .map(|pt| PointOut {
                label: pt.label,
                shifted: &pt.shifted,
                state: StateRecord::from(&pt.state),
            })
            .collect(),
    };
    match out {
        Some(dir) => {
            write_json(&out_file(dir, "equilibria.json")?, &report)?;
            write_json(&out_file(dir, "effective_config.json")?, &cfg.effective())?;
            println!("{} equilibria written to {}", eq.len(), dir.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
    }
    Ok(Outcome::Ok)
}

pub fn certify(config: &Path, out: Option<&Path>, json: bool, strict: bool) -> Result<Outcome> {
    let (cfg, eq) = load(config)?;
    let report = run_certify(&cfg.params, &eq)?;
    if let Some(dir) = out {
        write_json(&out_file(dir, "certificate.json")?, &report)?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    if json {
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
    } else {
        write_certificate_table(&mut w, &report)?;
    }
    Ok(if strict && !report.pass {
        Outcome::CheckFailed
    } else {
        Outcome::Ok
    })
}

fn write_certificate_table(w: &mut impl Write, r: &CertificateReport) -> io::Result<()> {
    writeln!(
        w,
        "{:>4} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "unit", "D", "D_min", "D_margin", "gamma", "gamma_min", "gamma_cf", "Q11_eig"
    )?;
    for (j, u) in r.units.iter().enumerate() {
        writeln!(
            w,
            "{:>4} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}",
            j,
            u.d,
            u.d_min,
            u.d_margin,
            u.gamma,
            u.gamma_min_schur,
            u.gamma_min_closed_form,
            u.q11_min_eig
        )?;
    }
    writeln!(w, "min Q22 entry: {:.4e}", r.q22_min)?;
    for s in &r.spectra {
        let shifted: String = s.shifted.iter().map(|&b| if b { '1' } else { '0' }).collect();
        writeln!(
            w,
            "equilibrium {shifted} ({:?}): max Re(lambda) = {:.4e}",
            s.label, s.max_real
        )?;
    }
    writeln!(
        w,
        "closed form: {}  direct: {}  certificate: {}",
        verdict(r.closed_form_pass),
        verdict(r.direct_pd_pass),
        verdict(r.pass)
    )
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub struct RunSpec {
    pub config: PathBuf,
    pub t_end: f64,
    pub method: Method,
    pub max_step: f64,
    pub stride: usize,
    pub perturb: Vec<Perturbation>,
    pub stop_below: Option<f64>,
}

fn run_trajectory(spec: &RunSpec) -> Result<(LoadedConfig, EquilibriumSet, Trajectory)> {
    let (cfg, eq) = load(&spec.config)?;
    let x0 = perturbed_state(eq.stable(), &spec.perturb)?;
    let icfg = IntegratorConfig {
        method: spec.method,
        t_end: spec.t_end,
        stride: spec.stride,
        convergence_tol: spec.stop_below,
        max_step: spec.max_step,
        controller: cfg.controller.clone(),
        ..IntegratorConfig::default()
    };
    let mut traj = integrate(&x0, &cfg.params, &icfg)?;
    traj.annotate_lyapunov(&cfg.params, &eq)?;
    Ok((cfg, eq, traj))
}

pub fn simulate(spec: &RunSpec, out: Option<&Path>) -> Result<Outcome> {
    let (cfg, eq, traj) = run_trajectory(spec)?;
    match out {
        Some(dir) => {
            let path = out_file(dir, "trajectory.csv")?;
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_trajectory_csv(file, &traj)?;
            log::info!("{} rows written to {}", traj.times.len(), path.display());
        }
        None => write_trajectory_csv(io::stdout().lock(), &traj)?,
    }
    report_limit(&cfg.params, &eq, &traj)?;
    Ok(Outcome::Ok)
}

fn report_limit(p: &GridParameters, eq: &EquilibriumSet, traj: &Trajectory) -> Result<()> {
    let last = traj.final_state();
    let limit = classify_state(last.as_slice(), eq, CLASSIFY_TOL)?;
    match limit {
        Some(c) => log::info!(
            "final state within {CLASSIFY_TOL:e} of equilibrium {} ({:?})",
            c.index,
            c.label
        ),
        None => log::info!(
            "final state not within {CLASSIFY_TOL:e} of any equilibrium (n = {})",
            p.n
        ),
    }
    Ok(())
}

pub fn lyapunov_check(spec: &RunSpec, tol: f64, strict: bool) -> Result<Outcome> {
    let (cfg, _eq, traj) = run_trajectory(spec)?;
    if cfg.controller != ControllerKind::HacAngle {
        log::warn!("the storage function is built for hybrid angle control");
    }
    let v = traj.v.as_deref().unwrap_or_default();
    let vdot = traj.vdot.as_deref().unwrap_or_default();
    let max_inc = traj.max_v_increase().unwrap_or(f64::NEG_INFINITY);
    let max_vdot = vdot.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = max_inc <= tol;
    println!("samples: {}", v.len());
    println!("V(0): {:.6e}", v.first().copied().unwrap_or(f64::NAN));
    println!("V(end): {:.6e}", v.last().copied().unwrap_or(f64::NAN));
    println!("largest V increase: {max_inc:.3e} (tolerance {tol:.1e})");
    println!("largest Vdot: {max_vdot:.3e}");
    println!("decrease: {}", verdict(pass));
    Ok(if strict && !pass {
        Outcome::CheckFailed
    } else {
        Outcome::Ok
    })
}

pub struct McSpec {
    pub config: PathBuf,
    pub trials: usize,
    pub seed: u64,
    pub t_end: f64,
    pub sigma: f64,
    pub out: Option<PathBuf>,
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("HGL_THREADS") {
        Ok(s) => {
            let t: usize = s
                .trim()
                .parse()
                .with_context(|| format!("HGL_THREADS=`{s}` is not a thread count"))?;
            if t == 0 {
                bail!("HGL_THREADS must be at least 1");
            }
            Ok(Some(t))
        }
        Err(_) => Ok(None),
    }
}

pub fn mc_agas(spec: &McSpec) -> Result<Outcome> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        bail!("--sigma must be non-negative");
    }
    let (cfg, eq) = load(&spec.config)?;
    let icfg = IntegratorConfig {
        t_end: spec.t_end,
        controller: cfg.controller.clone(),
        ..IntegratorConfig::default()
    };
    let report = monte_carlo_agas(
        &cfg.params,
        &eq,
        spec.trials,
        &InitialSampling::uniform(spec.sigma),
        &icfg,
        spec.seed,
        thread_cap()?,
    )?;
    match &spec.out {
        Some(dir) => write_json(&out_file(dir, "mc_agas.json")?, &report)?,
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
    }
    eprintln!(
        "{} trials: {:.4} stable, {:.4} saddle, {:.4} unresolved ({:.2} s)",
        report.trials,
        report.fraction_stable,
        report.fraction_saddle,
        report.fraction_unresolved,
        report.wall_time_s
    );
    Ok(Outcome::Ok)
}
