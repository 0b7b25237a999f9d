use serde::{Deserialize, Serialize};

use crate::controller::ControllerKind;
use crate::error::{HglError, Result};
use crate::model::angle::wrap_unchecked;
use crate::model::field::eval_rhs;
use crate::model::{GridParameters, MassMatrix, StateLayout, SystemState};
use crate::simulator::{Termination, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with mixed absolute/relative error control.
    Rk45 { rtol: f64, atol: f64 },
}

impl Method {
    pub const RK4_DEFAULT: Method = Method::Rk4 { step: 1e-3 };
    pub const RK45_DEFAULT: Method = Method::Rk45 {
        rtol: 1e-8,
        atol: 1e-10,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    /// Record every `stride`-th accepted step (the final state is always kept).
    pub stride: usize,
    /// Stop once `||f(x)||_inf` stays below this for `convergence_samples`
    /// consecutive steps. `None` integrates to `t_end`.
    pub convergence_tol: Option<f64>,
    pub convergence_samples: usize,
    /// Upper bound on the adaptive step. Keeping it inside the explicit
    /// stability region stops the controller from hovering at its edge.
    pub max_step: f64,
    pub controller: ControllerKind,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::RK45_DEFAULT,
            t_end: 100.0,
            stride: 1,
            convergence_tol: Some(1e-9),
            convergence_samples: 3,
            max_step: 0.05,
            controller: ControllerKind::HacAngle,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(HglError::InvalidArgument(what.to_string()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive and finite");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if self.stride == 0 {
            return bad("output stride must be at least 1");
        }
        match self.method {
            Method::Rk4 { step } if !(step > 0.0 && step.is_finite()) => {
                bad("RK4 step must be positive")
            }
            Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                bad("rtol and atol must be positive")
            }
            _ => Ok(()),
        }
    }
}

/// What the stepping loop reports back.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub t: f64,
    pub state: Vec<f64>,
    pub steps: usize,
    pub termination: Termination,
    /// `||f(x)||_inf` at the final state.
    pub residual: f64,
}

const MIN_STEP: f64 = 1e-14;

/// Integrates `x' = K^-1 f(x)` and calls `observer(t, x)` after every accepted
/// step (angles already wrapped). The observer returning `false` stops the run.
pub fn run<F>(
    x0: &SystemState,
    p: &GridParameters,
    cfg: &IntegratorConfig,
    mut observer: F,
) -> std::result::Result<RunSummary, (f64, Vec<f64>, usize)>
where
    F: FnMut(f64, &[f64]) -> bool,
{
    let lay = StateLayout::new(p.n, p.m);
    let mass = MassMatrix::new(p);
    let mass = mass.diagonal();
    let ctl = &cfg.controller;
    let dim = lay.dim();
    let rhs = |x: &[f64], out: &mut [f64]| eval_rhs(x, p, ctl, mass, out);
    let residual = |kx: &[f64]| {
        kx.iter()
            .zip(mass)
            .fold(0.0f64, |a, (d, k)| a.max((d * k).abs()))
    };
    let wrap = |x: &mut [f64]| {
        for d in &mut x[..lay.n] {
            *d = wrap_unchecked(*d);
        }
    };

    let mut x = x0.as_slice().to_vec();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut calm = 0usize;
    let mut k1 = vec![0.0; dim];
    rhs(&x, &mut k1);

    let converged = |kx: &[f64], calm: &mut usize| -> bool {
        match cfg.convergence_tol {
            Some(tol) => {
                if residual(kx) <= tol {
                    *calm += 1;
                } else {
                    *calm = 0;
                }
                *calm >= cfg.convergence_samples
            }
            None => false,
        }
    };

    let finish = |t: f64, x: Vec<f64>, steps, termination, kx: &[f64]| RunSummary {
        t,
        residual: residual(kx),
        state: x,
        steps,
        termination,
    };

    match cfg.method {
        Method::Rk4 { step } => {
            let total = (cfg.t_end / step).round();
            let nsteps = if ((total * step) - cfg.t_end).abs() <= 1e-9 * cfg.t_end {
                total as usize
            } else {
                (cfg.t_end / step).ceil() as usize
            };
            let (mut k2, mut k3, mut k4, mut tmp) =
                (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
            for s in 0..nsteps {
                let h = if s + 1 == nsteps { cfg.t_end - t } else { step };
                for q in 0..dim {
                    tmp[q] = x[q] + 0.5 * h * k1[q];
                }
                rhs(&tmp, &mut k2);
                for q in 0..dim {
                    tmp[q] = x[q] + 0.5 * h * k2[q];
                }
                rhs(&tmp, &mut k3);
                for q in 0..dim {
                    tmp[q] = x[q] + h * k3[q];
                }
                rhs(&tmp, &mut k4);
                for q in 0..dim {
                    x[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
                }
                wrap(&mut x);
                t = if s + 1 == nsteps { cfg.t_end } else { t + h };
                steps += 1;
                if x.iter().any(|v| !v.is_finite()) {
                    return Ok(finish(t, x, steps, Termination::Diverged, &k1));
                }
                rhs(&x, &mut k1);
                if !observer(t, &x) {
                    return Ok(finish(t, x, steps, Termination::Stopped, &k1));
                }
                if converged(&k1, &mut calm) {
                    return Ok(finish(t, x, steps, Termination::Converged, &k1));
                }
            }
            Ok(finish(t, x, steps, Termination::TEnd, &k1))
        }
        Method::Rk45 { rtol, atol } => {
            let mut ks: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; dim]).collect();
            let mut tmp = vec![0.0; dim];
            let mut xn = vec![0.0; dim];
            ks[0].copy_from_slice(&k1);
            let h_max = cfg.max_step.min(cfg.t_end);
            let mut h = initial_step(&x, &ks[0], rtol, atol).min(h_max);
            // PI step control with Hairer's constants
            let (beta, safe) = (0.04, 0.9);
            let expo = 0.2 - 0.75 * beta;
            let mut err_old: f64 = 1e-4;
            loop {
                if t >= cfg.t_end {
                    return Ok(finish(t, x, steps, Termination::TEnd, &ks[0]));
                }
                if h < MIN_STEP * t.abs().max(1.0) {
                    return Err((t, x, steps));
                }
                let last = t + h >= cfg.t_end;
                if last {
                    h = cfg.t_end - t;
                }
                for stage in 1..7 {
                    let row = &DP_A[stage - 1];
                    for q in 0..dim {
                        let mut acc = 0.0;
                        for (c, k) in row.iter().zip(&ks[..stage]) {
                            acc += c * k[q];
                        }
                        tmp[q] = x[q] + h * acc;
                    }
                    rhs(&tmp, &mut ks[stage]);
                }
                // stage 7 was evaluated at the 5th-order solution (FSAL)
                xn.copy_from_slice(&tmp);
                let mut err = 0.0;
                for q in 0..dim {
                    let mut e = 0.0;
                    for (c, k) in DP_E.iter().zip(&ks) {
                        e += c * k[q];
                    }
                    let sc = atol + rtol * x[q].abs().max(xn[q].abs());
                    let r = h * e / sc;
                    err += r * r;
                }
                let err = (err / dim as f64).sqrt();
                if !err.is_finite() {
                    if xn.iter().any(|v| !v.is_finite()) && h < 1e-8 {
                        return Ok(finish(t, x, steps, Termination::Diverged, &ks[0]));
                    }
                    h *= 0.2;
                    continue;
                }
                if err <= 1.0 {
                    t = if last { cfg.t_end } else { t + h };
                    std::mem::swap(&mut x, &mut xn);
                    wrap(&mut x);
                    let k7 = ks[6].clone();
                    ks[0].copy_from_slice(&k7);
                    steps += 1;
                    if !observer(t, &x) {
                        return Ok(finish(t, x, steps, Termination::Stopped, &ks[0]));
                    }
                    if converged(&ks[0], &mut calm) {
                        return Ok(finish(t, x, steps, Termination::Converged, &ks[0]));
                    }
                    let fac = safe * err.max(1e-12).powf(-expo) * err_old.powf(beta);
                    h = (h * fac.clamp(0.1, 5.0)).min(h_max);
                    err_old = err.max(1e-4);
                } else {
                    h *= (safe * err.powf(-expo)).clamp(0.2, 1.0);
                }
            }
        }
    }
}

fn initial_step(x: &[f64], f: &[f64], rtol: f64, atol: f64) -> f64 {
    let dim = x.len() as f64;
    let (mut d0, mut d1) = (0.0, 0.0);
    for (xi, fi) in x.iter().zip(f) {
        let sc = atol + rtol * xi.abs();
        d0 += (xi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let (d0, d1) = ((d0 / dim).sqrt(), (d1 / dim).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.clamp(1e-6, 0.1)
}

/// Butcher rows for stages 2..7 (stage 7 row is the 5th-order weights).
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and 4th-order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from `x0`, recording every `cfg.stride`-th step.
pub fn integrate(x0: &SystemState, p: &GridParameters, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let lay = StateLayout::new(p.n, p.m);
    if x0.layout() != lay {
        return Err(HglError::DimensionMismatch {
            what: "initial state",
            expected: lay.dim(),
            got: x0.as_slice().len(),
        });
    }
    let mut x0 = x0.clone();
    x0.wrap();
    let mut times = vec![0.0];
    let mut states = vec![x0.as_slice().to_vec()];
    let mut count = 0usize;
    let mut last_t = 0.0;
    let outcome = run(&x0, p, cfg, |t, x| {
        count += 1;
        last_t = t;
        if count % cfg.stride == 0 {
            times.push(t);
            states.push(x.to_vec());
        }
        true
    });
    let build = |times: Vec<f64>, states: Vec<Vec<f64>>, termination, steps| Trajectory {
        layout: lay,
        times,
        states,
        v: None,
        vdot: None,
        termination,
        steps,
    };
    match outcome {
        Ok(summary) => {
            if times.last() != Some(&summary.t) {
                times.push(summary.t);
                states.push(summary.state.clone());
            }
            Ok(build(times, states, summary.termination, summary.steps))
        }
        Err((t, _, steps)) => Err(HglError::StepSizeUnderflow {
            t,
            partial: Box::new(build(times, states, Termination::Diverged, steps)),
        }),
    }
}
