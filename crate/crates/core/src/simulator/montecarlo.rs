use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::certify_conditions;
use crate::controller::ControllerKind;
use crate::equilibria::{EquilibriumLabel, EquilibriumSet};
use crate::error::{HglError, Result};
use crate::lyapunov::LyapunovTracker;
use crate::model::{GridParameters, StateLayout, SystemState, ANGLE_PERIOD};
use crate::simulator::integrator::{run, IntegratorConfig};
use crate::simulator::{classify_state, Termination, CLASSIFY_TOL};

/// Standard deviations of the Gaussian perturbation added to `y*`, per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialSampling {
    pub sigma_i_dc_n: f64,
    pub sigma_i_dc_g: f64,
    pub sigma_v_dc: f64,
    pub sigma_i: f64,
    pub sigma_v: f64,
    pub sigma_i_g: f64,
    pub sigma_omega_g: f64,
    pub sigma_t_m: f64,
    /// Extra trials started from exactly these states, run after the random ones.
    #[serde(skip)]
    pub injected: Vec<SystemState>,
}

impl InitialSampling {
    pub fn uniform(sigma: f64) -> Self {
        InitialSampling {
            sigma_i_dc_n: sigma,
            sigma_i_dc_g: sigma,
            sigma_v_dc: sigma,
            sigma_i: sigma,
            sigma_v: sigma,
            sigma_i_g: sigma,
            sigma_omega_g: sigma,
            sigma_t_m: sigma,
            injected: Vec::new(),
        }
    }

    fn sigma_by_index(&self, lay: StateLayout) -> Vec<f64> {
        let mut s = vec![0.0; lay.dim()];
        for (r, v) in [
            (lay.i_dc_n(), self.sigma_i_dc_n),
            (lay.i_dc_g(), self.sigma_i_dc_g),
            (lay.v_dc(), self.sigma_v_dc),
            (lay.i(), self.sigma_i),
            (lay.v(), self.sigma_v),
            (lay.i_g(), self.sigma_i_g),
            (lay.omega_g(), self.sigma_omega_g),
            (lay.t_m(), self.sigma_t_m),
        ] {
            s[r].fill(v);
        }
        s
    }
}

impl Default for InitialSampling {
    fn default() -> Self {
        Self::uniform(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub injected: bool,
    /// Index into the equilibrium set, or `None` when unresolved.
    pub limit: Option<usize>,
    pub label: Option<EquilibriumLabel>,
    pub t_final: f64,
    pub termination: Termination,
    pub v0: f64,
    /// Largest step-to-step increase of `V` along the run.
    pub max_v_increase: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub seed: u64,
    pub certified: bool,
    pub outcomes: Vec<TrialOutcome>,
    pub fraction_stable: f64,
    pub fraction_saddle: f64,
    pub fraction_unresolved: f64,
    pub wall_time_s: f64,
}

impl MonteCarloReport {
    /// Limit index of every trial, in trial order.
    pub fn classifications(&self) -> Vec<Option<usize>> {
        self.outcomes.iter().map(|o| o.limit).collect()
    }

    pub fn resolved(&self) -> usize {
        self.outcomes.iter().filter(|o| o.limit.is_some()).count()
    }
}

/// Per-trial seed derived from the master seed by a SplitMix64 step, so that
/// trials are independent of execution order.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_initial(eq: &EquilibriumSet, sigma: &[f64], seed: u64) -> Result<SystemState> {
    let xs = eq.stable();
    let lay = xs.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * ANGLE_PERIOD;
    let mut x = xs.as_slice().to_vec();
    for d in &mut x[..lay.n] {
        *d = rng.random_range(-half..half);
    }
    for k in lay.n..lay.dim() {
        if sigma[k] > 0.0 {
            let normal = Normal::new(0.0, sigma[k])
                .map_err(|e| HglError::InvalidArgument(e.to_string()))?;
            x[k] += normal.sample(&mut rng);
        }
    }
    SystemState::from_flat(lay, x)
}

fn run_trial(
    index: usize,
    seed: u64,
    x0: &SystemState,
    injected: bool,
    p: &GridParameters,
    eq: &EquilibriumSet,
    cfg: &IntegratorConfig,
    tracker: &LyapunovTracker,
) -> Result<TrialOutcome> {
    let v0 = tracker.value(x0.as_slice());
    let mut prev = v0;
    let mut max_inc = f64::NEG_INFINITY;
    let summary = run(x0, p, cfg, |_, x| {
        let v = tracker.value(x);
        max_inc = max_inc.max(v - prev);
        prev = v;
        true
    });
    let (t_final, state, termination) = match summary {
        Ok(s) => (s.t, s.state, s.termination),
        Err((t, state, _)) => (t, state, Termination::Diverged),
    };
    let class = if termination == Termination::Diverged {
        None
    } else {
        classify_state(&state, eq, CLASSIFY_TOL)?
    };
    Ok(TrialOutcome {
        index,
        seed,
        injected,
        limit: class.map(|c| c.index),
        label: class.map(|c| c.label),
        t_final,
        termination,
        v0,
        max_v_increase: if max_inc.is_finite() { max_inc } else { 0.0 },
    })
}

/// Samples `trials` initial conditions (uniform angles on the manifold,
/// Gaussian electrical states around `y*`), integrates each, and classifies
/// the limits. `threads = None` uses the global rayon pool.
pub fn monte_carlo_agas(
    p: &GridParameters,
    eq: &EquilibriumSet,
    trials: usize,
    sampling: &InitialSampling,
    cfg: &IntegratorConfig,
    seed: u64,
    threads: Option<usize>,
) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let started = Instant::now();
    let certified = certify_conditions(p, eq).pass;
    if !certified {
        log::warn!("running Monte Carlo on a grid that fails the stability certificate");
    }
    if cfg.controller != ControllerKind::HacAngle {
        log::warn!("Lyapunov traces are only meaningful under hybrid angle control");
    }
    let lay = StateLayout::new(p.n, p.m);
    let sigma = sampling.sigma_by_index(lay);
    let tracker = LyapunovTracker::new(p, eq);
    let total = trials + sampling.injected.len();

    let job = |index: usize| -> Result<TrialOutcome> {
        if index < trials {
            let s = trial_seed(seed, index);
            let x0 = sample_initial(eq, &sigma, s)?;
            run_trial(index, s, &x0, false, p, eq, cfg, &tracker)
        } else {
            let x0 = &sampling.injected[index - trials];
            run_trial(index, 0, x0, true, p, eq, cfg, &tracker)
        }
    };

    let outcomes: Result<Vec<TrialOutcome>> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| HglError::InvalidArgument(e.to_string()))?;
            pool.install(|| (0..total).into_par_iter().map(job).collect())
        }
        None => (0..total).into_par_iter().map(job).collect(),
    };
    let outcomes = outcomes?;

    let count = |want: Option<EquilibriumLabel>| outcomes.iter().filter(|o| o.label == want).count();
    let (stable, saddle, unresolved) = (
        count(Some(EquilibriumLabel::StableCandidate)),
        count(Some(EquilibriumLabel::Saddle)),
        count(None),
    );
    let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
    Ok(MonteCarloReport {
        trials: total,
        seed,
        certified,
        fraction_stable: frac(stable),
        fraction_saddle: frac(saddle),
        fraction_unresolved: frac(unresolved),
        outcomes,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
