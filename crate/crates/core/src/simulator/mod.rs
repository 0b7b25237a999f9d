//! Time integration of the closed loop, convergence classification, and
//! Monte Carlo basin experiments.

mod integrator;
mod montecarlo;

pub use integrator::{integrate, run, IntegratorConfig, Method, RunSummary};
pub use montecarlo::{
    monte_carlo_agas, trial_seed, InitialSampling, MonteCarloReport, TrialOutcome,
};

use serde::Serialize;

use crate::equilibria::{EquilibriumLabel, EquilibriumSet};
use crate::error::{HglError, Result};
use crate::lyapunov;
use crate::model::{angle_distance, error_coordinates, GridParameters, StateLayout, SystemState};

/// Distance below which a final state is attributed to an equilibrium.
pub const CLASSIFY_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TEnd,
    Converged,
    Diverged,
    /// The observer asked to stop.
    Stopped,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub layout: StateLayout,
    pub times: Vec<f64>,
    /// Flat states in canonical order, angles wrapped.
    pub states: Vec<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub vdot: Option<Vec<f64>>,
    pub termination: Termination,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> SystemState {
        SystemState::from_flat(self.layout, self.states.last().cloned().unwrap_or_default())
            .expect("trajectory states are finite and correctly sized")
    }

    /// Fills the `V` and `V_dot` traces relative to `x*_s`.
    pub fn annotate_lyapunov(&mut self, p: &GridParameters, eq: &EquilibriumSet) -> Result<()> {
        let xs = eq.stable();
        let mut v = Vec::with_capacity(self.states.len());
        let mut vdot = Vec::with_capacity(self.states.len());
        for x in &self.states {
            let s = SystemState::from_flat(self.layout, x.clone())?;
            let xhat = error_coordinates(&s, xs);
            v.push(lyapunov::evaluate_v(&xhat, p)?.0);
            vdot.push(lyapunov::evaluate_vdot_analytic(&xhat, p, eq)?);
        }
        self.v = Some(v);
        self.vdot = Some(vdot);
        Ok(())
    }

    /// Largest increase `V(t_{k+1}) - V(t_k)`; requires [`Self::annotate_lyapunov`].
    pub fn max_v_increase(&self) -> Option<f64> {
        let v = self.v.as_ref()?;
        Some(
            v.windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// Distance between two states: angle distance on the manifold for `delta`,
/// Euclidean on `y`, combined in quadrature.
pub fn state_distance(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let d = if k < n { angle_distance(*x, *y) } else { x - y };
        acc += d * d;
    }
    acc.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub index: usize,
    pub label: EquilibriumLabel,
}

/// Index of the equilibrium within `tol` of `x`, if any.
pub fn classify_state(x: &[f64], eq: &EquilibriumSet, tol: f64) -> Result<Option<Classification>> {
    let n = eq.stable().layout().n;
    let mut hit: Option<Classification> = None;
    for (index, pt) in eq.points.iter().enumerate() {
        if state_distance(x, pt.state.as_slice(), n) < tol {
            if hit.is_some() {
                return Err(HglError::Consistency(
                    "state lies within tolerance of two equilibria".into(),
                ));
            }
            hit = Some(Classification {
                index,
                label: pt.label,
            });
        }
    }
    Ok(hit)
}

/// Classifies the final state of a trajectory.
pub fn classify_convergence(
    traj: &Trajectory,
    eq: &EquilibriumSet,
    tol: f64,
) -> Result<Option<Classification>> {
    match traj.states.last() {
        Some(x) => classify_state(x, eq, tol),
        None => Ok(None),
    }
}
