//! Stationary points of the closed loop.
//!
//! With the frequencies and dc voltages pinned to their references, the
//! angle rows force `sin((delta - delta_r) / 2) = 0`, the dc rows are solved
//! directly, and the filter/line block reduces to the linear system
//! `F y_bar = h` whose symmetric part is negative definite. The equilibria
//! therefore form a set of `2^n` points sharing one `y*` and differing only
//! in which angles sit at `delta_r` or `delta_r + 2*pi`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::controller::ControllerKind;
use crate::error::{HglError, Result};
use crate::model::angle::{phasor, wrap_unchecked};
use crate::model::{vector_field, GridParameters, StateLayout, SystemState};

/// Residual bound `||f(x*)||_inf` for a point to count as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

pub const MAX_ENUMERATED_UNITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumLabel {
    StableCandidate,
    Saddle,
}

#[derive(Clone, Debug)]
pub struct EquilibriumPoint {
    pub state: SystemState,
    pub label: EquilibriumLabel,
    /// `shifted[j]` is true when `delta*_j = delta_r,j + 2*pi`.
    pub shifted: Vec<bool>,
}

/// The unique stationary `y*` together with the stable candidate `x*_s`.
#[derive(Clone, Debug)]
pub struct StationaryPoint {
    pub xs: SystemState,
    pub torque_ref: Vec<f64>,
    pub i_dc_ref: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EquilibriumSet {
    pub points: Vec<EquilibriumPoint>,
    pub stable_index: usize,
    pub torque_ref: Vec<f64>,
    pub i_dc_ref: Vec<f64>,
}

impl EquilibriumSet {
    pub fn stable(&self) -> &SystemState {
        &self.points[self.stable_index].state
    }

    /// Shared non-angle part `y*`.
    pub fn y_star(&self) -> &[f64] {
        self.stable().y()
    }

    pub fn saddles(&self) -> impl Iterator<Item = &EquilibriumPoint> {
        self.points
            .iter()
            .filter(|p| p.label == EquilibriumLabel::Saddle)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Assembles `F` and `h` of the filter/line equilibrium equations
/// `F (i, v, i_g) = h`.
pub fn build_f_h(
    delta_star: &[f64],
    omega_star: &[f64],
    v_dc_star: &[f64],
    p: &GridParameters,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = p.n;
    let mut f = DMatrix::zeros(6 * n, 6 * n);
    let mut h = DVector::zeros(6 * n);
    let (bi, bv, bg) = (0, 2 * n, 4 * n);
    for j in 0..n {
        let w = omega_star[j];
        let blocks = [
            (bi, p.r[j], p.l[j]),
            (bv, p.g[j], p.c[j]),
            (bg, p.r_g[j], p.l_g[j]),
        ];
        // -(X - Y w J2) on the diagonal blocks
        for (base, diss, store) in blocks {
            let d = base + 2 * j;
            f[(d, d)] = -diss;
            f[(d + 1, d + 1)] = -diss;
            f[(d, d + 1)] = -store * w;
            f[(d + 1, d)] = store * w;
        }
        for a in 0..2 {
            f[(bi + 2 * j + a, bv + 2 * j + a)] = -1.0;
            f[(bv + 2 * j + a, bi + 2 * j + a)] = 1.0;
            f[(bv + 2 * j + a, bg + 2 * j + a)] = -1.0;
            f[(bg + 2 * j + a, bv + 2 * j + a)] = 1.0;
        }
        let r = phasor(delta_star[j]);
        h[bi + 2 * j] = -p.mu[j] * r[0] * v_dc_star[j];
        h[bi + 2 * j + 1] = -p.mu[j] * r[1] * v_dc_star[j];
        h[bg + 2 * j] = p.b[j] * w;
    }
    (f, h)
}

/// Solves for `y*` at `delta* = delta_r` with `omega* = omega_r` and
/// `v_dc* = v_dc_r`. The references `T_r` and `i_dc_r` are taken as given.
pub fn stationary_point(p: &GridParameters) -> Result<StationaryPoint> {
    p.validate()?;
    let lay = StateLayout::new(p.n, p.m);
    let n = p.n;
    let (f, h) = build_f_h(&p.delta_r, &p.omega_r, &p.v_dc_ref, p);
    let ybar = f
        .lu()
        .solve(&h)
        .ok_or_else(|| HglError::Singular("filter/line matrix F is singular".into()))?;
    if ybar.iter().any(|v| !v.is_finite()) {
        return Err(HglError::Singular("non-finite solution of F y = h".into()));
    }

    let mut xs = SystemState::zeros(lay);
    xs.delta_mut().copy_from_slice(&p.delta_r);
    for k in 0..p.m {
        let bt_v: f64 = (0..n).map(|j| p.incidence[(j, k)] * p.v_dc_ref[j]).sum();
        xs.i_dc_n_mut()[k] = -bt_v / p.r_dc[k];
    }
    xs.i_dc_g_mut().copy_from_slice(&p.i_dc_ref);
    xs.v_dc_mut().copy_from_slice(&p.v_dc_ref);
    xs.i_mut().copy_from_slice(ybar.rows(0, 2 * n).as_slice());
    xs.v_mut().copy_from_slice(ybar.rows(2 * n, 2 * n).as_slice());
    xs.i_g_mut().copy_from_slice(ybar.rows(4 * n, 2 * n).as_slice());
    xs.omega_g_mut().copy_from_slice(&p.omega_r);
    xs.t_m_mut().copy_from_slice(&p.torque_ref);
    xs.wrap();
    Ok(StationaryPoint {
        xs,
        torque_ref: p.torque_ref.clone(),
        i_dc_ref: p.i_dc_ref.clone(),
    })
}

/// Lists all `2^n` equilibria; the all-`delta_r` pattern is the stable candidate.
pub fn enumerate_equilibria(base: &StationaryPoint) -> Result<EquilibriumSet> {
    let lay = base.xs.layout();
    let n = lay.n;
    if n > MAX_ENUMERATED_UNITS {
        return Err(HglError::TooManyUnits(n));
    }
    let delta_r = base.xs.delta().to_vec();
    let points = (0..1usize << n)
        .map(|mask| {
            let shifted: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
            let mut state = base.xs.clone();
            for (j, d) in state.delta_mut().iter_mut().enumerate() {
                if shifted[j] {
                    *d = wrap_unchecked(delta_r[j] + 2.0 * std::f64::consts::PI);
                }
            }
            EquilibriumPoint {
                state,
                label: if mask == 0 {
                    EquilibriumLabel::StableCandidate
                } else {
                    EquilibriumLabel::Saddle
                },
                shifted,
            }
        })
        .collect();
    Ok(EquilibriumSet {
        points,
        stable_index: 0,
        torque_ref: base.torque_ref.clone(),
        i_dc_ref: base.i_dc_ref.clone(),
    })
}

pub fn solve_stationary(p: &GridParameters) -> Result<EquilibriumSet> {
    enumerate_equilibria(&stationary_point(p)?)
}

/// Returns `p` with `T_r` and `i_dc_r` chosen so that the frequency, torque,
/// dc-generation and dc-node rows vanish at `(omega_r, v_dc_r)`.
pub fn synthesize_references(p: &GridParameters) -> Result<GridParameters> {
    let base = stationary_point(p)?;
    let xs = &base.xs;
    let mut q = p.clone();
    for j in 0..p.n {
        let ig_d = xs.i_g()[2 * j];
        q.torque_ref[j] = p.d_friction[j] * p.omega_r[j] - p.b[j] * ig_d;

        let r = phasor(p.delta_r[j]);
        let ij = &xs.i()[2 * j..2 * j + 2];
        let m_t_i = p.mu[j] * (r[0] * ij[0] + r[1] * ij[1]);
        let b_i: f64 = (0..p.m).map(|k| p.incidence[(j, k)] * xs.i_dc_n()[k]).sum();
        q.i_dc_ref[j] = p.g_dc[j] * p.v_dc_ref[j] + m_t_i - b_i - p.i_dc_inj[j];
    }
    Ok(q)
}

/// `||f(x*_s)||_inf` under the references currently stored in `p`; used to
/// audit user-supplied references.
pub fn reference_residual(p: &GridParameters) -> Result<f64> {
    let base = stationary_point(p)?;
    let f = vector_field(&base.xs, p, &ControllerKind::HacAngle)?;
    Ok(f.iter().fold(0.0, |a, v| a.max(v.abs())))
}

/// Maximum residual over all points of the set.
pub fn max_residual(eq: &EquilibriumSet, p: &GridParameters) -> Result<f64> {
    let mut worst = 0.0f64;
    for pt in &eq.points {
        let f = vector_field(&pt.state, p, &ControllerKind::HacAngle)?;
        worst = f.iter().fold(worst, |a, v| a.max(v.abs()));
    }
    Ok(worst)
}
