//! LaSalle function `V = S(delta_hat) + H(y_hat)` in error coordinates around
//! `x*_s`, its time derivative along the closed loop, and the quadratic upper
//! bound `V_dot <= -x_bar^T Q x_bar`.
//!
//! `S = 2 sum_j lambda_j (1 - cos(delta_hat_j / 2))` with `lambda_j = 2 / eta_j`,
//! and `H = y_hat^T P y_hat / 2` with
//! `P = diag(L_dc, tau_dc / kappa_dc, C_dc, L, C, L_g, J, tau_g / kappa_g)`.

use serde::Serialize;

use crate::certificates::{build_q, BoundParameters};
use crate::equilibria::EquilibriumSet;
use crate::error::{HglError, Result};
use crate::model::angle::phasor;
use crate::model::field::rot;
use crate::model::{error_vector_field, GridParameters, MassMatrix, StateLayout};

/// Relative tolerance between the closed-form derivative and the chain rule.
pub const CHAIN_RULE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovEvaluation {
    pub v: f64,
    pub s_part: f64,
    pub h_part: f64,
    pub vdot_analytic: f64,
    /// `-x_bar^T Q x_bar`.
    pub vdot_bound: f64,
    /// `(x_bar_1, x_bar_2)` concatenated: per-unit `(sin(delta_hat/2), v_dc_hat, omega_hat)`
    /// triples followed by `(i_dc_n, i_dc_g, i, v, i_g, T_m)` errors.
    pub x_bar: Vec<f64>,
}

/// Weights of the storage function `H`, laid out like `y`.
pub fn storage_weights(p: &GridParameters) -> Vec<f64> {
    let lay = StateLayout::new(p.n, p.m);
    let n = p.n;
    let mass = MassMatrix::new(p);
    let mut w = mass.diagonal()[n..].to_vec();
    let shift = |r: std::ops::Range<usize>| r.start - n..r.end - n;
    for (k, j) in shift(lay.i_dc_g()).zip(0..n) {
        w[k] = p.tau_dc[j] / p.kappa_dc[j];
    }
    for (k, j) in shift(lay.t_m()).zip(0..n) {
        w[k] = p.tau_g[j] / p.kappa_g[j];
    }
    w
}

fn lambda(p: &GridParameters) -> Vec<f64> {
    p.eta.iter().map(|e| 2.0 / e).collect()
}

/// Returns `(V, S, H)`.
pub fn evaluate_v(xhat: &[f64], p: &GridParameters) -> Result<(f64, f64, f64)> {
    let lay = StateLayout::new(p.n, p.m);
    lay.check("error state", xhat.len())?;
    let lam = lambda(p);
    let s: f64 = (0..p.n)
        .map(|j| 2.0 * lam[j] * (1.0 - (0.5 * xhat[j]).cos()))
        .sum();
    let w = storage_weights(p);
    let h: f64 = 0.5
        * xhat[p.n..]
            .iter()
            .zip(&w)
            .map(|(y, w)| w * y * y)
            .sum::<f64>();
    Ok((s + h, s, h))
}

/// Closed-form `dV/dt` along the error dynamics. Returns the value and the sum
/// of absolute values of its terms (a scale for tolerance checks).
fn vdot_terms(xhat: &[f64], p: &GridParameters, eq: &EquilibriumSet) -> (f64, f64) {
    let lay = StateLayout::new(p.n, p.m);
    let xs = eq.stable();
    let lam = lambda(p);
    let mut total = 0.0;
    let mut scale = 0.0;
    let mut add = |t: f64| {
        total += t;
        scale += t.abs();
    };

    let dh = &xhat[lay.delta()];
    let idcn = &xhat[lay.i_dc_n()];
    let idcg = &xhat[lay.i_dc_g()];
    let vdc = &xhat[lay.v_dc()];
    let i = &xhat[lay.i()];
    let v = &xhat[lay.v()];
    let ig = &xhat[lay.i_g()];
    let w = &xhat[lay.omega_g()];
    let t = &xhat[lay.t_m()];

    for k in 0..p.m {
        add(-p.r_dc[k] * idcn[k] * idcn[k]);
    }
    for j in 0..p.n {
        let s = (0.5 * dh[j]).sin();
        add(lam[j] * s * p.eta[j] * vdc[j]);
        add(-lam[j] * p.gamma[j] * s * s);
        add(-lam[j] * s * w[j]);

        let sl = 2 * j..2 * j + 2;
        let (ij, vj, igj) = (&i[sl.clone()], &v[sl.clone()], &ig[sl.clone()]);
        let dot = |a: &[f64], b: &[f64]| a[0] * b[0] + a[1] * b[1];
        add(-p.r[j] * dot(ij, ij));
        add(-p.g[j] * dot(vj, vj));
        add(-p.r_g[j] * dot(igj, igj));
        add(-p.damping(j) * w[j] * w[j]);
        add(-t[j] * t[j] / p.kappa_g[j]);

        add(p.l[j] * w[j] * dot(ij, &rot(&xs.i()[sl.clone()])));
        add(p.c[j] * w[j] * dot(vj, &rot(&xs.v()[sl.clone()])));
        add(p.l_g[j] * w[j] * dot(igj, &rot(&xs.i_g()[sl.clone()])));

        add(-idcg[j] * idcg[j] / p.kappa_dc[j]);
        add(-p.g_dc[j] * vdc[j] * vdc[j]);

        let r = phasor(dh[j] + xs.delta()[j]);
        let rs = phasor(xs.delta()[j]);
        let e = [p.mu[j] * (r[0] - rs[0]), p.mu[j] * (r[1] - rs[1])];
        add(-vdc[j] * dot(&e, &xs.i()[sl]));
        add(dot(ij, &e) * xs.v_dc()[j]);
    }
    (total, scale)
}

/// `grad V . K^-1 f_hat`, computed through the translated vector field.
pub fn vdot_chain_rule(xhat: &[f64], p: &GridParameters, eq: &EquilibriumSet) -> Result<f64> {
    let n = p.n;
    let mut fhat = error_vector_field(xhat, eq.stable(), p)?;
    MassMatrix::new(p).solve_in_place(&mut fhat);
    let lam = lambda(p);
    let w = storage_weights(p);
    let angle: f64 = (0..n)
        .map(|j| lam[j] * (0.5 * xhat[j]).sin() * fhat[j])
        .sum();
    let storage: f64 = (0..w.len())
        .map(|k| w[k] * xhat[n + k] * fhat[n + k])
        .sum();
    Ok(angle + storage)
}

/// Closed-form `dV/dt`, audited against the chain-rule evaluation.
pub fn evaluate_vdot_analytic(xhat: &[f64], p: &GridParameters, eq: &EquilibriumSet) -> Result<f64> {
    StateLayout::new(p.n, p.m).check("error state", xhat.len())?;
    let (analytic, scale) = vdot_terms(xhat, p, eq);
    let chain = vdot_chain_rule(xhat, p, eq)?;
    if (analytic - chain).abs() > CHAIN_RULE_TOL * (1.0 + scale) {
        return Err(HglError::Consistency(format!(
            "closed-form dV/dt = {analytic:e} but chain rule gives {chain:e}"
        )));
    }
    Ok(analytic)
}

/// Nonlinear coordinates `x_bar` in which the derivative bound is quadratic.
pub fn bound_coordinates(xhat: &[f64], p: &GridParameters) -> Vec<f64> {
    let lay = StateLayout::new(p.n, p.m);
    let mut out = Vec::with_capacity(lay.dim());
    for j in 0..p.n {
        out.push((0.5 * xhat[j]).sin());
        out.push(xhat[lay.v_dc().start + j]);
        out.push(xhat[lay.omega_g().start + j]);
    }
    for r in [lay.i_dc_n(), lay.i_dc_g(), lay.i(), lay.v(), lay.i_g(), lay.t_m()] {
        out.extend_from_slice(&xhat[r]);
    }
    out
}

/// `-x_bar^T Q x_bar` for the given bound parameters.
pub fn quadratic_bound(xhat: &[f64], p: &GridParameters, bp: &BoundParameters) -> f64 {
    let q = build_q(p, bp);
    let xb = bound_coordinates(xhat, p);
    let mut acc = 0.0;
    for (j, block) in q.q11.iter().enumerate() {
        let z = nalgebra::Vector3::new(xb[3 * j], xb[3 * j + 1], xb[3 * j + 2]);
        acc += z.dot(&(block * z));
    }
    for (k, d) in q.q22.iter().enumerate() {
        let z = xb[3 * p.n + k];
        acc += d * z * z;
    }
    -acc
}

/// `(-x_bar^T Q x_bar) - V_dot`; nonnegative whenever the bound holds.
pub fn quadratic_bound_gap(
    xhat: &[f64],
    p: &GridParameters,
    eq: &EquilibriumSet,
    bp: &BoundParameters,
) -> Result<f64> {
    let vdot = evaluate_vdot_analytic(xhat, p, eq)?;
    Ok(quadratic_bound(xhat, p, bp) - vdot)
}

/// All Lyapunov quantities at one error state, with the standard bound parameters.
pub fn evaluate(xhat: &[f64], p: &GridParameters, eq: &EquilibriumSet) -> Result<LyapunovEvaluation> {
    let (v, s_part, h_part) = evaluate_v(xhat, p)?;
    let vdot_analytic = evaluate_vdot_analytic(xhat, p, eq)?;
    let bp = BoundParameters::assign(p, eq);
    Ok(LyapunovEvaluation {
        v,
        s_part,
        h_part,
        vdot_analytic,
        vdot_bound: quadratic_bound(xhat, p, &bp),
        x_bar: bound_coordinates(xhat, p),
    })
}

/// `V` evaluated directly on absolute states, with the weights precomputed.
/// Used inside integration loops.
#[derive(Clone, Debug)]
pub struct LyapunovTracker {
    lambda: Vec<f64>,
    weights: Vec<f64>,
    xs: Vec<f64>,
    n: usize,
}

impl LyapunovTracker {
    pub fn new(p: &GridParameters, eq: &EquilibriumSet) -> Self {
        LyapunovTracker {
            lambda: lambda(p),
            weights: storage_weights(p),
            xs: eq.stable().as_slice().to_vec(),
            n: p.n,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let s: f64 = (0..n)
            .map(|j| 2.0 * self.lambda[j] * (1.0 - (0.5 * (x[j] - self.xs[j])).cos()))
            .sum();
        let h: f64 = (0..self.weights.len())
            .map(|k| {
                let d = x[n + k] - self.xs[n + k];
                self.weights[k] * d * d
            })
            .sum();
        s + 0.5 * h
    }
}
