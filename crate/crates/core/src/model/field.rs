use nalgebra::DMatrix;

use crate::controller::{active_power, hac_frequency, hac_power_frequency, ControllerKind};
use crate::error::{HglError, Result};
use crate::model::angle::{phasor, wrap_unchecked};
use crate::model::{GridParameters, StateLayout, SystemState};

/// `J2 * (a, b)`, rotation by `pi/2`.
#[inline]
pub(crate) fn rot(x: &[f64]) -> [f64; 2] {
    [-x[1], x[0]]
}

/// Modulation matrix `m(delta)` (`2n x n`). Column `j` is `mu_j r(delta_j)`
/// placed on the dq rows of unit `j`.
pub fn modulation_matrix(delta: &[f64], mu: &[f64]) -> DMatrix<f64> {
    let n = delta.len();
    let mut m = DMatrix::zeros(2 * n, n);
    for j in 0..n {
        let r = phasor(delta[j]);
        m[(2 * j, j)] = mu[j] * r[0];
        m[(2 * j + 1, j)] = mu[j] * r[1];
    }
    m
}

/// COI voltage map `psi` (`2n x n`), d-axis aligned: column `j` is `b_j` at row `2j`.
pub fn build_psi(b: &[f64]) -> DMatrix<f64> {
    let n = b.len();
    let mut psi = DMatrix::zeros(2 * n, n);
    for (j, &bj) in b.iter().enumerate() {
        psi[(2 * j, j)] = bj;
    }
    psi
}

/// Closed-loop right-hand side `f(x)` (not premultiplied by `K^-1`).
pub fn vector_field(x: &SystemState, p: &GridParameters, ctl: &ControllerKind) -> Result<Vec<f64>> {
    let layout = StateLayout::new(p.n, p.m);
    if x.layout() != layout {
        return Err(HglError::DimensionMismatch {
            what: "state",
            expected: layout.dim(),
            got: x.as_slice().len(),
        });
    }
    let mut out = vec![0.0; layout.dim()];
    eval_field(x.as_slice(), p, ctl, &mut out);
    Ok(out)
}

/// Raw evaluation on a flat slice; callers guarantee the dimensions.
pub(crate) fn eval_field(x: &[f64], p: &GridParameters, ctl: &ControllerKind, out: &mut [f64]) {
    let lay = StateLayout::new(p.n, p.m);
    let n = p.n;
    let delta = &x[lay.delta()];
    let i_dc_n = &x[lay.i_dc_n()];
    let i_dc_g = &x[lay.i_dc_g()];
    let v_dc = &x[lay.v_dc()];
    let i = &x[lay.i()];
    let v = &x[lay.v()];
    let i_g = &x[lay.i_g()];
    let omega = &x[lay.omega_g()];
    let t_m = &x[lay.t_m()];

    let omega_c = match ctl {
        ControllerKind::HacAngle => hac_frequency(delta, v_dc, p),
        ControllerKind::HacPower { p_r } => {
            let pflow = active_power(v, i_g);
            hac_power_frequency(&pflow, v_dc, p, p_r).omega_c
        }
    };
    let off = lay.delta().start;
    for j in 0..n {
        out[off + j] = omega_c[j] - omega[j];
    }

    let off = lay.i_dc_n().start;
    for k in 0..p.m {
        let bt_v: f64 = (0..n).map(|j| p.incidence[(j, k)] * v_dc[j]).sum();
        out[off + k] = -bt_v - p.r_dc[k] * i_dc_n[k];
    }

    let off = lay.i_dc_g().start;
    for j in 0..n {
        out[off + j] = p.i_dc_ref[j] - p.kappa_dc[j] * (v_dc[j] - p.v_dc_ref[j]) - i_dc_g[j];
    }

    let (o_vdc, o_i, o_v, o_ig, o_w, o_t) = (
        lay.v_dc().start,
        lay.i().start,
        lay.v().start,
        lay.i_g().start,
        lay.omega_g().start,
        lay.t_m().start,
    );
    for j in 0..n {
        let r = phasor(delta[j]);
        let mu = p.mu[j];
        let ij = &i[2 * j..2 * j + 2];
        let vj = &v[2 * j..2 * j + 2];
        let igj = &i_g[2 * j..2 * j + 2];
        let w = omega[j];

        let b_i: f64 = (0..p.m).map(|k| p.incidence[(j, k)] * i_dc_n[k]).sum();
        let m_t_i = mu * (r[0] * ij[0] + r[1] * ij[1]);
        out[o_vdc + j] = i_dc_g[j] + b_i - p.g_dc[j] * v_dc[j] - m_t_i + p.i_dc_inj[j];

        let ji = rot(ij);
        let jv = rot(vj);
        let jig = rot(igj);
        for a in 0..2 {
            out[o_i + 2 * j + a] =
                mu * r[a] * v_dc[j] - p.r[j] * ij[a] + p.l[j] * w * ji[a] - vj[a];
            out[o_v + 2 * j + a] = ij[a] - p.g[j] * vj[a] + p.c[j] * w * jv[a] - igj[a];
            out[o_ig + 2 * j + a] = vj[a] - p.r_g[j] * igj[a] + p.l_g[j] * w * jig[a];
        }
        // psi * omega only has a d component
        out[o_ig + 2 * j] -= p.b[j] * w;

        out[o_w + j] = t_m[j] - p.d_friction[j] * w - p.d_damper[j] * (w - p.omega_r[j])
            + p.b[j] * igj[0];
        out[o_t + j] = p.torque_ref[j] - p.kappa_g[j] * (w - p.omega_r[j]) - t_m[j];
    }
}

/// Error coordinates `x_hat = x - x_star`, with the angle difference wrapped.
pub fn error_coordinates(x: &SystemState, xstar: &SystemState) -> Vec<f64> {
    let n = x.layout().n;
    x.as_slice()
        .iter()
        .zip(xstar.as_slice())
        .enumerate()
        .map(|(k, (a, b))| if k < n { wrap_unchecked(a - b) } else { a - b })
        .collect()
}

/// Inverse of [`error_coordinates`].
pub fn from_error_coordinates(xhat: &[f64], xstar: &SystemState) -> Result<SystemState> {
    let layout = xstar.layout();
    layout.check("error state", xhat.len())?;
    let data = xhat.iter().zip(xstar.as_slice()).map(|(a, b)| a + b).collect();
    SystemState::from_flat(layout, data)
}

/// Translated field `f_hat(x_hat) = f(x_hat + x_star)` under hybrid angle
/// control, written directly in error coordinates with the modulation error
/// `E(delta) = m(delta) - m(delta_star)`.
///
/// `xstar` must be an exact equilibrium whose frequency and dc voltages sit at
/// their references.
pub fn error_vector_field(xhat: &[f64], xstar: &SystemState, p: &GridParameters) -> Result<Vec<f64>> {
    let lay = StateLayout::new(p.n, p.m);
    lay.check("error state", xhat.len())?;
    if xstar.layout() != lay {
        return Err(HglError::DimensionMismatch {
            what: "equilibrium",
            expected: lay.dim(),
            got: xstar.as_slice().len(),
        });
    }
    let n = p.n;
    let dh = &xhat[lay.delta()];
    let idcn_h = &xhat[lay.i_dc_n()];
    let idcg_h = &xhat[lay.i_dc_g()];
    let vdc_h = &xhat[lay.v_dc()];
    let i_h = &xhat[lay.i()];
    let v_h = &xhat[lay.v()];
    let ig_h = &xhat[lay.i_g()];
    let w_h = &xhat[lay.omega_g()];
    let t_h = &xhat[lay.t_m()];

    let dstar = xstar.delta();
    let i_s = xstar.i();
    let v_s = xstar.v();
    let ig_s = xstar.i_g();
    let vdc_s = xstar.v_dc();
    let w_s = xstar.omega_g();

    let mut out = vec![0.0; lay.dim()];

    for j in 0..n {
        let err = wrap_unchecked(dh[j] + dstar[j] - p.delta_r[j]);
        out[j] = p.eta[j] * vdc_h[j] - p.gamma[j] * (0.5 * err).sin() - w_h[j];
    }
    let off = lay.i_dc_n().start;
    for k in 0..p.m {
        let bt_v: f64 = (0..n).map(|j| p.incidence[(j, k)] * vdc_h[j]).sum();
        out[off + k] = -bt_v - p.r_dc[k] * idcn_h[k];
    }
    let off = lay.i_dc_g().start;
    for j in 0..n {
        out[off + j] = -p.kappa_dc[j] * vdc_h[j] - idcg_h[j];
    }

    let (o_vdc, o_i, o_v, o_ig, o_w, o_t) = (
        lay.v_dc().start,
        lay.i().start,
        lay.v().start,
        lay.i_g().start,
        lay.omega_g().start,
        lay.t_m().start,
    );
    for j in 0..n {
        let delta = wrap_unchecked(dh[j] + dstar[j]);
        let r = phasor(delta);
        let rs = phasor(dstar[j]);
        let mu = p.mu[j];
        let e = [mu * (r[0] - rs[0]), mu * (r[1] - rs[1])];
        let m = [mu * r[0], mu * r[1]];
        let s = 2 * j..2 * j + 2;
        let (ih, vh, igh) = (&i_h[s.clone()], &v_h[s.clone()], &ig_h[s.clone()]);
        let (is, vs, igs) = (&i_s[s.clone()], &v_s[s.clone()], &ig_s[s]);
        let w = w_h[j] + w_s[j];

        let b_i: f64 = (0..p.m).map(|k| p.incidence[(j, k)] * idcn_h[k]).sum();
        out[o_vdc + j] = idcg_h[j] + b_i - p.g_dc[j] * vdc_h[j]
            - (e[0] * is[0] + e[1] * is[1])
            - (m[0] * ih[0] + m[1] * ih[1]);

        let (jih, jis) = (rot(ih), rot(is));
        let (jvh, jvs) = (rot(vh), rot(vs));
        let (jigh, jigs) = (rot(igh), rot(igs));
        for a in 0..2 {
            out[o_i + 2 * j + a] = m[a] * vdc_h[j] + e[a] * vdc_s[j] - p.r[j] * ih[a]
                + p.l[j] * w * jih[a]
                + p.l[j] * w_h[j] * jis[a]
                - vh[a];
            out[o_v + 2 * j + a] = ih[a] - p.g[j] * vh[a]
                + p.c[j] * w * jvh[a]
                + p.c[j] * w_h[j] * jvs[a]
                - igh[a];
            out[o_ig + 2 * j + a] = vh[a] - p.r_g[j] * igh[a]
                + p.l_g[j] * w * jigh[a]
                + p.l_g[j] * w_h[j] * jigs[a];
        }
        out[o_ig + 2 * j] -= p.b[j] * w_h[j];

        out[o_w + j] = t_h[j] - p.damping(j) * w_h[j] + p.b[j] * igh[0];
        out[o_t + j] = -p.kappa_g[j] * w_h[j] - t_h[j];
    }
    Ok(out)
}

/// `K^-1 f(x)` on a flat slice.
pub(crate) fn eval_rhs(
    x: &[f64],
    p: &GridParameters,
    ctl: &ControllerKind,
    mass: &[f64],
    out: &mut [f64],
) {
    eval_field(x, p, ctl, out);
    for (o, k) in out.iter_mut().zip(mass) {
        *o /= k;
    }
}
