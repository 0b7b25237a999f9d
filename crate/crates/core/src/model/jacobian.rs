use nalgebra::DMatrix;

use crate::controller::ControllerKind;
use crate::model::angle::{phasor, wrap_unchecked};
use crate::model::field::{eval_field, rot};
use crate::model::{GridParameters, StateLayout, SystemState};

/// Analytic Jacobian `df/dx` of the hybrid-angle-controlled field.
pub fn analytic_jacobian(x: &SystemState, p: &GridParameters) -> DMatrix<f64> {
    let lay = StateLayout::new(p.n, p.m);
    let n = p.n;
    let mut jac = DMatrix::zeros(lay.dim(), lay.dim());

    let (d0, idcn0, idcg0, vdc0, i0, v0, ig0, w0, t0) = (
        lay.delta().start,
        lay.i_dc_n().start,
        lay.i_dc_g().start,
        lay.v_dc().start,
        lay.i().start,
        lay.v().start,
        lay.i_g().start,
        lay.omega_g().start,
        lay.t_m().start,
    );
    let delta = x.delta();
    let v_dc = x.v_dc();
    let (i, v, i_g, omega) = (x.i(), x.v(), x.i_g(), x.omega_g());

    for j in 0..n {
        let err = wrap_unchecked(delta[j] - p.delta_r[j]);
        jac[(d0 + j, d0 + j)] = -0.5 * p.gamma[j] * (0.5 * err).cos();
        jac[(d0 + j, vdc0 + j)] = p.eta[j];
        jac[(d0 + j, w0 + j)] = -1.0;
    }
    for k in 0..p.m {
        for j in 0..n {
            let b = p.incidence[(j, k)];
            jac[(idcn0 + k, vdc0 + j)] = -b;
            jac[(vdc0 + j, idcn0 + k)] = b;
        }
        jac[(idcn0 + k, idcn0 + k)] = -p.r_dc[k];
    }
    for j in 0..n {
        jac[(idcg0 + j, vdc0 + j)] = -p.kappa_dc[j];
        jac[(idcg0 + j, idcg0 + j)] = -1.0;

        let r = phasor(delta[j]);
        let dr = [-r[1], r[0]];
        let mu = p.mu[j];
        let ij = &i[2 * j..2 * j + 2];
        let vj = &v[2 * j..2 * j + 2];
        let igj = &i_g[2 * j..2 * j + 2];
        let w = omega[j];

        let row = vdc0 + j;
        jac[(row, idcg0 + j)] = 1.0;
        jac[(row, vdc0 + j)] = -p.g_dc[j];
        jac[(row, d0 + j)] = -mu * (dr[0] * ij[0] + dr[1] * ij[1]);
        jac[(row, i0 + 2 * j)] = -mu * r[0];
        jac[(row, i0 + 2 * j + 1)] = -mu * r[1];

        // w J2 block: d-row gets -w on q, q-row gets +w on d
        let ji = rot(ij);
        let jv = rot(vj);
        let jig = rot(igj);
        for a in 0..2 {
            let ri = i0 + 2 * j + a;
            jac[(ri, d0 + j)] = mu * dr[a] * v_dc[j];
            jac[(ri, vdc0 + j)] = mu * r[a];
            jac[(ri, i0 + 2 * j + a)] = -p.r[j];
            jac[(ri, v0 + 2 * j + a)] = -1.0;
            jac[(ri, w0 + j)] = p.l[j] * ji[a];

            let rv = v0 + 2 * j + a;
            jac[(rv, i0 + 2 * j + a)] = 1.0;
            jac[(rv, v0 + 2 * j + a)] = -p.g[j];
            jac[(rv, ig0 + 2 * j + a)] = -1.0;
            jac[(rv, w0 + j)] = p.c[j] * jv[a];

            let rg = ig0 + 2 * j + a;
            jac[(rg, v0 + 2 * j + a)] = 1.0;
            jac[(rg, ig0 + 2 * j + a)] = -p.r_g[j];
            jac[(rg, w0 + j)] = p.l_g[j] * jig[a];
        }
        jac[(ig0 + 2 * j, w0 + j)] -= p.b[j];
        for (start, coeff) in [(i0, p.l[j]), (v0, p.c[j]), (ig0, p.l_g[j])] {
            jac[(start + 2 * j, start + 2 * j + 1)] = -coeff * w;
            jac[(start + 2 * j + 1, start + 2 * j)] = coeff * w;
        }

        jac[(w0 + j, t0 + j)] = 1.0;
        jac[(w0 + j, w0 + j)] = -p.damping(j);
        jac[(w0 + j, ig0 + 2 * j)] = p.b[j];

        jac[(t0 + j, w0 + j)] = -p.kappa_g[j];
        jac[(t0 + j, t0 + j)] = -1.0;
    }
    jac
}

/// Central-difference Jacobian of `f` with absolute step `h`.
pub fn numerical_jacobian(
    x: &SystemState,
    p: &GridParameters,
    ctl: &ControllerKind,
    h: f64,
) -> DMatrix<f64> {
    let dim = x.as_slice().len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut xp = x.as_slice().to_vec();
    let mut fp = vec![0.0; dim];
    let mut fm = vec![0.0; dim];
    for k in 0..dim {
        let orig = xp[k];
        xp[k] = orig + h;
        eval_field(&xp, p, ctl, &mut fp);
        xp[k] = orig - h;
        eval_field(&xp, p, ctl, &mut fm);
        xp[k] = orig;
        for r in 0..dim {
            jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}
