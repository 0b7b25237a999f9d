mod common;

use std::f64::consts::PI;

use common::{desk, max_abs, rng};
use hgl_core::model::{
    analytic_jacobian, build_psi, error_coordinates, error_vector_field, from_error_coordinates,
    modulation_matrix, numerical_jacobian, vector_field, wrap_angle,
};
use hgl_core::presets::{desk_parameters, random_parameters};
use hgl_core::{ControllerKind, GridParameters, StateLayout, SystemState};
use proptest::prelude::*;
use rand::Rng;

/// Hand transcription of the single-unit closed loop, no dc lines.
fn single_unit_oracle(x: &[f64], p: &GridParameters) -> Vec<f64> {
    let (delta, idcg, vdc) = (x[0], x[1], x[2]);
    let (id, iq, vd, vq, igd, igq, w, tm) = (x[3], x[4], x[5], x[6], x[7], x[8], x[9], x[10]);
    let mu = p.mu[0];
    let mut err = delta - p.delta_r[0];
    while err >= 2.0 * PI {
        err -= 4.0 * PI;
    }
    while err < -2.0 * PI {
        err += 4.0 * PI;
    }
    let omega_c = p.omega_r[0] + p.eta[0] * (vdc - p.v_dc_ref[0]) - p.gamma[0] * (err / 2.0).sin();
    let (c, s) = (delta.cos(), delta.sin());
    vec![
        omega_c - w,
        p.i_dc_ref[0] - p.kappa_dc[0] * (vdc - p.v_dc_ref[0]) - idcg,
        idcg - p.g_dc[0] * vdc - mu * (c * id + s * iq) + p.i_dc_inj[0],
        mu * c * vdc - p.r[0] * id - p.l[0] * w * iq - vd,
        mu * s * vdc - p.r[0] * iq + p.l[0] * w * id - vq,
        id - p.g[0] * vd - p.c[0] * w * vq - igd,
        iq - p.g[0] * vq + p.c[0] * w * vd - igq,
        vd - p.r_g[0] * igd - p.l_g[0] * w * igq - p.b[0] * w,
        vq - p.r_g[0] * igq + p.l_g[0] * w * igd,
        tm - p.d_friction[0] * w - p.d_damper[0] * (w - p.omega_r[0]) + p.b[0] * igd,
        p.torque_ref[0] - p.kappa_g[0] * (w - p.omega_r[0]) - tm,
    ]
}

fn random_state<R: Rng>(r: &mut R, layout: StateLayout) -> SystemState {
    let mut data: Vec<f64> = (0..layout.dim()).map(|_| r.random_range(-2.0..2.0)).collect();
    for d in &mut data[layout.delta()] {
        *d = r.random_range(-2.0 * PI..2.0 * PI);
    }
    SystemState::from_flat(layout, data).unwrap()
}

#[test]
fn wrap_examples() {
    assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
    assert!(wrap_angle(4.0 * PI).unwrap().abs() < 1e-15);
    assert!((wrap_angle(3.0 * PI).unwrap() + PI).abs() < 1e-15);
    assert!(wrap_angle(f64::NAN).is_err());
    assert!(wrap_angle(f64::INFINITY).is_err());
}

#[test]
fn modulation_examples() {
    let m = modulation_matrix(&[0.0], &[0.5]);
    assert_eq!(m.shape(), (2, 1));
    assert_eq!((m[(0, 0)], m[(1, 0)]), (0.5, 0.0));

    let m = modulation_matrix(&[0.0, PI / 2.0], &[0.5, 0.5]);
    let c0: Vec<f64> = m.column(0).iter().copied().collect();
    let c1: Vec<f64> = m.column(1).iter().copied().collect();
    assert_eq!(c0, vec![0.5, 0.0, 0.0, 0.0]);
    assert_eq!(c1[0..2], [0.0, 0.0]);
    assert!(c1[2].abs() < 1e-16 && (c1[3] - 0.5).abs() < 1e-16);
}

#[test]
fn psi_examples() {
    let psi = build_psi(&[1.2]);
    assert_eq!((psi[(0, 0)], psi[(1, 0)]), (1.2, 0.0));

    let psi = build_psi(&[1.0, 1.0]);
    let ig = nalgebra::DVector::from_vec(vec![0.3, -0.7, 1.1, 2.0]);
    let te = psi.transpose() * ig;
    assert_eq!(te.as_slice(), &[0.3, 1.1]);

    let psi = build_psi(&[0.5, 0.25]);
    let w = nalgebra::DVector::from_vec(vec![1.5, -2.0]);
    assert_eq!((psi * w).as_slice(), &[0.75, 0.0, -0.5, 0.0]);
}

#[test]
fn single_unit_matches_transcription() {
    let mut r = rng(11);
    for _ in 0..200 {
        let p = random_parameters(&mut r, 1, 0);
        let x = random_state(&mut r, StateLayout::new(1, 0));
        let got = vector_field(&x, &p, &ControllerKind::HacAngle).unwrap();
        let want = single_unit_oracle(x.as_slice(), &p);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }
}

#[test]
fn field_dimensions() {
    let p = desk_parameters(2, 1);
    let lay = StateLayout::new(2, 1);
    assert_eq!(lay.y_dim(), 21);
    let f = vector_field(&SystemState::zeros(lay), &p, &ControllerKind::HacAngle).unwrap();
    assert_eq!(f.len(), 23);
    let wrong = SystemState::zeros(StateLayout::new(1, 0));
    assert!(vector_field(&wrong, &p, &ControllerKind::HacAngle).is_err());
}

#[test]
fn field_vanishes_at_equilibria() {
    for (n, m) in [(1, 0), (2, 1), (3, 2), (4, 4)] {
        let (p, eq) = desk(n, m);
        for pt in &eq.points {
            let f = vector_field(&pt.state, &p, &ControllerKind::HacAngle).unwrap();
            assert!(max_abs(&f) <= 1e-10, "n={n} m={m} residual {}", max_abs(&f));
        }
    }
}

#[test]
fn error_field_examples() {
    let (p, eq) = desk(2, 1);
    let xs = eq.stable();
    let zero = vec![0.0; xs.layout().dim()];
    assert!(max_abs(&error_vector_field(&zero, xs, &p).unwrap()) <= 1e-10);

    let mut shifted = zero.clone();
    shifted[0] = 2.0 * PI;
    let f = error_vector_field(&shifted, xs, &p).unwrap();
    assert!(f[0].abs() <= 1e-12);
    assert!(max_abs(&f) <= 1e-10);
}

#[test]
fn error_field_matches_composition() {
    let mut r = rng(5);
    for draw in 0..100 {
        let (p, eq) = if draw == 0 {
            desk(2, 1)
        } else {
            let p = hgl_core::presets::random_certified_grid(&mut r, 2, 1).unwrap();
            let eq = hgl_core::equilibria::solve_stationary(&p).unwrap();
            (p, eq)
        };
        let xs = eq.stable();
        let x = random_state(&mut r, xs.layout());
        let xhat = error_coordinates(&x, xs);
        let direct = error_vector_field(&xhat, xs, &p).unwrap();
        let composed = vector_field(
            &from_error_coordinates(&xhat, xs).unwrap(),
            &p,
            &ControllerKind::HacAngle,
        )
        .unwrap();
        let scale = 1.0 + max_abs(&composed);
        for (a, b) in direct.iter().zip(&composed) {
            assert!((a - b).abs() <= 1e-12 * scale, "draw {draw}: {a} vs {b}");
        }
    }
}

#[test]
fn rotation_terms_are_skew() {
    let mut r = rng(9);
    for _ in 0..100 {
        let n = 3;
        let w: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let l: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
        let i: Vec<f64> = (0..2 * n).map(|_| r.random_range(-5.0..5.0)).collect();
        let mut acc = 0.0;
        let mut scale = 0.0;
        for j in 0..n {
            let (a, b) = (i[2 * j], i[2 * j + 1]);
            let term = l[j] * w[j] * (a * -b + b * a);
            acc += term;
            scale += (l[j] * w[j] * a * b).abs();
        }
        assert!(acc.abs() <= 1e-12 * (1.0 + scale));
    }
    // through the field itself: zero every dissipative and coupling term
    let mut p = desk_parameters(1, 0);
    p.r[0] = 0.0;
    p.g[0] = 0.0;
    p.r_g[0] = 0.0;
    p.mu[0] = 0.0;
    p.b[0] = 0.0;
    let x = random_state(&mut r, StateLayout::new(1, 0));
    let f = vector_field(&x, &p, &ControllerKind::HacAngle).unwrap();
    let xs = x.as_slice();
    // i.f_i + v.f_v + ig.f_ig cancels except for the -v.i, i.v, -ig.v, v.ig pairs
    let power = xs[3] * f[3] + xs[4] * f[4] + xs[5] * f[5] + xs[6] * f[6] + xs[7] * f[7] + xs[8] * f[8];
    assert!(power.abs() <= 1e-12 * (1.0 + max_abs(xs).powi(2) * 10.0), "{power}");
}

#[test]
fn modulation_columns_orthogonal_and_bounded() {
    let mut r = rng(21);
    for _ in 0..100 {
        let n = 4;
        let delta: Vec<f64> = (0..n).map(|_| r.random_range(-2.0 * PI..2.0 * PI)).collect();
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(0.01..0.5)).collect();
        let m = modulation_matrix(&delta, &mu);
        for j in 0..n {
            assert!((m.column(j).norm() - mu[j]).abs() <= 1e-15);
            for k in 0..n {
                if j != k {
                    assert_eq!(m.column(j).dot(&m.column(k)), 0.0);
                }
            }
        }
        let i = nalgebra::DVector::from_fn(2 * n, |_, _| r.random_range(-3.0..3.0));
        let mu_max = mu.iter().cloned().fold(0.0, f64::max);
        assert!((m.transpose() * &i).norm() <= mu_max * i.norm() + 1e-14);
    }
}

#[test]
fn analytic_jacobian_matches_differences() {
    let mut r = rng(31);
    for (n, m) in [(1, 0), (2, 1), (3, 3)] {
        for _ in 0..10 {
            let p = random_parameters(&mut r, n, m);
            let x = random_state(&mut r, StateLayout::new(n, m));
            let a = analytic_jacobian(&x, &p);
            let d = numerical_jacobian(&x, &p, &ControllerKind::HacAngle, 1e-6);
            let scale = a.abs().max().max(1.0);
            assert!((a - d).abs().max() <= 1e-6 * scale);
        }
    }
}

proptest! {
    #[test]
    fn wrap_idempotent_and_periodic(theta in -1e3f64..1e3) {
        let w = wrap_angle(theta).unwrap();
        prop_assert!((-2.0 * PI..2.0 * PI).contains(&w));
        prop_assert_eq!(wrap_angle(w).unwrap(), w);
        let shifted = wrap_angle(theta + 4.0 * PI).unwrap();
        let d = (shifted - w).abs();
        prop_assert!(d <= 1e-10 || (d - 4.0 * PI).abs() <= 1e-10);
    }

    #[test]
    fn field_is_4pi_periodic_in_delta(d in -2.0 * PI..2.0 * PI, k in 0usize..2) {
        let p = desk_parameters(2, 1);
        let lay = StateLayout::new(2, 1);
        let mut a = vec![0.3; lay.dim()];
        a[k] = d;
        let xa = SystemState::from_flat(lay, a.clone()).unwrap();
        a[k] = d + 4.0 * PI;
        let xb = SystemState::from_flat(lay, a).unwrap();
        let fa = vector_field(&xa, &p, &ControllerKind::HacAngle).unwrap();
        let fb = vector_field(&xb, &p, &ControllerKind::HacAngle).unwrap();
        for (u, v) in fa.iter().zip(&fb) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
    }
}
