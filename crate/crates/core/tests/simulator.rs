mod common;

use std::f64::consts::PI;

use common::{desk, max_abs, rng};
use hgl_core::equilibria::solve_stationary;
use hgl_core::lyapunov::LyapunovTracker;
use hgl_core::model::{error_coordinates, from_error_coordinates, vector_field};
use hgl_core::simulator::{
    classify_convergence, classify_state, integrate, monte_carlo_agas, run, state_distance,
    trial_seed, InitialSampling, IntegratorConfig, Method, Termination, CLASSIFY_TOL,
};
use hgl_core::{ControllerKind, EquilibriumLabel, HglError, SystemState};
use rand::Rng;

fn config(method: Method, t_end: f64) -> IntegratorConfig {
    IntegratorConfig {
        method,
        t_end,
        ..IntegratorConfig::default()
    }
}

#[test]
fn equilibrium_is_stationary() {
    let (p, eq) = desk(2, 1);
    for method in [Method::RK45_DEFAULT, Method::RK4_DEFAULT] {
        let mut cfg = config(method, 100.0);
        cfg.convergence_tol = None;
        cfg.stride = 100;
        let traj = integrate(eq.stable(), &p, &cfg).unwrap();
        assert_eq!(traj.termination, Termination::TEnd);
        assert!((traj.times.last().unwrap() - 100.0).abs() <= 1e-9);
        for x in &traj.states {
            let d = state_distance(x, eq.stable().as_slice(), 2);
            assert!(d <= 1e-9, "{method:?} drift {d}");
        }
    }
}

#[test]
fn half_turn_perturbation_converges_with_decreasing_v() {
    let (p, eq) = desk(2, 1);
    let mut xhat = vec![0.0; 23];
    xhat[0] = PI;
    let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
    let cfg = config(Method::RK45_DEFAULT, 200.0);
    let mut traj = integrate(&x0, &p, &cfg).unwrap();
    traj.annotate_lyapunov(&p, &eq).unwrap();
    let c = classify_convergence(&traj, &eq, CLASSIFY_TOL).unwrap().unwrap();
    assert_eq!(c.label, EquilibriumLabel::StableCandidate);
    let v = traj.v.as_ref().unwrap();
    assert!(traj.max_v_increase().unwrap() <= 1e-8 * v[0].max(1.0));
    assert!(traj.vdot.as_ref().unwrap().iter().all(|d| *d <= 1e-9));
}

#[test]
fn trajectory_invariants() {
    let (p, eq) = desk(2, 1);
    let mut r = rng(3);
    for method in [Method::RK45_DEFAULT, Method::Rk4 { step: 5e-3 }] {
        let mut xhat: Vec<f64> = (0..23).map(|_| r.random_range(-0.5..0.5)).collect();
        xhat[0] = 5.5;
        xhat[1] = -5.5;
        let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
        let mut cfg = config(method, 150.0);
        cfg.convergence_tol = Some(1e-7);
        let traj = integrate(&x0, &p, &cfg).unwrap();
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        for x in &traj.states {
            assert!(x[..2].iter().all(|d| (-2.0 * PI..2.0 * PI).contains(d)));
            assert!(x.iter().all(|c| c.is_finite()));
        }
        if traj.termination == Termination::Converged {
            let f = vector_field(&traj.final_state(), &p, &ControllerKind::HacAngle).unwrap();
            assert!(max_abs(&f) <= 1e-7);
        }
    }
}

#[test]
fn observer_can_stop_the_run() {
    let (p, eq) = desk(1, 0);
    let mut xhat = vec![0.0; 11];
    xhat[0] = 1.0;
    let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
    let mut calls = 0;
    let s = run(&x0, &p, &config(Method::RK4_DEFAULT, 10.0), |_, _| {
        calls += 1;
        calls < 5
    })
    .unwrap();
    assert_eq!(s.termination, Termination::Stopped);
    assert_eq!(calls, 5);
}

#[test]
fn step_underflow_is_reported() {
    let (p, eq) = desk(1, 0);
    let mut xhat = vec![0.0; 11];
    xhat[0] = 3.0;
    let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
    let cfg = config(Method::Rk45 { rtol: 1e-300, atol: 1e-300 }, 1.0);
    match integrate(&x0, &p, &cfg) {
        Err(HglError::StepSizeUnderflow { partial, .. }) => {
            assert_eq!(partial.termination, Termination::Diverged);
            assert!(!partial.states.is_empty());
        }
        other => panic!("expected underflow, got {other:?}"),
    }
}

#[test]
fn invalid_configs_rejected() {
    let (p, eq) = desk(1, 0);
    for cfg in [
        config(Method::Rk4 { step: 0.0 }, 1.0),
        config(Method::Rk45 { rtol: -1.0, atol: 1e-9 }, 1.0),
        config(Method::RK4_DEFAULT, -1.0),
    ] {
        assert!(integrate(eq.stable(), &p, &cfg).is_err());
    }
}

#[test]
fn rk4_is_fourth_order() {
    let (p, eq) = desk(2, 1);
    let mut xhat = vec![0.1; 23];
    xhat[0] = 2.0;
    let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
    let mut reference = config(Method::Rk45 { rtol: 1e-13, atol: 1e-15 }, 1.0);
    reference.convergence_tol = None;
    let xr = integrate(&x0, &p, &reference).unwrap().final_state();
    let err = |h: f64| {
        let mut cfg = config(Method::Rk4 { step: h }, 1.0);
        cfg.convergence_tol = None;
        let x = integrate(&x0, &p, &cfg).unwrap().final_state();
        state_distance(x.as_slice(), xr.as_slice(), 2)
    };
    let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
    let o1 = (e1 / e2).log2();
    let o2 = (e2 / e3).log2();
    assert!((3.7..=4.3).contains(&o1), "order {o1}");
    assert!((3.7..=4.3).contains(&o2), "order {o2}");
}

#[test]
fn classification_examples() {
    let (p, eq) = desk(2, 1);
    let c = classify_state(eq.stable().as_slice(), &eq, CLASSIFY_TOL).unwrap().unwrap();
    assert_eq!((c.index, c.label), (eq.stable_index, EquilibriumLabel::StableCandidate));
    for (k, pt) in eq.points.iter().enumerate() {
        let c = classify_state(pt.state.as_slice(), &eq, CLASSIFY_TOL).unwrap().unwrap();
        assert_eq!((c.index, c.label), (k, pt.label));
    }

    let mut xhat = vec![0.0; 23];
    xhat[0] = 3.0;
    let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
    let mut cfg = config(Method::RK45_DEFAULT, 0.5);
    cfg.convergence_tol = None;
    let short = integrate(&x0, &p, &cfg).unwrap();
    assert_eq!(classify_convergence(&short, &eq, CLASSIFY_TOL).unwrap(), None);

    // an absurd tolerance covers several points at once
    assert!(classify_state(eq.stable().as_slice(), &eq, 100.0).is_err());
}

#[test]
fn sublevel_sets_are_invariant() {
    let (p, eq) = desk(2, 1);
    let tracker = LyapunovTracker::new(&p, &eq);
    let mut r = rng(17);
    for _ in 0..5 {
        let mut xhat: Vec<f64> = (0..23).map(|_| r.random_range(-0.3..0.3)).collect();
        xhat[0] = r.random_range(-2.0 * PI..2.0 * PI);
        xhat[1] = r.random_range(-2.0 * PI..2.0 * PI);
        let x0 = from_error_coordinates(&xhat, eq.stable()).unwrap();
        let c = tracker.value(x0.as_slice());
        let mut worst = f64::NEG_INFINITY;
        run(&x0, &p, &config(Method::RK45_DEFAULT, 60.0), |_, x| {
            worst = worst.max(tracker.value(x));
            true
        })
        .unwrap();
        assert!(worst <= c + 1e-8);
    }
}

#[test]
fn power_variant_runs() {
    let (p, eq) = desk(2, 1);
    let xs = eq.stable();
    let p_r: Vec<f64> = (0..2)
        .map(|j| xs.v()[2 * j] * xs.i_g()[2 * j] + xs.v()[2 * j + 1] * xs.i_g()[2 * j + 1])
        .collect();
    let mut cfg = config(Method::RK45_DEFAULT, 5.0);
    cfg.controller = ControllerKind::HacPower { p_r };
    let traj = integrate(xs, &p, &cfg).unwrap();
    assert!(traj.states.iter().all(|x| x.iter().all(|c| c.is_finite())));
}

#[test]
fn monte_carlo_empty() {
    let (p, eq) = desk(2, 1);
    let r = monte_carlo_agas(&p, &eq, 0, &InitialSampling::default(), &IntegratorConfig::default(), 1, None)
        .unwrap();
    assert_eq!(r.trials, 0);
    assert!(r.outcomes.is_empty());
    assert_eq!(r.fraction_stable + r.fraction_saddle + r.fraction_unresolved, 0.0);
}

#[test]
fn monte_carlo_injected_saddle_stays_put() {
    let (p, eq) = desk(2, 1);
    let saddle = eq.saddles().next().unwrap().state.clone();
    let sampling = InitialSampling {
        injected: vec![saddle.clone()],
        ..InitialSampling::default()
    };
    let cfg = config(Method::RK45_DEFAULT, 50.0);
    let r = monte_carlo_agas(&p, &eq, 2, &sampling, &cfg, 9, Some(2)).unwrap();
    assert_eq!(r.trials, 3);
    let last = r.outcomes.last().unwrap();
    assert!(last.injected);
    assert_eq!(last.label, Some(EquilibriumLabel::Saddle));
    assert_eq!(eq.points[last.limit.unwrap()].state, saddle);
    let sum = r.fraction_stable + r.fraction_saddle + r.fraction_unresolved;
    assert!((sum - 1.0).abs() <= 1e-15);
}

#[test]
fn monte_carlo_is_deterministic_and_order_free() {
    let (p, eq) = desk(2, 1);
    let cfg = config(Method::RK45_DEFAULT, 100.0);
    let s = InitialSampling::default();
    let a = monte_carlo_agas(&p, &eq, 12, &s, &cfg, 42, Some(1)).unwrap();
    let b = monte_carlo_agas(&p, &eq, 12, &s, &cfg, 42, Some(4)).unwrap();
    let c = monte_carlo_agas(&p, &eq, 12, &s, &cfg, 42, None).unwrap();
    assert_eq!(a.classifications(), b.classifications());
    assert_eq!(a.classifications(), c.classifications());
    for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.t_final.to_bits(), y.t_final.to_bits());
        assert_eq!(x.v0.to_bits(), y.v0.to_bits());
    }
    let d = monte_carlo_agas(&p, &eq, 12, &s, &cfg, 43, Some(2)).unwrap();
    assert_ne!(
        a.outcomes.iter().map(|o| o.v0).collect::<Vec<_>>(),
        d.outcomes.iter().map(|o| o.v0).collect::<Vec<_>>()
    );
    for o in &a.outcomes {
        assert_eq!(o.seed, trial_seed(42, o.index));
        assert!(o.max_v_increase <= 1e-8 * o.v0.max(1.0));
    }
}

#[test]
fn seeds_are_distinct() {
    let seeds: std::collections::HashSet<u64> = (0..10_000).map(|k| trial_seed(7, k)).collect();
    assert_eq!(seeds.len(), 10_000);
}

#[test]
fn error_coordinates_round_trip() {
    let (p, _) = desk(3, 2);
    let eq = solve_stationary(&p).unwrap();
    let mut r = rng(2);
    for _ in 0..100 {
        let xs = eq.stable();
        let data: Vec<f64> = (0..xs.layout().dim()).map(|_| r.random_range(-6.0..6.0)).collect();
        let x = SystemState::from_flat(xs.layout(), data).unwrap();
        let back = from_error_coordinates(&error_coordinates(&x, xs), xs).unwrap();
        assert!(state_distance(back.as_slice(), x.as_slice(), 3) <= 1e-12);
    }
}
