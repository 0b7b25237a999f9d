//! Parameter sets used by tests, examples, and the CLI.
//!
//! The desk-scale defaults are representative per-unit magnitudes, not
//! measured plant data.

use rand::Rng;

use crate::certificates::tune_gamma;
use crate::equilibria::synthesize_references;
use crate::error::Result;
use crate::model::GridParameters;

const DESK_DELTA_R: [f64; 4] = [0.2, -0.1, 0.15, -0.05];

/// Ring-like dc topology: line `k` joins nodes `k mod n` and `(k + 1) mod n`.
pub fn ring_edges(n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..m).map(|k| (k % n, (k + 1) % n)).collect()
}

/// Desk-scale defaults with zero references and a placeholder `gamma = 1`.
///
/// Panics if `m > 0` and `n < 2`.
pub fn desk_parameters(n: usize, m: usize) -> GridParameters {
    let v = |x: f64| vec![x; n];
    let edges = ring_edges(n, m);
    GridParameters {
        n,
        m,
        inertia: v(4.0),
        d_friction: v(1.0),
        d_damper: v(25.0),
        tau_g: v(2.0),
        kappa_g: v(20.0),
        torque_ref: v(0.0),
        omega_r: v(1.0),
        b: v(0.5),
        l_g: v(0.2),
        r_g: v(0.05),
        mu: v(0.5),
        l: v(0.08),
        r: v(0.02),
        c: v(0.1),
        g: v(0.05),
        c_dc: v(0.2),
        g_dc: v(0.1),
        tau_dc: v(0.1),
        kappa_dc: v(10.0),
        i_dc_ref: v(0.0),
        v_dc_ref: v(1.0),
        i_dc_inj: v(0.0),
        incidence: GridParameters::incidence_from_edges(n, &edges)
            .expect("ring edges need n >= 2 when m > 0"),
        l_dc: vec![0.1; m],
        r_dc: vec![0.05; m],
        eta: v(1.0),
        gamma: v(1.0),
        delta_r: (0..n).map(|j| DESK_DELTA_R[j % DESK_DELTA_R.len()]).collect(),
    }
}

/// Desk defaults with synthesized references and `gamma` set to twice the
/// larger of the two critical gains.
pub fn desk_grid(n: usize, m: usize) -> Result<GridParameters> {
    let p = synthesize_references(&desk_parameters(n, m))?;
    tune_gamma(&p, 2.0)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, centre: f64) -> f64 {
    centre * 2f64.powf(rng.random_range(-1.0..1.0))
}

/// Random valid parameters scattered around the desk defaults (each positive
/// constant scaled by a log-uniform factor in `[1/2, 2]`). References are left
/// at zero and `gamma` at 1.
///
/// Panics if `m > 0` with fewer than two units.
pub fn random_parameters<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> GridParameters {
    assert!(m == 0 || n >= 2, "dc lines need at least two nodes");
    let base = desk_parameters(n, 0);
    let mut jitter = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| log_uniform(rng, x)).collect() };
    let mut p = GridParameters {
        inertia: jitter(&base.inertia),
        d_friction: jitter(&base.d_friction),
        d_damper: jitter(&base.d_damper),
        tau_g: jitter(&base.tau_g),
        kappa_g: jitter(&base.kappa_g),
        l_g: jitter(&base.l_g),
        r_g: jitter(&base.r_g),
        l: jitter(&base.l),
        r: jitter(&base.r),
        c: jitter(&base.c),
        g: jitter(&base.g),
        c_dc: jitter(&base.c_dc),
        g_dc: jitter(&base.g_dc),
        tau_dc: jitter(&base.tau_dc),
        kappa_dc: jitter(&base.kappa_dc),
        eta: jitter(&base.eta),
        ..base
    };
    p.m = m;
    p.l_dc = (0..m).map(|_| log_uniform(rng, 0.1)).collect();
    p.r_dc = (0..m).map(|_| log_uniform(rng, 0.05)).collect();
    p.omega_r = (0..n).map(|_| rng.random_range(0.8..1.2)).collect();
    p.v_dc_ref = (0..n).map(|_| rng.random_range(0.9..1.1)).collect();
    p.mu = (0..n).map(|_| rng.random_range(0.2..=0.5)).collect();
    p.delta_r = (0..n).map(|_| rng.random_range(-0.4..0.4)).collect();
    p.b = p
        .omega_r
        .iter()
        .map(|w| rng.random_range(0.3..0.7) / w)
        .collect();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m);
    for k in 0..m {
        // first lines form a spanning path over a shuffled node order
        let (a, b) = if k + 1 < n {
            (k, k + 1)
        } else {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        };
        edges.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
    }
    p.incidence = GridParameters::incidence_from_edges(n, &edges)
        .expect("random edges are distinct-ended and in range");
    p
}

/// Random parameters with synthesized references and `gamma` at twice the
/// critical gain.
pub fn random_certified_grid<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
) -> Result<GridParameters> {
    let p = synthesize_references(&random_parameters(rng, n, m))?;
    tune_gamma(&p, 2.0)
}
