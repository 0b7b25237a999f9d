//! Decentralized stability certificates.
//!
//! For each converter `j` the certificate needs `D_j > D_min,j` and
//! `gamma_j > gamma_min,j`. Both bounds depend only on unit-local parameters
//! and on the unit's equilibrium magnitudes `||i*_j||`, `||v*_j||`,
//! `||i*_g,j||`, `v*_dc,j`.
//!
//! Two values of `gamma_min` are reported. `gamma_min_closed_form` is the closed
//! form whose last term reads `1 / (2 (D - D_min))`. `gamma_min_schur` is the
//! exact positive-definiteness threshold of the 3x3 block `Q11,j` under the
//! assigned bound parameters (`lambda = 2 / eta`), whose last term works out to
//! `1 / (2 eta (D - D_min))`. The two agree when `eta = 1`; the Schur value is
//! the one used for verdicts.

use nalgebra::{Complex, DMatrix, Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::equilibria::{solve_stationary, EquilibriumLabel, EquilibriumSet};
use crate::error::{HglError, Result};
use crate::model::{analytic_jacobian, numerical_jacobian, GridParameters, MassMatrix, SystemState};
use crate::controller::ControllerKind;

/// Threshold on the minimum eigenvalue for a block to count as positive definite.
pub const PD_TOL: f64 = 1e-12;
/// Allowed relative mismatch between analytic and finite-difference Jacobians.
pub const JACOBIAN_CHECK_TOL: f64 = 1e-5;
pub const JACOBIAN_FD_STEP: f64 = 1e-6;

/// Equilibrium magnitudes of one unit that enter its certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitLoad {
    pub i_norm: f64,
    pub v_norm: f64,
    pub ig_norm: f64,
    pub v_dc: f64,
}

fn norm2(x: &[f64]) -> f64 {
    x[0].hypot(x[1])
}

impl UnitLoad {
    pub fn at(xs: &SystemState, j: usize) -> Self {
        UnitLoad {
            i_norm: norm2(&xs.i()[2 * j..2 * j + 2]),
            v_norm: norm2(&xs.v()[2 * j..2 * j + 2]),
            ig_norm: norm2(&xs.i_g()[2 * j..2 * j + 2]),
            v_dc: xs.v_dc()[j],
        }
    }

    pub fn all(eq: &EquilibriumSet) -> Vec<Self> {
        let xs = eq.stable();
        (0..xs.layout().n).map(|j| UnitLoad::at(xs, j)).collect()
    }
}

/// Free parameters of the Lyapunov bound and the diagonal bound weights
/// derived from them. `phi3`, `phi5`, `phi7`, `phi9` are per-unit scalars that
/// multiply a 2x2 identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundParameters {
    pub lambda: Vec<f64>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub eps3: Vec<f64>,
    pub eps4: Vec<f64>,
    pub eps5: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi3: Vec<f64>,
    pub phi4: Vec<f64>,
    pub phi5: Vec<f64>,
    pub phi6: Vec<f64>,
    pub phi7: Vec<f64>,
    pub phi8: Vec<f64>,
    pub phi9: Vec<f64>,
    pub phi10: Vec<f64>,
}

impl BoundParameters {
    /// Evaluates the bound weights for arbitrary `lambda` and `eps1..eps5`.
    ///
    /// `eps1 = inf` encodes a unit without filter current at equilibrium; its
    /// `phi1` is then the limit `G_dc / 2` reached by the standard assignment
    /// and `phi2 = 0`.
    pub fn from_free(
        p: &GridParameters,
        loads: &[UnitLoad],
        lambda: Vec<f64>,
        eps: [Vec<f64>; 5],
    ) -> Self {
        let n = p.n;
        let [eps1, eps2, eps3, eps4, eps5] = eps;
        let sq = |x: f64| x * x;
        let mut bp = BoundParameters {
            phi1: vec![0.0; n],
            phi2: vec![0.0; n],
            phi3: eps2.iter().map(|e| e * e).collect(),
            phi4: (0..n).map(|j| sq(p.mu[j] * loads[j].v_dc / eps2[j])).collect(),
            phi5: eps3.iter().map(|e| e * e).collect(),
            phi6: (0..n)
                .map(|j| sq(p.l[j] * loads[j].i_norm / (2.0 * eps3[j])))
                .collect(),
            phi7: eps4.iter().map(|e| e * e).collect(),
            phi8: (0..n)
                .map(|j| sq(p.c[j] * loads[j].v_norm / (2.0 * eps4[j])))
                .collect(),
            phi9: eps5.iter().map(|e| e * e).collect(),
            phi10: (0..n)
                .map(|j| sq(p.l_g[j] * loads[j].ig_norm / (2.0 * eps5[j])))
                .collect(),
            lambda,
            eps1,
            eps2,
            eps3,
            eps4,
            eps5,
        };
        for j in 0..n {
            if bp.eps1[j].is_infinite() {
                bp.phi1[j] = 0.5 * p.g_dc[j];
                bp.phi2[j] = 0.0;
            } else {
                bp.phi1[j] = sq(bp.eps1[j] * p.mu[j] * loads[j].i_norm);
                bp.phi2[j] = 1.0 / sq(bp.eps1[j]);
            }
        }
        bp
    }

    /// The standard assignment: `lambda = 2/eta`, `eps1 = sqrt(G_dc)/(sqrt 2 mu ||i*||)`,
    /// `eps2 = sqrt(R/2)`, `eps3 = sqrt(R)/2`, `eps4 = sqrt(G)/2`, `eps5 = sqrt(R_g)/2`.
    pub fn assign(p: &GridParameters, eq: &EquilibriumSet) -> Self {
        Self::assign_for_loads(p, &UnitLoad::all(eq))
    }

    pub fn assign_for_loads(p: &GridParameters, loads: &[UnitLoad]) -> Self {
        let n = p.n;
        let lambda = p.eta.iter().map(|e| 2.0 / e).collect();
        let eps1 = (0..n)
            .map(|j| {
                let denom = std::f64::consts::SQRT_2 * p.mu[j] * loads[j].i_norm;
                if denom == 0.0 {
                    f64::INFINITY
                } else {
                    p.g_dc[j].sqrt() / denom
                }
            })
            .collect();
        let eps2 = p.r.iter().map(|r| (0.5 * r).sqrt()).collect();
        let eps3 = p.r.iter().map(|r| 0.5 * r.sqrt()).collect();
        let eps4 = p.g.iter().map(|g| 0.5 * g.sqrt()).collect();
        let eps5 = p.r_g.iter().map(|r| 0.5 * r.sqrt()).collect();
        Self::from_free(p, loads, lambda, [eps1, eps2, eps3, eps4, eps5])
    }
}

/// `D_min,j = (L ||i*||)^2 / R + (C ||v*||)^2 / G + (L_g ||i*_g||)^2 / R_g`.
pub fn critical_damping(p: &GridParameters, eq: &EquilibriumSet) -> Vec<f64> {
    critical_damping_for_loads(p, &UnitLoad::all(eq))
}

pub fn critical_damping_for_loads(p: &GridParameters, loads: &[UnitLoad]) -> Vec<f64> {
    (0..p.n)
        .map(|j| {
            let u = loads[j];
            (p.l[j] * u.i_norm).powi(2) / p.r[j]
                + (p.c[j] * u.v_norm).powi(2) / p.g[j]
                + (p.l_g[j] * u.ig_norm).powi(2) / p.r_g[j]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalGain {
    /// Closed form with last term `1 / (2 (D - D_min))`.
    pub closed_form: Vec<f64>,
    /// Exact threshold for `Q11,j > 0` under the assigned bound parameters.
    pub schur: Vec<f64>,
}

pub fn critical_gain(p: &GridParameters, eq: &EquilibriumSet, d_min: &[f64]) -> CriticalGain {
    let loads = UnitLoad::all(eq);
    let bp = BoundParameters::assign_for_loads(p, &loads);
    critical_gain_for_loads(p, &loads, d_min, &bp)
}

pub fn critical_gain_for_loads(
    p: &GridParameters,
    loads: &[UnitLoad],
    d_min: &[f64],
    bp: &BoundParameters,
) -> CriticalGain {
    let n = p.n;
    let mut closed_form = Vec::with_capacity(n);
    let mut schur = Vec::with_capacity(n);
    for j in 0..n {
        let u = loads[j];
        let slack = p.damping(j) - d_min[j];
        closed_form.push(if slack > 0.0 {
            p.eta[j] * (1.0 + (p.mu[j] * u.i_norm).powi(2)) / p.g_dc[j]
                + p.eta[j] * (p.mu[j] * u.v_dc).powi(2) / p.r[j]
                + 1.0 / (2.0 * slack)
        } else {
            f64::INFINITY
        });

        let lam = bp.lambda[j];
        let a22 = p.g_dc[j] - bp.phi1[j];
        let a33 = p.damping(j) - bp.phi6[j] - bp.phi8[j] - bp.phi10[j];
        schur.push(if a22 > 0.0 && a33 > 0.0 {
            let c12 = 0.5 * lam * p.eta[j];
            let c13 = 0.5 * lam;
            (bp.phi2[j] + bp.phi4[j] + c12 * c12 / a22 + c13 * c13 / a33) / lam
        } else {
            f64::INFINITY
        });
    }
    CriticalGain { closed_form, schur }
}

/// The 3x3 blocks `Q11,j` acting on `(sin(delta_hat_j / 2), v_dc_hat_j, omega_hat_j)`
/// and the diagonal of `Q22` in the order
/// `(i_dc_n, i_dc_g, i, v, i_g, T_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QBlocks {
    pub q11: Vec<Matrix3<f64>>,
    pub q22: Vec<f64>,
}

pub fn build_q(p: &GridParameters, bp: &BoundParameters) -> QBlocks {
    let n = p.n;
    let q11 = (0..n)
        .map(|j| {
            let lam = bp.lambda[j];
            let a11 = lam * p.gamma[j] - bp.phi2[j] - bp.phi4[j];
            let a22 = p.g_dc[j] - bp.phi1[j];
            let a33 = p.damping(j) - bp.phi6[j] - bp.phi8[j] - bp.phi10[j];
            let c12 = -0.5 * lam * p.eta[j];
            let c13 = 0.5 * lam;
            Matrix3::new(a11, c12, c13, c12, a22, 0.0, c13, 0.0, a33)
        })
        .collect();

    let mut q22 = Vec::with_capacity(9 * n + p.m);
    q22.extend_from_slice(&p.r_dc);
    q22.extend(p.kappa_dc.iter().map(|k| 1.0 / k));
    for (base, phis) in [
        (&p.r, [&bp.phi3, &bp.phi5]),
        (&p.g, [&bp.phi7, &vec![0.0; n]]),
        (&p.r_g, [&bp.phi9, &vec![0.0; n]]),
    ] {
        for j in 0..n {
            let d = base[j] - phis[0][j] - phis[1][j];
            q22.push(d);
            q22.push(d);
        }
    }
    q22.extend(p.kappa_g.iter().map(|k| 1.0 / k));
    QBlocks { q11, q22 }
}

pub fn min_eigenvalue(q: &Matrix3<f64>) -> f64 {
    let sym = 0.5 * (q + q.transpose());
    SymmetricEigen::new(sym).eigenvalues.min()
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitCertificate {
    pub d: f64,
    pub d_min: f64,
    pub d_margin: f64,
    pub gamma: f64,
    pub gamma_min_closed_form: f64,
    pub gamma_min_schur: f64,
    pub gamma_margin: f64,
    pub gamma_margin_closed_form: f64,
    /// `D_j <= D_min,j`, so no finite gain certifies the unit.
    pub unsatisfiable: bool,
    pub q11: [[f64; 3]; 3],
    pub q11_min_eig: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumSpectrum {
    pub label: EquilibriumLabel,
    pub shifted: Vec<bool>,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub max_real: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub units: Vec<UnitCertificate>,
    pub q22: Vec<f64>,
    pub q22_min: f64,
    /// Every `D_j > D_min,j` and `gamma_j > gamma_min_schur,j`.
    pub closed_form_pass: bool,
    /// Every `Q11,j` block and `Q22` entry positive.
    pub direct_pd_pass: bool,
    pub agree: bool,
    pub pass: bool,
    pub spectra: Vec<EquilibriumSpectrum>,
}

/// Certificate without Jacobian spectra.
pub fn certify_conditions(p: &GridParameters, eq: &EquilibriumSet) -> CertificateReport {
    let loads = UnitLoad::all(eq);
    let bp = BoundParameters::assign_for_loads(p, &loads);
    let d_min = critical_damping_for_loads(p, &loads);
    let gains = critical_gain_for_loads(p, &loads, &d_min, &bp);
    let q = build_q(p, &bp);

    let units: Vec<UnitCertificate> = (0..p.n)
        .map(|j| {
            let qm = &q.q11[j];
            UnitCertificate {
                d: p.damping(j),
                d_min: d_min[j],
                d_margin: p.damping(j) - d_min[j],
                gamma: p.gamma[j],
                gamma_min_closed_form: gains.closed_form[j],
                gamma_min_schur: gains.schur[j],
                gamma_margin: p.gamma[j] - gains.schur[j],
                gamma_margin_closed_form: p.gamma[j] - gains.closed_form[j],
                unsatisfiable: gains.schur[j].is_infinite(),
                q11: [
                    [qm[(0, 0)], qm[(0, 1)], qm[(0, 2)]],
                    [qm[(1, 0)], qm[(1, 1)], qm[(1, 2)]],
                    [qm[(2, 0)], qm[(2, 1)], qm[(2, 2)]],
                ],
                q11_min_eig: min_eigenvalue(qm),
            }
        })
        .collect();

    let q22_min = q.q22.iter().copied().fold(f64::INFINITY, f64::min);
    let closed_form_pass = units
        .iter()
        .all(|u| u.d_margin > 0.0 && u.gamma_margin > 0.0);
    let direct_pd_pass = units.iter().all(|u| u.q11_min_eig > PD_TOL) && q22_min > 0.0;
    let pass = units.iter().all(|u| u.d_margin > 0.0) && direct_pd_pass;
    CertificateReport {
        units,
        q22: q.q22,
        q22_min,
        closed_form_pass,
        direct_pd_pass,
        agree: closed_form_pass == direct_pd_pass,
        pass,
        spectra: Vec::new(),
    }
}

/// Full certificate, including Jacobian spectra at every equilibrium.
pub fn certify(p: &GridParameters, eq: &EquilibriumSet) -> Result<CertificateReport> {
    let mut report = certify_conditions(p, eq);
    for pt in &eq.points {
        let eig = jacobian_spectrum(&pt.state, p)?;
        let max_real = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        report.spectra.push(EquilibriumSpectrum {
            label: pt.label,
            shifted: pt.shifted.clone(),
            eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(),
            max_real,
        });
    }
    Ok(report)
}

/// `K^-1 df/dx` at `x`.
pub fn linearization(x: &SystemState, p: &GridParameters) -> DMatrix<f64> {
    let mut a = analytic_jacobian(x, p);
    let mass = MassMatrix::new(p);
    for (r, k) in mass.diagonal().iter().enumerate() {
        a.row_mut(r).scale_mut(1.0 / k);
    }
    a
}

/// Largest elementwise mismatch between two Jacobians relative to
/// `max(1, max |analytic|)`.
pub fn jacobian_mismatch(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    let scale = analytic.amax().max(1.0);
    (analytic - numeric).amax() / scale
}

/// Eigenvalues of `K^-1 df/dx` at `x`, with a finite-difference audit of the
/// analytic Jacobian.
pub fn jacobian_spectrum(x: &SystemState, p: &GridParameters) -> Result<Vec<Complex<f64>>> {
    let analytic = analytic_jacobian(x, p);
    let numeric = numerical_jacobian(x, p, &ControllerKind::HacAngle, JACOBIAN_FD_STEP);
    let mismatch = jacobian_mismatch(&analytic, &numeric);
    if mismatch > JACOBIAN_CHECK_TOL {
        return Err(HglError::Consistency(format!(
            "analytic and finite-difference Jacobians differ by {mismatch:e}"
        )));
    }
    let a = linearization(x, p);
    Ok(a.complex_eigenvalues().iter().copied().collect())
}

/// Sets `gamma_j = factor * max(gamma_min_closed_form,j, gamma_min_schur,j)`.
pub fn tune_gamma(p: &GridParameters, factor: f64) -> Result<GridParameters> {
    let eq = solve_stationary(p)?;
    let d_min = critical_damping(p, &eq);
    let gains = critical_gain(p, &eq, &d_min);
    let mut q = p.clone();
    for j in 0..p.n {
        let g = gains.closed_form[j].max(gains.schur[j]);
        if !g.is_finite() {
            return Err(HglError::validation(
                format!("D[{j}]"),
                format!(
                    "total damping {} does not exceed D_min = {}",
                    p.damping(j),
                    d_min[j]
                ),
            ));
        }
        q.gamma[j] = factor * g;
    }
    Ok(q)
}
