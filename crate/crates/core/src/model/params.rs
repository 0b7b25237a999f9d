use nalgebra::DMatrix;

use crate::error::{HglError, Result};
use crate::model::angle::ANGLE_PERIOD;

/// Physical and control constants of an `n`-converter, `m`-line hybrid grid.
///
/// Vectors indexed by converter hold one entry per ac grid / interlinking
/// converter; `l_dc` and `r_dc` hold one entry per dc line. Everything is
/// per-unit.
#[derive(Clone, Debug, PartialEq)]
pub struct GridParameters {
    pub n: usize,
    pub m: usize,

    // ac grid centre-of-inertia
    pub inertia: Vec<f64>,
    pub d_friction: Vec<f64>,
    pub d_damper: Vec<f64>,
    pub tau_g: Vec<f64>,
    pub kappa_g: Vec<f64>,
    pub torque_ref: Vec<f64>,
    pub omega_r: Vec<f64>,
    /// COI voltage constants, `v_r / omega_r`.
    pub b: Vec<f64>,

    // ac transmission lines
    pub l_g: Vec<f64>,
    pub r_g: Vec<f64>,

    // interlinking converters
    pub mu: Vec<f64>,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub g: Vec<f64>,
    pub c_dc: Vec<f64>,
    pub g_dc: Vec<f64>,
    pub tau_dc: Vec<f64>,
    pub kappa_dc: Vec<f64>,
    pub i_dc_ref: Vec<f64>,
    pub v_dc_ref: Vec<f64>,
    /// Constant current injected at each dc node by distributed sources.
    pub i_dc_inj: Vec<f64>,

    // dc network
    /// Signed node-by-edge incidence matrix (`n x m`).
    pub incidence: DMatrix<f64>,
    pub l_dc: Vec<f64>,
    pub r_dc: Vec<f64>,

    // hybrid angle control
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta_r: Vec<f64>,
}

impl GridParameters {
    /// Builds the signed incidence matrix from `(from, to)` node pairs.
    /// Edge `k` gets `+1` at `from` and `-1` at `to`.
    pub fn incidence_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<DMatrix<f64>> {
        let mut b = DMatrix::zeros(n, edges.len());
        for (k, &(from, to)) in edges.iter().enumerate() {
            if from >= n || to >= n {
                return Err(HglError::validation(
                    format!("incidence[{k}]"),
                    format!("node index out of range 0..{n}"),
                ));
            }
            if from == to {
                return Err(HglError::validation(
                    format!("incidence[{k}]"),
                    "self-loop: a dc line needs two distinct end nodes",
                ));
            }
            b[(from, k)] = 1.0;
            b[(to, k)] = -1.0;
        }
        Ok(b)
    }

    /// Recovers `(from, to)` pairs from the incidence matrix.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .map(|k| {
                let col = self.incidence.column(k);
                let from = col.iter().position(|&v| v == 1.0).unwrap_or(0);
                let to = col.iter().position(|&v| v == -1.0).unwrap_or(0);
                (from, to)
            })
            .collect()
    }

    /// Total damping `D = D_f + D_d`.
    pub fn damping(&self, j: usize) -> f64 {
        self.d_friction[j] + self.d_damper[j]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let m = self.m;
        if n == 0 {
            return Err(HglError::validation("n", "must be a positive integer"));
        }

        let per_unit: [(&str, &Vec<f64>); 27] = [
            ("J", &self.inertia),
            ("D_f", &self.d_friction),
            ("D_d", &self.d_damper),
            ("tau_g", &self.tau_g),
            ("kappa_g", &self.kappa_g),
            ("T_r", &self.torque_ref),
            ("omega_r", &self.omega_r),
            ("b", &self.b),
            ("L_g", &self.l_g),
            ("R_g", &self.r_g),
            ("mu", &self.mu),
            ("L", &self.l),
            ("R", &self.r),
            ("C", &self.c),
            ("G", &self.g),
            ("C_dc", &self.c_dc),
            ("G_dc", &self.g_dc),
            ("tau_dc", &self.tau_dc),
            ("kappa_dc", &self.kappa_dc),
            ("i_dc_r", &self.i_dc_ref),
            ("v_dc_r", &self.v_dc_ref),
            ("i_dc_inj", &self.i_dc_inj),
            ("eta", &self.eta),
            ("gamma", &self.gamma),
            ("delta_r", &self.delta_r),
            ("L_dc", &self.l_dc),
            ("R_dc", &self.r_dc),
        ];
        for (name, v) in per_unit {
            let expected = if name == "L_dc" || name == "R_dc" { m } else { n };
            if v.len() != expected {
                return Err(HglError::validation(
                    name,
                    format!("expected {expected} entries, got {}", v.len()),
                ));
            }
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(HglError::validation(format!("{name}[{k}]"), "must be finite"));
            }
        }

        let strictly_positive: [(&str, &Vec<f64>); 19] = [
            ("J", &self.inertia),
            ("D_f", &self.d_friction),
            ("D_d", &self.d_damper),
            ("tau_g", &self.tau_g),
            ("L_g", &self.l_g),
            ("R_g", &self.r_g),
            ("L", &self.l),
            ("R", &self.r),
            ("C", &self.c),
            ("G", &self.g),
            ("C_dc", &self.c_dc),
            ("G_dc", &self.g_dc),
            ("tau_dc", &self.tau_dc),
            ("kappa_dc", &self.kappa_dc),
            ("kappa_g", &self.kappa_g),
            ("L_dc", &self.l_dc),
            ("R_dc", &self.r_dc),
            ("eta", &self.eta),
            ("omega_r", &self.omega_r),
        ];
        for (name, v) in strictly_positive {
            if let Some(k) = v.iter().position(|&x| x <= 0.0) {
                return Err(HglError::validation(
                    format!("{name}[{k}]"),
                    format!("must be strictly positive, got {}", v[k]),
                ));
            }
        }
        // gamma = 0 is a legal (uncertified) controller setting.
        if let Some(k) = self.gamma.iter().position(|&x| x < 0.0) {
            return Err(HglError::validation(format!("gamma[{k}]"), "must be non-negative"));
        }
        if let Some(k) = self.b.iter().position(|&x| x < 0.0) {
            return Err(HglError::validation(format!("b[{k}]"), "must be non-negative"));
        }
        if let Some(k) = self.mu.iter().position(|&x| !(x > 0.0 && x <= 0.5)) {
            return Err(HglError::validation(
                format!("mu[{k}]"),
                "mu must lie in (0, 0.5]",
            ));
        }
        let half = ANGLE_PERIOD / 2.0;
        if let Some(k) = self.delta_r.iter().position(|&x| !(-half..half).contains(&x)) {
            return Err(HglError::validation(
                format!("delta_r[{k}]"),
                "must lie in [-2*pi, 2*pi)",
            ));
        }

        if self.incidence.nrows() != n || self.incidence.ncols() != m {
            return Err(HglError::validation(
                "incidence",
                format!(
                    "expected {n}x{m}, got {}x{}",
                    self.incidence.nrows(),
                    self.incidence.ncols()
                ),
            ));
        }
        if m > 0 && n < 2 {
            return Err(HglError::validation("incidence", "dc lines need at least two nodes"));
        }
        for k in 0..m {
            let col = self.incidence.column(k);
            let plus = col.iter().filter(|&&v| v == 1.0).count();
            let minus = col.iter().filter(|&&v| v == -1.0).count();
            let zero = col.iter().filter(|&&v| v == 0.0).count();
            if plus != 1 || minus != 1 || zero != n - 2 {
                return Err(HglError::validation(
                    format!("incidence[{k}]"),
                    "column must hold exactly one +1 and one -1",
                ));
            }
        }
        Ok(())
    }
}
