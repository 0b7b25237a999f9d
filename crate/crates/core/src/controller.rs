//! Hybrid angle control: the converter frequency is set from the dc voltage
//! error and the sine of half the relative-angle error.

use serde::{Deserialize, Serialize};

use crate::model::angle::wrap_unchecked;
use crate::model::GridParameters;

/// Which form of the control law drives the converter angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ControllerKind {
    /// `omega_c = omega_r + eta (v_dc - v_dc_r) - gamma sin((delta - delta_r) / 2)`.
    HacAngle,
    /// Power-based approximation: the angle error is replaced by the active
    /// power error `p - p_r`, with `p_j = v_j^T i_g,j`. Simulation only.
    HacPower { p_r: Vec<f64> },
}

impl Default for ControllerKind {
    fn default() -> Self {
        ControllerKind::HacAngle
    }
}

pub fn hac_frequency(delta: &[f64], v_dc: &[f64], p: &GridParameters) -> Vec<f64> {
    (0..p.n)
        .map(|j| {
            let err = wrap_unchecked(delta[j] - p.delta_r[j]);
            p.omega_r[j] + p.eta[j] * (v_dc[j] - p.v_dc_ref[j]) - p.gamma[j] * (0.5 * err).sin()
        })
        .collect()
}

/// Output of the power-based law, with the units whose power error left the
/// interval `[-2*pi, 2*pi]` where the half-angle sine is monotone-periodic.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerFrequency {
    pub omega_c: Vec<f64>,
    pub out_of_domain: Vec<usize>,
}

pub fn hac_power_frequency(
    pflow: &[f64],
    v_dc: &[f64],
    p: &GridParameters,
    p_r: &[f64],
) -> PowerFrequency {
    let mut out_of_domain = Vec::new();
    let omega_c = (0..p.n)
        .map(|j| {
            let err = pflow[j] - p_r[j];
            if err.abs() > 2.0 * std::f64::consts::PI {
                out_of_domain.push(j);
            }
            p.omega_r[j] + p.eta[j] * (v_dc[j] - p.v_dc_ref[j]) - p.gamma[j] * (0.5 * err).sin()
        })
        .collect();
    PowerFrequency {
        omega_c,
        out_of_domain,
    }
}

/// Active power `v_j^T i_g,j` at each converter's filter-capacitor node.
pub fn active_power(v: &[f64], i_g: &[f64]) -> Vec<f64> {
    v.chunks_exact(2)
        .zip(i_g.chunks_exact(2))
        .map(|(v, ig)| v[0] * ig[0] + v[1] * ig[1])
        .collect()
}
