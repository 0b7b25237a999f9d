//! JSON grid description and its mapping onto [`GridParameters`].

use std::fs;
use std::path::Path;

use hgl_core::equilibria::{reference_residual, synthesize_references, EQUILIBRIUM_TOL};
use hgl_core::{ControllerKind, GridParameters, HglError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error(transparent)]
    Model(HglError),
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcGrid {
    #[serde(rename = "J")]
    pub inertia: f64,
    #[serde(rename = "D_f")]
    pub d_friction: f64,
    #[serde(rename = "D_d")]
    pub d_damper: f64,
    pub tau_g: f64,
    pub kappa_g: f64,
    /// COI voltage magnitude at `omega_r`; `b = v_r / omega_r`.
    pub v_r: f64,
    #[serde(rename = "L_g")]
    pub l_g: f64,
    #[serde(rename = "R_g")]
    pub r_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ilc {
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "C_dc")]
    pub c_dc: f64,
    #[serde(rename = "G_dc")]
    pub g_dc: f64,
    pub tau_dc: f64,
    pub kappa_dc: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub i_dc_inj: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcLine {
    #[serde(rename = "L_dc")]
    pub l_dc: f64,
    #[serde(rename = "R_dc")]
    pub r_dc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    HacAngle,
    HacPower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Control {
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta_r: Vec<f64>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_r: Option<Vec<f64>>,
}

fn default_variant() -> Variant {
    Variant::HacAngle
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    Synthesize,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct References {
    pub omega_r: Vec<f64>,
    pub v_dc_r: Vec<f64>,
    pub mode: ReferenceMode,
    #[serde(rename = "T_r", default, skip_serializing_if = "Option::is_none")]
    pub torque_ref: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_dc_r: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfigFile {
    pub n: usize,
    pub m: usize,
    pub incidence: Vec<[usize; 2]>,
    pub ac_grids: Vec<AcGrid>,
    pub ilcs: Vec<Ilc>,
    pub dc_lines: Vec<DcLine>,
    pub control: Control,
    pub references: References,
}

/// A parsed config together with the parameters it describes.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub file: GridConfigFile,
    pub params: GridParameters,
    pub controller: ControllerKind,
}

impl LoadedConfig {
    /// The config with the references in use written out in strict mode.
    pub fn effective(&self) -> GridConfigFile {
        let mut file = self.file.clone();
        file.references.mode = ReferenceMode::Strict;
        file.references.torque_ref = Some(self.params.torque_ref.clone());
        file.references.i_dc_r = Some(self.params.i_dc_ref.clone());
        file
    }
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<LoadedConfig, ConfigError> {
    let file: GridConfigFile = serde_json::from_str(text)?;
    load(file)
}

fn check_len(key: &str, got: usize, want: usize, what: &str) -> Result<(), ConfigError> {
    if got != want {
        return Err(invalid(key, format!("expected {want} entries ({what}), got {got}")));
    }
    Ok(())
}

pub fn load(file: GridConfigFile) -> Result<LoadedConfig, ConfigError> {
    let (n, m) = (file.n, file.m);
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    check_len("incidence", file.incidence.len(), m, "one pair per dc line")?;
    check_len("ac_grids", file.ac_grids.len(), n, "n")?;
    check_len("ilcs", file.ilcs.len(), n, "n")?;
    check_len("dc_lines", file.dc_lines.len(), m, "m")?;
    let c = &file.control;
    check_len("control.eta", c.eta.len(), n, "n")?;
    check_len("control.gamma", c.gamma.len(), n, "n")?;
    check_len("control.delta_r", c.delta_r.len(), n, "n")?;
    let r = &file.references;
    check_len("references.omega_r", r.omega_r.len(), n, "n")?;
    check_len("references.v_dc_r", r.v_dc_r.len(), n, "n")?;

    let controller = match (c.variant, &c.p_r) {
        (Variant::HacAngle, None) => ControllerKind::HacAngle,
        (Variant::HacAngle, Some(_)) => {
            return Err(invalid("control.p_r", "only valid with variant \"hac-power\""))
        }
        (Variant::HacPower, Some(p_r)) => {
            check_len("control.p_r", p_r.len(), n, "n")?;
            if let Some(k) = p_r.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("control.p_r[{k}]"), "must be finite"));
            }
            ControllerKind::HacPower { p_r: p_r.clone() }
        }
        (Variant::HacPower, None) => {
            return Err(invalid("control.p_r", "required with variant \"hac-power\""))
        }
    };

    for (k, [from, to]) in file.incidence.iter().enumerate() {
        if from == to {
            return Err(invalid(
                format!("incidence[{k}]"),
                format!("self-loop at node {from}; a dc line needs two distinct ends"),
            ));
        }
        if *from >= n || *to >= n {
            return Err(invalid(
                format!("incidence[{k}]"),
                format!("node index out of range (n = {n})"),
            ));
        }
    }
    let edges: Vec<(usize, usize)> = file.incidence.iter().map(|e| (e[0], e[1])).collect();
    let incidence = GridParameters::incidence_from_edges(n, &edges).map_err(ConfigError::Model)?;

    let ac = &file.ac_grids;
    let il = &file.ilcs;
    let zeros = vec![0.0; n];
    let (torque_ref, i_dc_ref) = match r.mode {
        ReferenceMode::Synthesize => (zeros.clone(), zeros.clone()),
        ReferenceMode::Strict => {
            let t = r
                .torque_ref
                .clone()
                .ok_or_else(|| invalid("references.T_r", "required in strict mode"))?;
            let i = r
                .i_dc_r
                .clone()
                .ok_or_else(|| invalid("references.i_dc_r", "required in strict mode"))?;
            check_len("references.T_r", t.len(), n, "n")?;
            check_len("references.i_dc_r", i.len(), n, "n")?;
            (t, i)
        }
    };
    let params = GridParameters {
        n,
        m,
        inertia: ac.iter().map(|a| a.inertia).collect(),
        d_friction: ac.iter().map(|a| a.d_friction).collect(),
        d_damper: ac.iter().map(|a| a.d_damper).collect(),
        tau_g: ac.iter().map(|a| a.tau_g).collect(),
        kappa_g: ac.iter().map(|a| a.kappa_g).collect(),
        torque_ref,
        omega_r: r.omega_r.clone(),
        b: ac.iter().zip(&r.omega_r).map(|(a, w)| a.v_r / w).collect(),
        l_g: ac.iter().map(|a| a.l_g).collect(),
        r_g: ac.iter().map(|a| a.r_g).collect(),
        mu: il.iter().map(|x| x.mu).collect(),
        l: il.iter().map(|x| x.l).collect(),
        r: il.iter().map(|x| x.r).collect(),
        c: il.iter().map(|x| x.c).collect(),
        g: il.iter().map(|x| x.g).collect(),
        c_dc: il.iter().map(|x| x.c_dc).collect(),
        g_dc: il.iter().map(|x| x.g_dc).collect(),
        tau_dc: il.iter().map(|x| x.tau_dc).collect(),
        kappa_dc: il.iter().map(|x| x.kappa_dc).collect(),
        i_dc_ref,
        v_dc_ref: r.v_dc_r.clone(),
        i_dc_inj: il.iter().map(|x| x.i_dc_inj).collect(),
        incidence,
        l_dc: file.dc_lines.iter().map(|d| d.l_dc).collect(),
        r_dc: file.dc_lines.iter().map(|d| d.r_dc).collect(),
        eta: c.eta.clone(),
        gamma: c.gamma.clone(),
        delta_r: c.delta_r.clone(),
    };
    if let Some(k) = ac.iter().position(|a| !(a.v_r >= 0.0)) {
        return Err(invalid(format!("ac_grids[{k}].v_r"), "must be non-negative"));
    }
    params.validate().map_err(locate)?;

    let params = match r.mode {
        ReferenceMode::Synthesize => synthesize_references(&params).map_err(locate)?,
        ReferenceMode::Strict => {
            let residual = reference_residual(&params).map_err(locate)?;
            if residual > EQUILIBRIUM_TOL {
                return Err(invalid(
                    "references",
                    format!(
                        "T_r and i_dc_r leave an equilibrium residual of {residual:e} \
                         (limit {EQUILIBRIUM_TOL:e}); use mode \"synthesize\""
                    ),
                ));
            }
            params
        }
    };
    Ok(LoadedConfig {
        file,
        params,
        controller,
    })
}

/// Rewrites a model validation error in terms of config keys.
fn locate(err: HglError) -> ConfigError {
    let HglError::Validation { field, reason } = err else {
        return ConfigError::Model(err);
    };
    let (name, index) = match field.split_once('[') {
        Some((name, rest)) => (name, rest.trim_end_matches(']').parse::<usize>().ok()),
        None => (field.as_str(), None),
    };
    let key = match (json_key(name), index) {
        (Some((section, key, true)), Some(k)) => format!("{section}[{k}].{key}"),
        (Some((section, key, false)), Some(k)) => format!("{section}.{key}[{k}]"),
        (Some((section, key, _)), None) => format!("{section}.{key}"),
        (None, _) => field.clone(),
    };
    invalid(key, reason)
}

/// `(section, key, per-record)` for a model parameter name.
fn json_key(name: &str) -> Option<(&'static str, &'static str, bool)> {
    Some(match name {
        "J" => ("ac_grids", "J", true),
        "D_f" => ("ac_grids", "D_f", true),
        "D_d" => ("ac_grids", "D_d", true),
        "tau_g" => ("ac_grids", "tau_g", true),
        "kappa_g" => ("ac_grids", "kappa_g", true),
        "b" => ("ac_grids", "v_r", true),
        "L_g" => ("ac_grids", "L_g", true),
        "R_g" => ("ac_grids", "R_g", true),
        "mu" => ("ilcs", "mu", true),
        "L" => ("ilcs", "L", true),
        "R" => ("ilcs", "R", true),
        "C" => ("ilcs", "C", true),
        "G" => ("ilcs", "G", true),
        "C_dc" => ("ilcs", "C_dc", true),
        "G_dc" => ("ilcs", "G_dc", true),
        "tau_dc" => ("ilcs", "tau_dc", true),
        "kappa_dc" => ("ilcs", "kappa_dc", true),
        "i_dc_inj" => ("ilcs", "i_dc_inj", true),
        "L_dc" => ("dc_lines", "L_dc", true),
        "R_dc" => ("dc_lines", "R_dc", true),
        "eta" => ("control", "eta", false),
        "gamma" => ("control", "gamma", false),
        "delta_r" => ("control", "delta_r", false),
        "omega_r" => ("references", "omega_r", false),
        "v_dc_r" => ("references", "v_dc_r", false),
        "T_r" => ("references", "T_r", false),
        "i_dc_r" => ("references", "i_dc_r", false),
        _ => return None,
    })
}
