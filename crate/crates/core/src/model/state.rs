use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{HglError, Result};
use crate::model::angle::wrap_unchecked;

/// Offsets of each block inside the flat state vector
/// `(delta, i_dc_n, i_dc_g, v_dc, i, v, i_g, omega_g, T_m)`.
///
/// The angle block has `n` entries and `y` the remaining `10n + m`, so the
/// flat dimension is `11n + m`. dq pairs are stored per converter: entries
/// `(2j, 2j + 1)` of a dq block are the d and q components of unit `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub n: usize,
    pub m: usize,
}

impl StateLayout {
    pub fn new(n: usize, m: usize) -> Self {
        StateLayout { n, m }
    }

    pub fn dim(&self) -> usize {
        11 * self.n + self.m
    }

    /// Dimension of the non-angle part `y`.
    pub fn y_dim(&self) -> usize {
        10 * self.n + self.m
    }

    pub fn delta(&self) -> Range<usize> {
        0..self.n
    }
    pub fn i_dc_n(&self) -> Range<usize> {
        let s = self.n;
        s..s + self.m
    }
    pub fn i_dc_g(&self) -> Range<usize> {
        let s = self.n + self.m;
        s..s + self.n
    }
    pub fn v_dc(&self) -> Range<usize> {
        let s = 2 * self.n + self.m;
        s..s + self.n
    }
    pub fn i(&self) -> Range<usize> {
        let s = 3 * self.n + self.m;
        s..s + 2 * self.n
    }
    pub fn v(&self) -> Range<usize> {
        let s = 5 * self.n + self.m;
        s..s + 2 * self.n
    }
    pub fn i_g(&self) -> Range<usize> {
        let s = 7 * self.n + self.m;
        s..s + 2 * self.n
    }
    pub fn omega_g(&self) -> Range<usize> {
        let s = 9 * self.n + self.m;
        s..s + self.n
    }
    pub fn t_m(&self) -> Range<usize> {
        let s = 10 * self.n + self.m;
        s..s + self.n
    }

    /// Column names in canonical order, as used by CSV output.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim());
        let n = self.n;
        out.extend((0..n).map(|j| format!("delta_{j}")));
        out.extend((0..self.m).map(|k| format!("i_dc_n_{k}")));
        out.extend((0..n).map(|j| format!("i_dc_g_{j}")));
        out.extend((0..n).map(|j| format!("v_dc_{j}")));
        for name in ["i", "v", "i_g"] {
            for j in 0..n {
                out.push(format!("{name}_d_{j}"));
                out.push(format!("{name}_q_{j}"));
            }
        }
        out.extend((0..n).map(|j| format!("omega_g_{j}")));
        out.extend((0..n).map(|j| format!("T_m_{j}")));
        out
    }

    pub(crate) fn check(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(HglError::DimensionMismatch {
                what,
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Full closed-loop state stored as one flat vector in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    layout: StateLayout,
    data: Vec<f64>,
}

macro_rules! block_accessors {
    ($($name:ident, $name_mut:ident;)*) => {
        $(
            pub fn $name(&self) -> &[f64] {
                &self.data[self.layout.$name()]
            }
            pub fn $name_mut(&mut self) -> &mut [f64] {
                let r = self.layout.$name();
                &mut self.data[r]
            }
        )*
    };
}

impl SystemState {
    pub fn zeros(layout: StateLayout) -> Self {
        SystemState {
            layout,
            data: vec![0.0; layout.dim()],
        }
    }

    /// Wraps a flat vector; angles are mapped into `[-2*pi, 2*pi)`.
    pub fn from_flat(layout: StateLayout, data: Vec<f64>) -> Result<Self> {
        layout.check("state", data.len())?;
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(HglError::InvalidArgument(format!(
                "state entry {k} is not finite"
            )));
        }
        let mut s = SystemState { layout, data };
        s.wrap();
        Ok(s)
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn wrap(&mut self) {
        for d in self.delta_mut() {
            *d = wrap_unchecked(*d);
        }
    }

    block_accessors! {
        delta, delta_mut;
        i_dc_n, i_dc_n_mut;
        i_dc_g, i_dc_g_mut;
        v_dc, v_dc_mut;
        i, i_mut;
        v, v_mut;
        i_g, i_g_mut;
        omega_g, omega_g_mut;
        t_m, t_m_mut;
    }

    /// The non-angle part `y`.
    pub fn y(&self) -> &[f64] {
        &self.data[self.layout.n..]
    }
}

/// Named-block view used for JSON reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateRecord {
    pub delta: Vec<f64>,
    pub i_dc_n: Vec<f64>,
    pub i_dc_g: Vec<f64>,
    pub v_dc: Vec<f64>,
    pub i: Vec<f64>,
    pub v: Vec<f64>,
    pub i_g: Vec<f64>,
    pub omega_g: Vec<f64>,
    pub t_m: Vec<f64>,
}

impl From<&SystemState> for StateRecord {
    fn from(s: &SystemState) -> Self {
        StateRecord {
            delta: s.delta().to_vec(),
            i_dc_n: s.i_dc_n().to_vec(),
            i_dc_g: s.i_dc_g().to_vec(),
            v_dc: s.v_dc().to_vec(),
            i: s.i().to_vec(),
            v: s.v().to_vec(),
            i_g: s.i_g().to_vec(),
            omega_g: s.omega_g().to_vec(),
            t_m: s.t_m().to_vec(),
        }
    }
}

/// Block-diagonal mass matrix `K = diag(I_n, L_dc, tau_dc, C_dc, L, C, L_g, J, tau_g)`
/// stored as its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrix {
    diag: Vec<f64>,
}

impl MassMatrix {
    pub fn new(p: &crate::model::GridParameters) -> Self {
        let layout = StateLayout::new(p.n, p.m);
        let mut diag = vec![0.0; layout.dim()];
        diag[layout.delta()].fill(1.0);
        diag[layout.i_dc_n()].copy_from_slice(&p.l_dc);
        diag[layout.i_dc_g()].copy_from_slice(&p.tau_dc);
        diag[layout.v_dc()].copy_from_slice(&p.c_dc);
        for j in 0..p.n {
            for (range, val) in [
                (layout.i(), p.l[j]),
                (layout.v(), p.c[j]),
                (layout.i_g(), p.l_g[j]),
            ] {
                diag[range.start + 2 * j] = val;
                diag[range.start + 2 * j + 1] = val;
            }
        }
        diag[layout.omega_g()].copy_from_slice(&p.inertia);
        diag[layout.t_m()].copy_from_slice(&p.tau_g);
        MassMatrix { diag }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Applies `K^-1` in place.
    pub fn solve_in_place(&self, f: &mut [f64]) {
        for (x, k) in f.iter_mut().zip(&self.diag) {
            *x /= k;
        }
    }
}
