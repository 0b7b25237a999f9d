//! Numerical laboratory for hybrid AC/DC grids whose interlinking converters
//! run hybrid angle control.
//!
//! The crate builds the closed-loop vector field, constructs and enumerates
//! its equilibria, evaluates the decentralized stability certificates and the
//! LaSalle function behind them, and simulates trajectories, including Monte
//! Carlo experiments on the basin of the desired equilibrium.

pub mod certificates;
pub mod controller;
pub mod equilibria;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod presets;
pub mod simulator;

pub use controller::ControllerKind;
pub use equilibria::{EquilibriumLabel, EquilibriumSet};
pub use error::{HglError, Result};
pub use model::{GridParameters, StateLayout, SystemState};
