//! Parameters, state, and the closed-loop vector field of the hybrid grid.

pub mod angle;
pub mod field;
pub mod jacobian;
pub mod params;
pub mod state;

pub use angle::{angle_distance, wrap_angle, ANGLE_PERIOD};
pub use field::{
    build_psi, error_coordinates, error_vector_field, from_error_coordinates, modulation_matrix,
    vector_field,
};
pub use jacobian::{analytic_jacobian, numerical_jacobian};
pub use params::GridParameters;
pub use state::{MassMatrix, StateLayout, StateRecord, SystemState};
