//! Prints the equilibrium, certificate and linearized spectrum of the
//! desk-scale default grid.
//!
//! ```bash
//! cargo run -p hgl-core --example desk_grid -- 2 1
//! ```

use hgl_core::certificates::certify;
use hgl_core::equilibria::{max_residual, solve_stationary};
use hgl_core::model::StateRecord;
use hgl_core::presets::desk_grid;

fn main() -> hgl_core::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (n, m) = (args.first().copied().unwrap_or(2), args.get(1).copied().unwrap_or(1));

    let p = desk_grid(n, m)?;
    let eq = solve_stationary(&p)?;
    println!("x*_s = {:#?}", StateRecord::from(eq.stable()));
    println!("T_r = {:?}\ni_dc_r = {:?}", p.torque_ref, p.i_dc_ref);
    println!("max residual over {} equilibria: {:e}", eq.len(), max_residual(&eq, &p)?);

    let report = certify(&p, &eq)?;
    for (j, u) in report.units.iter().enumerate() {
        println!(
            "unit {j}: D = {:.4} D_min = {:.4}  gamma = {:.4} gamma_min (closed form) = {:.4} gamma_min (Schur) = {:.4}  min eig Q11 = {:.4e}",
            u.d, u.d_min, u.gamma, u.gamma_min_closed_form, u.gamma_min_schur, u.q11_min_eig
        );
    }
    println!("certificate pass: {}", report.pass);
    for s in &report.spectra {
        println!("{:?} {:?}: max Re = {:.6}", s.label, s.shifted, s.max_real);
    }
    Ok(())
}
