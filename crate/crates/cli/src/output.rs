use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use hgl_core::simulator::Trajectory;
use serde::Serialize;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Columns: `t`, the state in canonical order, then `V` and `Vdot`.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(traj.layout.labels());
    header.push("V".into());
    header.push("Vdot".into());
    out.write_record(&header)?;

    let v = traj.v.as_deref();
    let vdot = traj.vdot.as_deref();
    let mut row = Vec::with_capacity(header.len());
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        row.clear();
        row.push(num(*t));
        row.extend(x.iter().map(|&c| num(c)));
        row.push(v.map_or_else(|| "nan".into(), |v| num(v[k])));
        row.push(vdot.map_or_else(|| "nan".into(), |v| num(v[k])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
