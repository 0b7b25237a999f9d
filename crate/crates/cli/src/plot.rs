use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use plotters::prelude::*;

/// Reads `t` and the named columns from a trajectory CSV.
pub fn read_columns(path: &Path, columns: &[String]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column `{name}` not found in {}", path.display()))
    };
    let t_col = find("t")?;
    let cols = columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut t = Vec::new();
    let mut ys = vec![Vec::new(); cols.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .with_context(|| format!("row {}: bad number `{}`", line + 2, &rec[i]))
        };
        t.push(field(t_col)?);
        for (y, &c) in ys.iter_mut().zip(&cols) {
            y.push(field(c)?);
        }
    }
    Ok((t, ys))
}

pub fn plot_csv(input: &Path, columns: &[String], out: &Path, title: Option<&str>) -> Result<()> {
    let (t, ys) = read_columns(input, columns)?;
    if t.is_empty() {
        bail!("{} has no rows", input.display());
    }
    let finite = ys.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        bail!("selected columns hold no finite values");
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (t0, t1) = (t[0], *t.last().unwrap());
    let t1 = if t1 > t0 { t1 } else { t0 + 1.0 };

    let root = SVGBackend::new(out, (960, 540)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title.unwrap_or(""), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(t0..t1, (lo - pad)..(hi + pad))?;
    chart.configure_mesh().x_desc("t").draw()?;
    for (k, (name, y)) in columns.iter().zip(&ys).enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(
                t.iter().copied().zip(y.iter().copied()).filter(|(_, v)| v.is_finite()),
                color.stroke_width(2),
            ))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
