//! Minimal SVG line plots of run series.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

const COLORS: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
];

/// One polyline; `None` values split the line.
pub struct Series {
    pub points: Vec<(f64, Option<f64>)>,
}

/// Renders the series on shared axes. Text is omitted so that no font
/// backend is needed; series colors follow the order of `series`.
pub fn line_plot(path: &Path, series: &[Series]) -> Result<()> {
    let plot_err = |e: &dyn std::fmt::Display| Error::Plot(format!("{}: {e}", path.display()));
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter_map(|(t, v)| v.map(|v| (*t, v)))
        .filter(|(t, v)| t.is_finite() && v.is_finite());
    let (mut t0, mut t1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (t, v) in finite {
        t0 = t0.min(t);
        t1 = t1.max(t);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    if !t0.is_finite() {
        (t0, t1, v0, v1) = (0.0, 1.0, -1.0, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let pad = ((v1 - v0) * 0.05).max(1e-6);
    let root = SVGBackend::new(path, (800, 320)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .build_cartesian_2d(t0..t1, (v0 - pad)..(v1 + pad))
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .disable_y_mesh()
        .x_labels(0)
        .y_labels(0)
        .draw()
        .map_err(|e| plot_err(&e))?;
    if v0 - pad < 0.0 && v1 + pad > 0.0 {
        chart
            .draw_series(LineSeries::new([(t0, 0.0), (t1, 0.0)], BLACK.mix(0.3)))
            .map_err(|e| plot_err(&e))?;
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for run in s.points.split(|(_, v)| v.is_none()) {
            let pts: Vec<(f64, f64)> = run.iter().filter_map(|(t, v)| v.map(|v| (*t, v))).collect();
            if pts.len() > 1 {
                chart
                    .draw_series(LineSeries::new(pts, color.stroke_width(1)))
                    .map_err(|e| plot_err(&e))?;
            }
        }
    }
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_svg_with_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.svg");
        let pts = (0..50).map(|k| (k as f64 * 0.1, if k == 20 { None } else { Some((k as f64).sin()) }));
        line_plot(&p, &[Series { points: pts.collect() }]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("<svg") && text.contains("polyline"));
    }
}
