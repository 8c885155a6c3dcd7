//! Minimal static SVG heatmaps for sweep outputs. The CSV is the source
//! of truth; these renderings are a convenience view with no plotting
//! dependency.

use std::fs;
use std::path::Path;

use crate::CliError;

const STOPS: [(f64, [u8; 3]); 5] = [
    (0.00, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.50, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.00, [253, 231, 37]),
];

fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    for pair in STOPS.windows(2) {
        let (t0, c0) = pair[0];
        let (t1, c1) = pair[1];
        if t <= t1 {
            let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            return [
                (c0[0] as f64 + f * (c1[0] as f64 - c0[0] as f64)).round() as u8,
                (c0[1] as f64 + f * (c1[1] as f64 - c0[1] as f64)).round() as u8,
                (c0[2] as f64 + f * (c1[2] as f64 - c0[2] as f64)).round() as u8,
            ];
        }
    }
    STOPS[STOPS.len() - 1].1
}

/// Render an `n x n` grid of values (theta_i-major) to an SVG heatmap.
pub fn write_heatmap<P: AsRef<Path>>(
    path: P,
    n: usize,
    values: &[f64],
    title: &str,
) -> Result<(), CliError> {
    assert_eq!(values.len(), n * n);
    let cell = 400.0 / n as f64;
    let margin = 60.0;
    let size = 400.0;
    let width = margin + size + 90.0;
    let height = margin + size + 40.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-300);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        margin
    ));
    for i in 0..n {
        for j in 0..n {
            let v = values[i * n + j];
            let [r, g, b] = colormap((v - lo) / span);
            // theta_i on x, theta_s on y (origin bottom-left)
            let x = margin + i as f64 * cell;
            let y = margin + size - (j as f64 + 1.0) * cell;
            svg.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>\n",
                cell + 0.5,
                cell + 0.5,
            ));
        }
    }
    // axes
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">theta_i (0..90 deg)</text>\n",
        margin + size / 2.0 - 55.0,
        margin + size + 25.0
    ));
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 15 {})\">theta_s (0..90 deg)</text>\n",
        margin + size / 2.0 + 55.0,
        margin + size / 2.0 + 55.0
    ));
    // colorbar
    let bar_x = margin + size + 20.0;
    let steps = 64;
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let [r, g, b] = colormap(t);
        let y = margin + size - (t * size);
        svg.push_str(&format!(
            "<rect x=\"{bar_x:.2}\" y=\"{:.2}\" width=\"16\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>\n",
            y - size / steps as f64,
            size / steps as f64 + 0.5,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{hi:.4e}</text>\n",
        bar_x + 20.0,
        margin + 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{lo:.4e}</text>\n",
        bar_x + 20.0,
        margin + size
    ));
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| CliError::Data(format!("cannot write SVG: {e}")))
}
