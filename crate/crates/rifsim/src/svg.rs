//! Minimal SVG output: a polyline plot for f(alpha) curves and a rect
//! raster for mass heatmaps. No external renderer, no text beyond labels.

use std::fmt::Write as _;

use crate::num::Real;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn finite_pairs<T: Real>(xs: &[T], ys: &[T]) -> Vec<(f64, f64)> {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (x.to_f64_lossy(), y.to_f64_lossy()))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect()
}

/// Line plot of y against x (used for f(alpha) and tau(q) curves).
/// Non-finite points are dropped; the view box is fit to the data.
pub fn curve_svg<T: Real>(xs: &[T], ys: &[T], x_label: &str, y_label: &str) -> String {
    let pts = finite_pairs(xs, ys);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    if pts.len() >= 2 {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        // axes
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="black" stroke-width="1" points="{},{} {},{} {},{}"/>"#,
            MARGIN,
            MARGIN,
            MARGIN,
            HEIGHT - MARGIN,
            WIDTH - MARGIN,
            HEIGHT - MARGIN
        );
        let mut points = String::new();
        for (x, y) in &pts {
            let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##,
            points.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.0}" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - MARGIN / 3.0,
            x_label
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.0}" font-size="14" transform="rotate(-90 {:.0} {:.0})">{}</text>"#,
            MARGIN / 3.0,
            HEIGHT / 2.0,
            MARGIN / 3.0,
            HEIGHT / 2.0,
            y_label
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap raster: one rect per (depth, bin) cell, grayscale by mass
/// relative to the row maximum (dark = heavy).
pub fn heatmap_svg<T: Real>(heatmap: &[Vec<T>]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let rows = heatmap.len().max(1);
    let cell_h = (HEIGHT - 2.0 * MARGIN) / rows as f64;
    for (depth, row) in heatmap.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let row_max = row
            .iter()
            .map(|&x| x.to_f64_lossy())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let cell_w = (WIDTH - 2.0 * MARGIN) / row.len() as f64;
        for (bin, &mass) in row.iter().enumerate() {
            let rel = (mass.to_f64_lossy() / row_max).clamp(0.0, 1.0);
            let shade = (255.0 * (1.0 - rel)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                MARGIN + bin as f64 * cell_w,
                MARGIN + depth as f64 * cell_h,
                cell_w,
                cell_h
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
