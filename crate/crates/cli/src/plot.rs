//! Log-log convergence plots drawn as plain SVG paths.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pathlift::experiments::Sweep;

use crate::run::RunResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Decade range covering `v`, widened to at least one decade.
fn decades(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Render one sweep, or `None` when no point has positive coordinates.
pub fn render(s: &Sweep) -> Option<String> {
    let pts: Vec<(f64, f64)> =
        s.x.iter().zip(&s.y).filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite()).map(|(x, y)| (x.log10(), y.log10())).collect();
    if pts.is_empty() {
        return None;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (x0, x1) = decades(&lx);
    let (y0, y1) = decades(&ly);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(&s.label));

    let (bx0, bx1, by0, by1) = (px(x0), px(x1), py(y0), py(y1));
    let _ = writeln!(svg, r#"<path d="M{bx0:.1},{by1:.1} L{bx0:.1},{by0:.1} L{bx1:.1},{by0:.1}" fill="none" stroke="black"/>"#);
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        let _ = writeln!(svg, r##"<path d="M{x:.1},{by0:.1} L{x:.1},{by1:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">1e{d}</text>"#, by0 + 18.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        let _ = writeln!(svg, r##"<path d="M{bx0:.1},{y:.1} L{bx1:.1},{y:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="end">1e{d}</text>"#, bx0 - 6.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#, (bx0 + bx1) / 2.0, HEIGHT - 14.0, escape(&s.x_label));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (by0 + by1) / 2.0,
        (by0 + by1) / 2.0,
        escape(&s.y_label)
    );

    let data: Vec<String> = pts.iter().enumerate().map(|(i, (x, y))| format!("{}{:.1},{:.1}", if i == 0 { "M" } else { "L" }, px(*x), py(*y))).collect();
    let _ = writeln!(svg, r##"<path d="{}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##, data.join(" "));
    for (x, y) in &pts {
        let _ = writeln!(svg, r##"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="#1f5fa8"/>"##, px(*x), py(*y));
    }

    if pts.len() >= 2 && s.slope.is_finite() {
        let n = pts.len() as f64;
        let intercept = (ly.iter().sum::<f64>() - s.slope * lx.iter().sum::<f64>()) / n;
        let (a, b) = (lx[0], lx[lx.len() - 1]);
        let _ = writeln!(
            svg,
            r##"<path d="M{:.1},{:.1} L{:.1},{:.1}" stroke="#c0392b" stroke-dasharray="6 4" fill="none"/>"##,
            px(a),
            py(intercept + s.slope * a),
            px(b),
            py(intercept + s.slope * b)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="14" fill="#c0392b" text-anchor="end">fitted slope {:.2}</text>"##,
            bx1 - 6.0,
            by1 + 18.0,
            s.slope
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Write one SVG per sweep. Results without a usable series only warn.
pub fn emit_plots(result: &RunResult, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
    if result.sweeps.is_empty() {
        eprintln!("warning: {} result has no sweep to plot", result.kind);
        return Ok(Vec::new());
    }
    let mut written = Vec::new();
    for (i, s) in result.sweeps.iter().enumerate() {
        let Some(svg) = render(s) else {
            eprintln!("warning: sweep `{}` has no plottable points", s.label);
            continue;
        };
        let path = dir.join(format!("{stem}-sweep{i}.svg"));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}
