//! Minimal SVG line charts.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Points with missing values are skipped; the line breaks there.
    pub points: Vec<(f64, Option<f64>)>,
}

const W: f64 = 420.0;
const H: f64 = 300.0;
const M: f64 = 55.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.08;
    (lo - pad, hi + pad)
}

fn panel(out: &mut String, p: &Panel, dx: f64) {
    // x is drawn on a log2 axis when every x is positive.
    let log = p.points.iter().all(|(x, _)| *x > 0.0);
    let tx = |x: f64| if log { x.log2() } else { x };
    let (x0, x1) = bounds(p.points.iter().map(|(x, _)| tx(*x)));
    let (y0, y1) = bounds(p.points.iter().filter_map(|(_, y)| *y));
    let sx = |x: f64| dx + M + (tx(x) - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, dx + W / 2.0, esc(&p.title));
    let _ = writeln!(
        out,
        r#"<line x1="{a}" y1="{b}" x2="{c}" y2="{b}" stroke="black"/><line x1="{a}" y1="{b}" x2="{a}" y2="{d}" stroke="black"/>"#,
        a = dx + M,
        b = H - M,
        c = dx + W - M,
        d = M
    );
    for (x, _) in &p.points {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, sx(*x), H - M + 15.0, x);
    }
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{:.4}</text>"#, dx + M - 4.0, sy(y) + 4.0, y);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, dx + W / 2.0, H - 12.0, esc(&p.x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 {x} {y})" dx="{shift}">{}</text>"#,
        esc(&p.y_label),
        x = 14.0,
        y = H / 2.0,
        shift = dx
    );
    let mut segment: Vec<String> = Vec::new();
    let flush = |out: &mut String, seg: &mut Vec<String>| {
        if seg.len() > 1 {
            let _ = writeln!(out, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, seg.join(" "));
        }
        seg.clear();
    };
    for (x, y) in &p.points {
        match y {
            Some(y) => {
                segment.push(format!("{:.2},{:.2}", sx(*x), sy(*y)));
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(*x), sy(*y));
            }
            None => flush(out, &mut segment),
        }
    }
    flush(out, &mut segment);
    let _ = writeln!(out, "</g>");
}

/// Panels laid out left to right in one document.
pub fn render(panels: &[Panel]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        W * panels.len() as f64,
        H,
        W * panels.len() as f64,
        H
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, i as f64 * W);
    }
    out.push_str("</svg>\n");
    out
}
