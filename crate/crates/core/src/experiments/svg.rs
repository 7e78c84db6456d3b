//! Minimal SVG line plots: panels of curves with optional vertical markers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

impl Curve {
    pub fn solid(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y, dashed: false }
    }

    pub fn dashed(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y, dashed: true }
    }
}

/// A vertical line at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub curves: Vec<Curve>,
    pub markers: Vec<Marker>,
}

/// One SVG file: panels laid out row-major in `columns` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub name: String,
    pub columns: usize,
    pub panels: Vec<Panel>,
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const COLORS: [&str; 5] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400"];
const MARKER_COLORS: [&str; 3] = ["#555555", "#b8860b", "#008b8b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly five round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = start;
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn panel_svg(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let finite = |v: &f64| v.is_finite();
    let xs = panel.curves.iter().flat_map(|c| c.x.iter()).copied().filter(finite);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    for m in &panel.markers {
        if m.x.is_finite() {
            x0 = x0.min(m.x);
            x1 = x1.max(m.x);
        }
    }
    let y1 = panel.curves.iter().flat_map(|c| c.y.iter()).copied().filter(finite).fold(0.0, f64::max) * 1.05;
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let y1 = if y1 > 0.0 { y1 } else { 1.0 };
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + MARGIN_T + ph - y / y1 * ph;

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + 18.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#000000" stroke-width="0.8"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#000000" stroke-width="0.8"/>"##,
            oy + MARGIN_T + ph,
            oy + MARGIN_T + ph + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            oy + MARGIN_T + ph + 15.0,
            fmt_tick(t)
        );
    }
    for t in ticks(0.0, y1) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#000000" stroke-width="0.8"/>"##,
            ox + MARGIN_L - 4.0,
            ox + MARGIN_L
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            ox + MARGIN_L - 6.0,
            y + 3.5,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + PANEL_H - 6.0,
        escape(&panel.x_label)
    );
    for (i, c) in panel.curves.iter().enumerate() {
        let mut d = String::new();
        for (x, y) in c.x.iter().zip(&c.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{}{:.2},{:.2}", if d.is_empty() { "M" } else { " L" }, sx(*x), sy(*y));
            }
        }
        if d.is_empty() {
            continue;
        }
        let dash = if c.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.4"{dash}/>"#,
            COLORS[i % COLORS.len()]
        );
        let ly = oy + MARGIN_T + 12.0 + 13.0 * i as f64;
        let lx = ox + MARGIN_L + pw - 110.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.4"{dash}/>"#,
            lx + 16.0,
            COLORS[i % COLORS.len()]
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#, lx + 20.0, ly + 3.5, escape(&c.label));
    }
    for (i, m) in panel.markers.iter().enumerate() {
        if !m.x.is_finite() {
            continue;
        }
        let x = sx(m.x);
        let color = MARKER_COLORS[i % MARKER_COLORS.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}" stroke-width="1" stroke-dasharray="2,2"/>"#,
            oy + MARGIN_T,
            oy + MARGIN_T + ph
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" fill="{color}">{}</text>"#,
            x + 2.0,
            oy + MARGIN_T + ph - 4.0 - 10.0 * i as f64,
            escape(&m.label)
        );
    }
}

impl Figure {
    pub fn to_svg(&self) -> String {
        let cols = self.columns.max(1).min(self.panels.len().max(1));
        let rows = self.panels.len().div_ceil(cols).max(1);
        let (w, h) = (cols as f64 * PANEL_W, rows as f64 * PANEL_H);
        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"#
        );
        let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        for (i, p) in self.panels.iter().enumerate() {
            let (r, c) = (i / cols, i % cols);
            panel_svg(&mut out, p, c as f64 * PANEL_W, r as f64 * PANEL_H);
        }
        out.push_str("</svg>\n");
        out
    }
}
