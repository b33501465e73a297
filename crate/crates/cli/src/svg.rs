//! Minimal SVG plots for spectra, mode shapes and tree overlays.

use std::fmt::Write;

use vibratree_core::simulator::Kinematics;
use vibratree_core::{ConnectivityGraph, Mode, SimState, TreeModel, Vec2};

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polylines of `series` over `x`, optionally on a log10 y axis.
pub fn line_plot(title: &str, x_label: &str, x: &[f64], series: &[(String, Vec<f64>)], log_y: bool) -> String {
    let tf = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let finite = series.iter().flat_map(|(_, ys)| ys.iter().map(|&v| tf(v))).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if log_y {
        lo = lo.max(hi - 12.0);
    }
    if !(hi > lo) {
        (lo, hi) = (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
    }
    let (x0, x1) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(1.0).max(1e-12));
    let px = |v: f64| PAD + (v - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (tf(v).clamp(lo, hi) - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut out = String::new();
    header(&mut out, W, H);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="{PAD}" y="{}" font-size="10">{x0:.3}</text>"#, H - PAD + 14.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{x1:.3}</text>"#, W - PAD, H - PAD + 14.0);
    let axis = if log_y { "log10" } else { "" };
    let _ = writeln!(out, r#"<text x="4" y="{}" font-size="10">{axis} {hi:.3}</text>"#, PAD);
    let _ = writeln!(out, r#"<text x="4" y="{}" font-size="10">{axis} {lo:.3}</text>"#, H - PAD);
    for (i, (name, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = x.iter().zip(ys).map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1"/>"#, pts.join(" "), colour(i));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 12.0 * i as f64,
            colour(i),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Maps tree coordinates (vertical up, horizontal) into a box.
struct Frame {
    lo: Vec2,
    scale: f64,
    left: f64,
    bottom: f64,
}

impl Frame {
    fn fit(points: &[Vec2], left: f64, bottom: f64, size: f64) -> Self {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let span = (hi - lo).max().max(1e-9);
        Frame { lo, scale: size / span, left, bottom }
    }

    fn map(&self, p: &Vec2) -> (f64, f64) {
        (self.left + (p[1] - self.lo[1]) * self.scale, self.bottom - (p[0] - self.lo[0]) * self.scale)
    }
}

fn segment(out: &mut String, f: &Frame, a: &Vec2, b: &Vec2, stroke: &str, width: f64) {
    let ((x1, y1), (x2, y2)) = (f.map(a), f.map(b));
    let _ = writeln!(out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#);
}

fn draw_tree(out: &mut String, f: &Frame, model: &TreeModel, kin: &Kinematics, stroke: &str, width: f64) {
    for i in 0..model.len() {
        segment(out, f, &kin.joints[i], &kin.tips[i], stroke, width);
    }
}

/// One panel per mode: the static tree and the tree deflected along the mode.
pub fn mode_shapes(model: &TreeModel, modes: &[Mode]) -> String {
    let n = model.len();
    let panel = 220.0;
    let cols = modes.len().clamp(1, 4);
    let rows = modes.len().div_ceil(cols).max(1);
    let (w, h) = (panel * cols as f64, panel * rows as f64 + 20.0);
    let rest = Kinematics::new(model, &SimState::rest(n));
    let reach: f64 = model.branches().iter().map(|b| b.length).sum();

    let mut out = String::new();
    header(&mut out, w, h);
    for (k, mode) in modes.iter().enumerate() {
        let (c, r) = ((k % cols) as f64, (k / cols) as f64);
        let amp = 0.15 * reach / model.branches().iter().map(|b| b.length).fold(0.0, f64::max);
        let bent = Kinematics::new(model, &SimState::new(mode.shape.iter().map(|v| v * amp).collect(), vec![0.0; n]));
        let mut pts: Vec<Vec2> = rest.tips.clone();
        pts.extend(rest.joints.iter().copied());
        pts.extend(bent.tips.iter().copied());
        let f = Frame::fit(&pts, c * panel + 20.0, (r + 1.0) * panel, panel - 40.0);
        draw_tree(&mut out, &f, model, &rest, "#bbbbbb", 2.0);
        draw_tree(&mut out, &f, model, &bent, colour(k), 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12">mode {} {:.3} Hz</text>"#,
            c * panel + 10.0,
            r * panel + 16.0,
            k + 1,
            mode.frequency_hz
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Inferred parent links over node positions, with the connectivity graph
/// underneath when given.
pub fn tree_overlay(positions: &[Vec2], parent: &[Option<usize>], graph: Option<&ConnectivityGraph>) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    if positions.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let f = Frame::fit(positions, PAD, H - PAD, (H - 2.0 * PAD).min(W - 2.0 * PAD));
    if let Some(g) = graph {
        for (a, b) in g.edges() {
            segment(&mut out, &f, &positions[a], &positions[b], "#cccccc", 1.0);
        }
    }
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            segment(&mut out, &f, &positions[*p], &positions[i], "#d62728", 2.0);
        }
    }
    for (i, p) in positions.iter().enumerate() {
        let (x, y) = f.map(p);
        let fill = if parent[i].is_none() { "#2ca02c" } else { "#1f77b4" };
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}"/>"#);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10">{i}</text>"#, x + 5.0, y - 5.0);
    }
    out.push_str("</svg>\n");
    out
}
