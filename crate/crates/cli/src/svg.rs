//! Deterministic SVG 1.1 figures built from [`Artifacts`].
//!
//! Coordinates are absolute pixels printed with three decimals; the only
//! transform is a fixed half-pixel offset on the root group.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::artifacts::{ArmRow, ArtifactError, Artifacts, ObjectRow, QualityRow};

const ARM_FILL: &str = "#9ecae1";
const ARM_STROKE: &str = "#3182bd";
const OBJECT_FILL: &str = "#e6e6e6";
const CONTACT: &str = "#d62728";
const OVERLAY: &str = "#7b3294";
const MISSING: &str = "#d9d9d9";
const SERIES: &str = "#1f77b4";
const TARGET: &str = "#ff7f0e";
/// Depth above which the figure marks contact; the default quality tolerance.
const CONTACT_TOL: f64 = 1e-2;

const VIRIDIS: [(u8, u8, u8); 9] = [
    (0x44, 0x01, 0x54),
    (0x47, 0x2d, 0x7b),
    (0x3b, 0x52, 0x8b),
    (0x2c, 0x72, 0x8e),
    (0x21, 0x91, 0x8c),
    (0x28, 0xae, 0x80),
    (0x5e, 0xc9, 0x62),
    (0xad, 0xdc, 0x30),
    (0xfd, 0xe7, 0x25),
];

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct Doc {
    out: String,
}

impl Doc {
    fn new(width: f64, height: f64) -> Self {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
            w = num(width),
            h = num(height)
        );
        let _ =
            writeln!(out, "<rect x=\"0.000\" y=\"0.000\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>", num(width), num(height));
        out.push_str("<g transform=\"translate(0.500,0.500)\" font-family=\"sans-serif\" font-size=\"12\">\n");
        Doc { out }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</g>\n</svg>\n");
        self.out
    }

    fn points(pts: &[(f64, f64)]) -> String {
        pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect::<Vec<_>>().join(" ")
    }

    fn polyline(&mut self, class: &str, pts: &[(f64, f64)], stroke: &str, width: f64, dash: Option<&str>) {
        if pts.len() < 2 {
            return;
        }
        let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
        let _ = writeln!(
            self.out,
            "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{}\" stroke-linejoin=\"round\"{dash}/>",
            Self::points(pts),
            num(width)
        );
    }

    fn polygon(&mut self, class: &str, pts: &[(f64, f64)], fill: &str, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            "<polygon class=\"{class}\" points=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
            Self::points(pts),
            num(width)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"1.000\"/>",
            num(x),
            num(y),
            num(w),
            num(h)
        );
    }

    fn circle(&mut self, class: &str, c: (f64, f64), r: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\"/>",
            num(c.0),
            num(c.1),
            num(r)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(self.out, "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>", num(x), num(y), escape(s));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// World-to-pixel map with equal axis scales and y pointing up.
struct Frame {
    xmin: f64,
    ymax: f64,
    scale: f64,
    left: f64,
    top: f64,
}

impl Frame {
    fn fit(pts: impl Iterator<Item = (f64, f64)>, left: f64, top: f64, width: f64, height: f64) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x1 >= x0 && y1 >= y0) {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
        let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
        let scale = (width / (x1 - x0)).min(height / (y1 - y0));
        // center the content in the box
        let left = left + 0.5 * (width - scale * (x1 - x0));
        let top = top + 0.5 * (height - scale * (y1 - y0));
        Frame { xmin: x0, ymax: y1, scale, left, top }
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (self.left + (p.0 - self.xmin) * self.scale, self.top + (self.ymax - p.1) * self.scale)
    }
}

/// Line chart panel over `[x0, x1] x [y0, y1]`.
struct Panel {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn new(left: f64, top: f64, width: f64, height: f64, x: (f64, f64), values: impl Iterator<Item = f64>) -> Panel {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(hi >= lo) {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = 0.05 * (hi - lo).max(1e-6 * hi.abs().max(1.0));
        let x = if x.1 > x.0 { x } else { (x.0, x.0 + 1.0) };
        Panel { left, top, width, height, x, y: (lo - pad, hi + pad) }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width,
            self.top + (self.y.1 - y) / (self.y.1 - self.y.0) * self.height,
        )
    }

    fn axes(&self, doc: &mut Doc, title: &str, xlabel: &str) {
        doc.rect(self.left, self.top, self.width, self.height, "none", "#333333");
        doc.text(self.left, self.top - 8.0, "start", title);
        doc.text(self.left + self.width, self.top + self.height + 32.0, "end", xlabel);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (px, _) = self.map(xv, self.y.0);
            let (_, py) = self.map(self.x.0, yv);
            let bottom = self.top + self.height;
            doc.polyline("tick", &[(px, bottom), (px, bottom + 4.0)], "#333333", 1.0, None);
            doc.text(px, bottom + 16.0, "middle", &format!("{xv:.3}"));
            doc.polyline("tick", &[(self.left - 4.0, py), (self.left, py)], "#333333", 1.0, None);
            doc.text(self.left - 6.0, py + 4.0, "end", &format!("{yv:.3}"));
        }
    }

    /// Draws a series, breaking the line where values are missing.
    fn series(&self, doc: &mut Doc, class: &str, pts: &[(f64, Option<f64>)], stroke: &str, dash: Option<&str>) {
        let mut run = Vec::new();
        for &(x, y) in pts {
            match y {
                Some(y) => run.push(self.map(x, y)),
                None => {
                    doc.polyline(class, &run, stroke, 1.5, dash);
                    run.clear();
                }
            }
        }
        doc.polyline(class, &run, stroke, 1.5, dash);
    }
}

/// Boundary position at arclength `s_o`, interpolated along the samples.
fn object_point(object: &[ObjectRow], s_o: f64) -> (f64, f64) {
    let n = object.len();
    if n < 2 {
        return object.first().map_or((0.0, 0.0), |r| (r.x, r.y));
    }
    let h = object[1].s_o - object[0].s_o;
    if !(h > 0.0) {
        return (object[0].x, object[0].y);
    }
    let period = h * n as f64;
    let u = (s_o - object[0].s_o).rem_euclid(period) / h;
    let i = (u.floor() as usize).min(n - 1);
    let f = u - i as f64;
    let (a, b) = (&object[i], &object[(i + 1) % n]);
    (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
}

fn object_polygon(object: &[ObjectRow]) -> Vec<(f64, f64)> {
    object.iter().map(|r| (r.x, r.y)).collect()
}

fn arm_outline(arm: &[ArmRow]) -> Vec<(f64, f64)> {
    let side = |sign: f64| {
        arm.iter().map(move |r| {
            let (nx, ny) = (-r.theta.sin(), r.theta.cos());
            (r.x + sign * r.radius * nx, r.y + sign * r.radius * ny)
        })
    };
    let mut pts: Vec<(f64, f64)> = side(1.0).collect();
    let back: Vec<(f64, f64)> = side(-1.0).collect();
    pts.extend(back.into_iter().rev());
    pts
}

/// Arm, object and contact on the left; `rho` and `alpha` panels on the right.
pub fn profiles_figure(a: &Artifacts) -> Option<String> {
    let (traj, arm) = (a.trajectory.as_ref()?, a.arm.as_ref()?);
    let (w, h) = (960.0, 540.0);
    let mut doc = Doc::new(w, h);
    let outline = arm_outline(arm);
    let frame = Frame::fit(a.object.iter().map(|r| (r.x, r.y)).chain(outline.iter().copied()), 20.0, 30.0, 440.0, 490.0);
    let map = |pts: &[(f64, f64)]| pts.iter().map(|p| frame.map(*p)).collect::<Vec<_>>();
    doc.polygon("object", &map(&object_polygon(&a.object)), OBJECT_FILL, "#555555", 1.0);
    doc.polygon("arm", &map(&outline), ARM_FILL, ARM_STROKE, 1.0);
    let center: Vec<(f64, f64)> = arm.iter().map(|r| (r.x, r.y)).collect();
    doc.polyline("centerline", &map(&center), "#08519c", 1.0, None);
    let mut run: Vec<(f64, f64)> = Vec::new();
    for r in traj.iter() {
        if r.delta >= -CONTACT_TOL {
            run.push(frame.map(object_point(&a.object, r.s_o)));
        } else {
            doc.polyline("contact", &run, CONTACT, 3.0, None);
            run.clear();
        }
    }
    doc.polyline("contact", &run, CONTACT, 3.0, None);
    if let Some(b) = center.first() {
        doc.circle("base", frame.map(*b), 4.0, "#000000");
    }

    let s_range = (traj.first().map_or(0.0, |r| r.s), traj.last().map_or(1.0, |r| r.s));
    let reference = a.reference.as_deref().unwrap_or(&[]);
    let rho: Vec<(f64, Option<f64>)> = traj.iter().map(|r| (r.s, Some(r.rho))).collect();
    let rho_ref: Vec<(f64, Option<f64>)> = reference.iter().map(|r| (r.s, r.rho_ref)).collect();
    let alpha: Vec<(f64, Option<f64>)> = traj.iter().map(|r| (r.s, Some(r.alpha))).collect();
    let alpha_ref: Vec<(f64, Option<f64>)> = reference.iter().map(|r| (r.s, r.alpha_ref)).collect();
    let values = |a: &[(f64, Option<f64>)], b: &[(f64, Option<f64>)]| a.iter().chain(b).filter_map(|p| p.1).collect::<Vec<_>>();
    let p1 = Panel::new(560.0, 40.0, 370.0, 190.0, s_range, values(&rho, &rho_ref).into_iter());
    p1.axes(&mut doc, "rho (solid), reference (dashed)", "s");
    p1.series(&mut doc, "rho_ref", &rho_ref, TARGET, Some("6 4"));
    p1.series(&mut doc, "rho", &rho, SERIES, None);
    let p2 = Panel::new(560.0, 300.0, 370.0, 190.0, s_range, values(&alpha, &alpha_ref).into_iter());
    p2.axes(&mut doc, "alpha (solid), reference (dashed)", "s");
    p2.series(&mut doc, "alpha_ref", &alpha_ref, TARGET, Some("6 4"));
    p2.series(&mut doc, "alpha", &alpha, SERIES, None);
    Some(doc.finish())
}

/// Regular `(d, psi)` grid recovered from row-major quality rows.
struct Grid<'a> {
    distances: Vec<f64>,
    angles: Vec<f64>,
    rows: &'a [QualityRow],
}

fn grid(rows: &[QualityRow]) -> Result<Grid<'_>, ArtifactError> {
    let bad = |reason: &str| ArtifactError::Shape { file: crate::artifacts::QUALITY_MAP.into(), reason: reason.into() };
    let first = rows.first().ok_or_else(|| bad("no cells"))?;
    let n_psi = rows.iter().take_while(|r| r.d == first.d).count();
    if !rows.len().is_multiple_of(n_psi) {
        return Err(bad("row count is not a multiple of the angle count"));
    }
    let angles: Vec<f64> = rows[..n_psi].iter().map(|r| r.psi).collect();
    let mut distances = Vec::new();
    for block in rows.chunks(n_psi) {
        let d = block[0].d;
        if block.iter().zip(&angles).any(|(r, &psi)| r.d != d || r.psi != psi) {
            return Err(bad("cells do not form a regular (d, psi) grid"));
        }
        if distances.last().is_some_and(|&p| !(d > p)) {
            return Err(bad("distances must increase"));
        }
        distances.push(d);
    }
    Ok(Grid { distances, angles, rows })
}

/// Largest ray parameter where `c + t u` crosses the boundary polygon.
fn polygon_exit(poly: &[(f64, f64)], c: (f64, f64), u: (f64, f64)) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let e = (q.0 - p.0, q.1 - p.1);
        let den = u.0 * e.1 - u.1 * e.0;
        if den.abs() < 1e-300 {
            continue;
        }
        let w = (p.0 - c.0, p.1 - c.1);
        let t = (w.0 * e.1 - w.1 * e.0) / den;
        let m = (w.0 * u.1 - w.1 * u.0) / den;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&m) {
            best = best.max(t);
        }
    }
    best
}

/// One heatmap per metric, each normalized by its maximum over the map, with
/// the overlay arm dashed on top. Returns `(file name, svg)` pairs.
pub fn heatmaps(a: &Artifacts) -> Result<Vec<(String, String)>, ArtifactError> {
    let Some(rows) = a.quality.as_deref() else { return Ok(Vec::new()) };
    let g = grid(rows)?;
    let poly = object_polygon(&a.object);
    let n = poly.len().max(1) as f64;
    let c = poly.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / n, acc.1 + p.1 / n));
    let n_psi = g.angles.len();
    let dpsi = TAU / n_psi as f64;
    let dd = if g.distances.len() > 1 { g.distances[1] - g.distances[0] } else { 1.0 };
    const SUB: usize = 4;
    // ray exits at every sub-angle of every cell edge
    let edge_angles: Vec<f64> = (0..=n_psi * SUB).map(|j| g.angles[0] - 0.5 * dpsi + j as f64 * dpsi / SUB as f64).collect();
    let exits: Vec<f64> = edge_angles.iter().map(|&t| polygon_exit(&poly, c, (t.cos(), t.sin()))).collect();
    let at = |j: usize, d: f64| {
        let (t, r) = (edge_angles[j], exits[j] + d.max(0.0));
        (c.0 + r * t.cos(), c.1 + r * t.sin())
    };
    let outer = g.distances.last().copied().unwrap_or(0.0) + 0.5 * dd;
    let ring: Vec<(f64, f64)> = (0..edge_angles.len()).map(|j| at(j, outer)).collect();

    let mut out = Vec::new();
    for metric in ["Q1", "Q2", "Q3"] {
        let overlay = a.overlay_arms.iter().find(|(m, _)| m == metric).map(|(_, arm)| arm.as_slice());
        let (w, h) = (780.0, 660.0);
        let mut doc = Doc::new(w, h);
        let frame = Frame::fit(
            ring.iter().copied().chain(poly.iter().copied()).chain(overlay.unwrap_or(&[]).iter().map(|r| (r.x, r.y))),
            20.0,
            40.0,
            600.0,
            600.0,
        );
        let max = g.rows.iter().filter_map(|r| r.metric(metric)).fold(f64::NEG_INFINITY, f64::max);
        doc.text(20.0, 24.0, "start", &format!("{metric} normalized by its maximum {max:.6e}"));
        for (i, &d) in g.distances.iter().enumerate() {
            for k in 0..n_psi {
                let cell = &g.rows[i * n_psi + k];
                let fill = match cell.metric(metric) {
                    Some(v) if max > 0.0 => color(v / max),
                    _ => MISSING.to_string(),
                };
                let mut pts: Vec<(f64, f64)> = (k * SUB..=(k + 1) * SUB).map(|j| frame.map(at(j, d - 0.5 * dd))).collect();
                pts.extend((k * SUB..=(k + 1) * SUB).rev().map(|j| frame.map(at(j, d + 0.5 * dd))));
                doc.polygon("cell", &pts, &fill, &fill, 0.5);
            }
        }
        let obj: Vec<(f64, f64)> = poly.iter().map(|p| frame.map(*p)).collect();
        doc.polygon("object", &obj, OBJECT_FILL, "#555555", 1.0);
        if let Some(arm) = overlay {
            let pts: Vec<(f64, f64)> = arm.iter().map(|r| frame.map((r.x, r.y))).collect();
            doc.polyline("overlay", &pts, OVERLAY, 2.5, Some("8 5"));
            if let Some(b) = pts.first() {
                doc.circle("base", *b, 4.0, OVERLAY);
            }
        }
        if let Some(opt) = a.optimum.as_deref().and_then(|o| o.iter().find(|r| r.metric == metric)) {
            let value = match metric {
                "Q1" => opt.q1,
                "Q2" => opt.q2,
                _ => opt.q3,
            };
            doc.text(20.0, 650.0, "start", &format!("optimum {metric} = {value:.6e} at d = {:.4}, psi = {:.4}", opt.d, opt.psi));
        }
        // color bar
        let (bx, by, bw, bh) = (660.0, 80.0, 24.0, 480.0);
        const SLICES: usize = 64;
        for s in 0..SLICES {
            let t0 = s as f64 / SLICES as f64;
            let fill = color(t0 + 0.5 / SLICES as f64);
            let y = by + bh * (1.0 - t0 - 1.0 / SLICES as f64);
            doc.polygon(
                "bar",
                &[(bx, y), (bx + bw, y), (bx + bw, y + bh / SLICES as f64), (bx, y + bh / SLICES as f64)],
                &fill,
                &fill,
                0.5,
            );
        }
        doc.rect(bx, by, bw, bh, "none", "#333333");
        for (t, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
            doc.text(bx + bw + 6.0, by + bh * (1.0 - t) + 4.0, "start", label);
        }
        doc.rect(bx, by + bh + 20.0, bw, 14.0, MISSING, "#333333");
        doc.text(bx + bw + 6.0, by + bh + 32.0, "start", "missing");
        out.push((format!("quality_{metric}.svg"), doc.finish()));
    }
    Ok(out)
}

/// Every figure the artifacts support.
pub fn render(a: &Artifacts) -> Result<Vec<(String, String)>, ArtifactError> {
    let mut out = Vec::new();
    if let Some(svg) = profiles_figure(a) {
        let name = if a.cost.is_some() { "grasp.svg" } else { "feedback.svg" };
        out.push((name.to_string(), svg));
    }
    out.extend(heatmaps(a)?);
    Ok(out)
}
