//! Bare-bones SVG output: scatter plots, grayscale heatmaps, line panels.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

const PALETTE: [&str; 8] = ["black", "red", "green", "blue", "magenta", "cyan", "orange", "gray"];

pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64, ox: f64) -> f64 {
        ox + PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64, oy: f64) -> f64 {
        oy + H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

pub struct Series {
    pub points: Vec<(f64, f64)>,
    /// Polyline when true, dots otherwise.
    pub line: bool,
    pub color: &'static str,
}

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame, ox: f64, oy: f64, title: &str) {
    let (x0, x1, y0, y1) = (f.px(f.x.0, ox), f.px(f.x.1, ox), f.py(f.y.0, oy), f.py(f.y.1, oy));
    let _ = writeln!(out, r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="12" font-family="sans-serif">{title}</text>"#, x0, y1 - 6.0);
    let _ = writeln!(out, r#"<text x="{x0:.1}" y="{:.1}" font-size="10" font-family="sans-serif">{:.3}</text>"#, y0 + 14.0, f.x.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" font-family="sans-serif" text-anchor="end">{:.3}</text>"#, x1, y0 + 14.0, f.x.1);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{y0:.1}" font-size="10" font-family="sans-serif" text-anchor="end">{:.3}</text>"#, x0 - 3.0, f.y.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" font-family="sans-serif" text-anchor="end">{:.3}</text>"#, x0 - 3.0, y1 + 8.0, f.y.1);
}

fn series(out: &mut String, f: &Frame, ox: f64, oy: f64, s: &Series) {
    let pts = s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite());
    if s.line {
        let path: Vec<String> = pts.map(|&(x, y)| format!("{:.2},{:.2}", f.px(x, ox), f.py(y, oy))).collect();
        if path.len() > 1 {
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#, s.color, path.join(" "));
        }
    } else {
        for &(x, y) in pts {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="0.6" fill="{}"/>"#, f.px(x, ox), f.py(y, oy), s.color);
        }
    }
}

/// Range of the finite values with a small margin; a flat range is widened.
pub fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

pub fn plot(frame: &Frame, title: &str, data: &[Series]) -> String {
    panels(&[(frame, title, data)])
}

/// Panels stacked vertically.
pub fn panels(list: &[(&Frame, &str, &[Series])]) -> String {
    let mut out = String::new();
    header(&mut out, W, H * list.len() as f64);
    for (i, (f, title, data)) in list.iter().enumerate() {
        let oy = H * i as f64;
        axes(&mut out, f, 0.0, oy, title);
        for s in data.iter() {
            series(&mut out, f, 0.0, oy, s);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale heatmap of `w[i * ny + j]` on the unit cells of `frame`, darker
/// for larger values, with overlays drawn on top.
pub fn heatmap(frame: &Frame, title: &str, nx: usize, ny: usize, w: &[f64], overlays: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let max = w.iter().cloned().fold(0.0, f64::max);
    let (dx, dy) = ((frame.x.1 - frame.x.0) / nx as f64, (frame.y.1 - frame.y.0) / ny as f64);
    let cw = (W - 2.0 * PAD) / nx as f64;
    let ch = (H - 2.0 * PAD) / ny as f64;
    for i in 0..nx {
        for j in 0..ny {
            let v = if max > 0.0 { w[i * ny + j] / max } else { 0.0 };
            if v < 1e-3 {
                continue;
            }
            let g = (255.0 * (1.0 - v)).round() as u8;
            let x = frame.px(frame.x.0 + dx * i as f64, 0.0);
            let y = frame.py(frame.y.0 + dy * (j + 1) as f64, 0.0);
            let _ = writeln!(out, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({g},{g},{g})"/>"#, cw + 0.05, ch + 0.05);
        }
    }
    axes(&mut out, frame, 0.0, 0.0, title);
    for s in overlays {
        series(&mut out, frame, 0.0, 0.0, s);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_closed() {
        let f = Frame { x: (0.0, 1.0), y: (-1.0, 1.0) };
        let s = Series { points: vec![(0.0, 0.0), (1.0, f64::NAN), (0.5, 0.5)], line: true, color: color(0) };
        let doc = plot(&f, "t", &[s]);
        assert!(doc.starts_with("<svg") && doc.trim_end().ends_with("</svg>"));
        assert!(!doc.contains("NaN"));
        let hm = heatmap(&f, "h", 2, 2, &[0.0, 1.0, 0.5, 0.25], &[]);
        assert_eq!(hm.matches("<rect").count(), 1 + 3 + 1);
    }

    #[test]
    fn range_handles_flat_and_empty() {
        assert_eq!(range(std::iter::empty()), (0.0, 1.0));
        let (a, b) = range([2.0, 2.0].into_iter());
        assert!(a < 2.0 && b > 2.0);
    }
}
