//! Minimal SVG writer: axes, ticks, polylines, rectangles and a colour ramp.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

/// Categorical series colours.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// Anchors of the sequential ramp, dark to bright.
const RAMP: [(u8, u8, u8); 9] = [
    (68, 1, 84),
    (71, 44, 122),
    (59, 81, 139),
    (44, 113, 142),
    (33, 144, 141),
    (39, 173, 129),
    (92, 200, 99),
    (170, 220, 50),
    (253, 231, 37),
];

pub const RAMP_NAME: &str = "viridis-9";

/// Colour at position `t ∈ [0, 1]` of the ramp.
pub fn ramp_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

/// Escapes text for attribute values and element content.
pub fn escape(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}

/// Escapes element content; quotes are left as they are.
pub fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Short human-readable number for tick labels.
pub fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-2..1e4).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}").replace(".0e", "e")
    }
}

/// Maps data values on one axis to pixels.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub scale: AxisScale,
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    /// `lo`/`hi` are data values; a degenerate range is widened.
    pub fn new(scale: AxisScale, lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = match scale {
            AxisScale::Linear => (lo, hi),
            AxisScale::Log => (lo.log10(), hi.log10()),
        };
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Self {
            scale,
            lo,
            hi,
            px_lo,
            px_hi,
        }
    }

    fn transform(&self, v: f64) -> f64 {
        match self.scale {
            AxisScale::Linear => v,
            AxisScale::Log => v.log10(),
        }
    }

    pub fn map(&self, v: f64) -> f64 {
        let u = (self.transform(v) - self.lo) / (self.hi - self.lo);
        self.px_lo + u * (self.px_hi - self.px_lo)
    }

    /// Tick positions as data values.
    pub fn ticks(&self) -> Vec<f64> {
        match self.scale {
            AxisScale::Log if self.hi - self.lo >= 1.0 => {
                let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
                let span = (b - a).max(0) as usize + 1;
                let every = span.div_ceil(8).max(1) as i32;
                (a..=b).filter(|k| (k - a) % every == 0).map(|k| 10f64.powi(k)).collect()
            }
            AxisScale::Log => nice_ticks(self.lo, self.hi).into_iter().map(|e| 10f64.powf(e)).collect(),
            AxisScale::Linear => nice_ticks(self.lo, self.hi),
        }
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

pub struct Canvas {
    pub width: f64,
    pub height: f64,
    body: String,
    defs: String,
    metadata: Option<String>,
}

impl Canvas {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
            defs: String::new(),
            metadata: None,
        }
    }

    pub fn set_metadata(&mut self, json: String) {
        self.metadata = Some(json);
    }

    pub fn def(&mut self, s: &str) {
        self.defs.push_str(s);
        self.defs.push('\n');
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, content: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}"{extra}>{}</text>"#,
            escape(content)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, series: usize) {
        let mut pts = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{x:.2},{y:.2}");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline class="series" data-series="{series}" fill="none" stroke="{stroke}" stroke-width="1.5" points="{pts}"/>"#
        );
    }

    /// Frame plus ticks and labels for both axes.
    pub fn axes(&mut self, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
        let (l, r) = (x.px_lo, x.px_hi);
        let (b, t) = (y.px_lo, y.px_hi);
        let _ = writeln!(
            self.body,
            r##"<rect class="frame" x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
            r - l,
            b - t
        );
        for v in x.ticks() {
            let px = x.map(v);
            self.line(px, b, px, b + 4.0, "#333333");
            self.text(px, b + 16.0, "middle", 10.0, &fmt_tick(v), "");
        }
        for v in y.ticks() {
            let py = y.map(v);
            self.line(l - 4.0, py, l, py, "#333333");
            self.text(l - 6.0, py + 3.5, "end", 10.0, &fmt_tick(v), "");
        }
        self.text((l + r) / 2.0, b + 34.0, "middle", 12.0, x_label, "");
        let cy = (b + t) / 2.0;
        let cx = l - 52.0;
        self.text(cx, cy, "middle", 12.0, y_label, &format!(r#" transform="rotate(-90 {cx:.2} {cy:.2})""#));
    }

    pub fn finish(self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(out, "<title>{}</title>", escape(title));
        if let Some(m) = &self.metadata {
            let _ = writeln!(out, r#"<metadata id="steplab">{}</metadata>"#, escape_text(m));
        }
        if !self.defs.is_empty() {
            let _ = write!(out, "<defs>\n{}</defs>\n", self.defs);
        }
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        self.text_title(&mut out, title);
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }

    fn text_title(&self, out: &mut String, title: &str) {
        if !title.is_empty() {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
                self.width / 2.0,
                escape(title)
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_ends_and_monotone_luminance() {
        assert_eq!(ramp_color(0.0), "#440154");
        assert_eq!(ramp_color(1.0), "#fde725");
        assert_eq!(ramp_color(-3.0), ramp_color(0.0));
        let lum = |c: &str| {
            let p = |i: usize| u8::from_str_radix(&c[i..i + 2], 16).unwrap() as f64;
            0.2126 * p(1) + 0.7152 * p(3) + 0.0722 * p(5)
        };
        let mut prev = -1.0;
        for k in 0..=50 {
            let l = lum(&ramp_color(k as f64 / 50.0));
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn axis_mapping() {
        let a = Axis::new(AxisScale::Log, 1e-3, 1e3, 0.0, 600.0);
        assert!((a.map(1.0) - 300.0).abs() < 1e-9);
        assert_eq!(a.ticks().len(), 7);
        let b = Axis::new(AxisScale::Linear, 0.0, 1.0, 100.0, 0.0);
        assert!((b.map(0.25) - 75.0).abs() < 1e-9);
        assert_eq!(b.ticks().len(), 6);
        let flat = Axis::new(AxisScale::Linear, 2.0, 2.0, 0.0, 10.0);
        assert!((flat.map(2.0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn tick_labels() {
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(1e-5), "1e-5");
        assert_eq!(fmt_tick(100.0), "100");
        assert_eq!(escape("a<b&\"c\""), "a&lt;b&amp;&quot;c&quot;");
    }
}
