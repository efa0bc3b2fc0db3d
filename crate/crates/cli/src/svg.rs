//! Minimal standalone SVG charts: axes with ticks, polylines, dots, legend.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Dots,
}

/// One labeled series; a line series may consist of several disjoint paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub mark: Mark,
    pub paths: Vec<Vec<(f64, f64)>>,
}

impl Series {
    pub fn line(
        label: impl Into<String>,
        color: impl Into<String>,
        paths: Vec<Vec<(f64, f64)>>,
    ) -> Self {
        Self {
            label: label.into(),
            color: color.into(),
            mark: Mark::Line,
            paths,
        }
    }

    pub fn dots(
        label: impl Into<String>,
        color: impl Into<String>,
        points: Vec<(f64, f64)>,
    ) -> Self {
        Self {
            label: label.into(),
            color: color.into(),
            mark: Mark::Dots,
            paths: vec![points],
        }
    }

    fn points(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.paths.iter().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
}

impl PlotStyle {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 720,
            height: 480,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SvgError {
    #[error("cannot render an empty dataset")]
    Empty,
}

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Tick positions at 1, 2 or 5 times a power of ten, about `target` of them.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
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

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Renders the series into a standalone SVG document. Output is a pure
/// function of the input.
pub fn render_svg(series: &[Series], style: &PlotStyle) -> Result<String, SvgError> {
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    for p in series.iter().flat_map(|s| s.points()).filter(finite) {
        bounds = Some(match bounds {
            None => (p.0, p.0, p.1, p.1),
            Some((x0, x1, y0, y1)) => (x0.min(p.0), x1.max(p.0), y0.min(p.1), y1.max(p.1)),
        });
    }
    let (x0, x1, y0, y1) = bounds.ok_or(SvgError::Empty)?;
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);

    let w = style.width as f64;
    let h = style.height as f64;
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(&style.title)
    );

    // frame and ticks
    let (left, right, top, bottom) = (
        MARGIN_LEFT,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP,
        MARGIN_TOP + plot_h,
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/>"#,
            left - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    if x0 < 0.0 && x1 > 0.0 {
        let x = sx(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="#bbbbbb"/>"##
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let y = sy(0.0);
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#bbbbbb"/>"##
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        h - 12.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(&style.y_label)
    );

    let _ = writeln!(
        out,
        r#"<clipPath id="plot"><rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}"/></clipPath>"#
    );
    let _ = writeln!(out, r#"<g clip-path="url(#plot)">"#);
    for s in series {
        match s.mark {
            Mark::Line => {
                for path in &s.paths {
                    let mut d = String::new();
                    let mut pen_down = false;
                    for &(x, y) in path {
                        if !(x.is_finite() && y.is_finite()) {
                            pen_down = false;
                            continue;
                        }
                        let _ = write!(
                            d,
                            "{}{:.2},{:.2} ",
                            if pen_down { "L" } else { "M" },
                            sx(x),
                            sy(y)
                        );
                        pen_down = true;
                    }
                    if !d.is_empty() {
                        let _ = writeln!(
                            out,
                            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                            d.trim_end(),
                            escape(&s.color)
                        );
                    }
                }
            }
            Mark::Dots => {
                for &(x, y) in s.points().filter(finite) {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                        sx(x),
                        sy(y),
                        escape(&s.color)
                    );
                }
            }
        }
    }
    let _ = writeln!(out, "</g>");

    for (i, s) in series.iter().enumerate() {
        let y = top + 12.0 + 18.0 * i as f64;
        let x = right + 12.0;
        match s.mark {
            Mark::Line => {
                let _ = writeln!(
                    out,
                    r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/>"#,
                    x + 20.0,
                    escape(&s.color)
                );
            }
            Mark::Dots => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
                    x + 10.0,
                    escape(&s.color)
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
