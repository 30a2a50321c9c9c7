//! Static SVG rendering of polytopes and result tables.
//!
//! The output is a pure function of the input: fixed canvas, fixed palette,
//! fixed number formatting, so identical inputs give identical bytes.

use std::fmt::Write;

use flexregion::geometry::Point;

pub const WIDTH: f64 = 720.0;
pub const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One labelled polyline of a table plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn around<'a>(points: impl Iterator<Item = &'a Point>, include_origin: bool) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if include_origin || !x0.is_finite() {
            x0 = x0.min(0.0);
            x1 = x1.max(0.0);
            y0 = y0.min(0.0);
            y1 = y1.max(0.0);
        }
        let (x0, x1) = padded(x0, x1);
        let (y0, y1) = padded(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span <= 1e-12 {
        let half = if lo.abs() > 1e-12 { lo.abs() * 0.5 } else { 1.0 };
        return (lo - half, hi + half);
    }
    (lo - 0.06 * span, hi + 0.06 * span)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.0 {
        2.0
    } else if r < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

/// Fixed-precision number with negative zero folded to zero.
fn num(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn coord(x: f64) -> String {
    num(x, 2)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn open(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    )
    .unwrap();
    writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        coord((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0),
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, zero_lines: bool) {
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    out.push_str("<g class=\"axes\" stroke=\"#000000\" stroke-width=\"1\">\n");
    writeln!(
        out,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/>"#,
        l = coord(left),
        r = coord(right),
        b = coord(bottom)
    )
    .unwrap();
    writeln!(out, r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/>"#, l = coord(left), t = coord(top), b = coord(bottom))
        .unwrap();
    let (xt, xd) = ticks(f.x0, f.x1);
    for x in &xt {
        let p = coord(f.px(*x));
        writeln!(out, r#"<line x1="{p}" y1="{}" x2="{p}" y2="{}"/>"#, coord(bottom), coord(bottom + 5.0)).unwrap();
    }
    let (yt, yd) = ticks(f.y0, f.y1);
    for y in &yt {
        let p = coord(f.py(*y));
        writeln!(out, r#"<line x1="{}" y1="{p}" x2="{}" y2="{p}"/>"#, coord(left - 5.0), coord(left)).unwrap();
    }
    out.push_str("</g>\n");
    if zero_lines {
        out.push_str("<g class=\"zero\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"4 3\">\n");
        if f.x0 < 0.0 && f.x1 > 0.0 {
            let p = coord(f.px(0.0));
            writeln!(out, r#"<line x1="{p}" y1="{}" x2="{p}" y2="{}"/>"#, coord(top), coord(bottom)).unwrap();
        }
        if f.y0 < 0.0 && f.y1 > 0.0 {
            let p = coord(f.py(0.0));
            writeln!(out, r#"<line x1="{}" y1="{p}" x2="{}" y2="{p}"/>"#, coord(left), coord(right)).unwrap();
        }
        out.push_str("</g>\n");
    }
    out.push_str("<g class=\"tick-labels\">\n");
    for x in &xt {
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            coord(f.px(*x)),
            coord(bottom + 18.0),
            num(*x, xd)
        )
        .unwrap();
    }
    for y in &yt {
        writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            coord(left - 8.0),
            coord(f.py(*y) + 4.0),
            num(*y, yd)
        )
        .unwrap();
    }
    out.push_str("</g>\n");
    writeln!(
        out,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        coord((left + right) / 2.0),
        coord(HEIGHT - 12.0),
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text class="axis-label" x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = coord((top + bottom) / 2.0)
    )
    .unwrap();
}

fn legend(out: &mut String, labels: &[&str]) {
    if labels.is_empty() {
        return;
    }
    out.push_str("<g class=\"legend\">\n");
    let x = WIDTH - MARGIN_RIGHT + 20.0;
    for (k, label) in labels.iter().enumerate() {
        let y = MARGIN_TOP + 20.0 * k as f64;
        writeln!(
            out,
            r#"<g class="legend-entry"><rect x="{}" y="{}" width="14" height="10" fill="{c}"/><text x="{}" y="{}">{}</text></g>"#,
            coord(x),
            coord(y),
            coord(x + 20.0),
            coord(y + 10.0),
            escape(label),
            c = PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
    out.push_str("</g>\n");
}

/// Overlay of (ΔP, ΔQ) polygons, each drawn as one closed path.
pub fn polytope_plot(title: &str, polygons: &[(String, Vec<Point>)]) -> String {
    let frame = Frame::around(polygons.iter().flat_map(|(_, v)| v.iter()), true);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, "ΔP [p.u.]", "ΔQ [p.u.]", true);
    for (k, (_, vertices)) in polygons.iter().enumerate() {
        let mut d = String::new();
        for (i, &(x, y)) in vertices.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{},{} ", coord(frame.px(x)), coord(frame.py(y))).unwrap();
        }
        d.push('Z');
        writeln!(
            out,
            r#"<path class="polytope" d="{d}" fill="{c}" fill-opacity="0.12" stroke="{c}" stroke-width="1.5"/>"#,
            c = PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
    let labels: Vec<&str> = polygons.iter().map(|(l, _)| l.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Line chart of table columns against a common abscissa.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::around(series.iter().flat_map(|s| s.points.iter()), false);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label, true);
    for (k, s) in series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{},{}", coord(frame.px(x)), coord(frame.py(y)))).collect();
        writeln!(
            out,
            r#"<polyline class="series" points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for &(x, y) in &s.points {
            writeln!(out, r#"<circle cx="{}" cy="{}" r="2.5" fill="{c}"/>"#, coord(frame.px(x)), coord(frame.py(y)))
                .unwrap();
        }
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
