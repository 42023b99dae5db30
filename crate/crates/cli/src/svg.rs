//! Small self-contained SVG charts. Every mark carries its data
//! coordinates in `data-x` / `data-y` attributes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Linear map from a data range onto a pixel range.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub from: f64,
    pub to: f64,
    pub log: bool,
}

impl Axis {
    fn new(lo: f64, hi: f64, from: f64, to: f64, log: bool) -> Self {
        let (mut lo, mut hi) = if log {
            (lo.log10(), hi.log10())
        } else {
            (lo, hi)
        };
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-300 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
            lo -= pad;
            hi += pad;
        }
        Self {
            lo,
            hi,
            from,
            to,
            log,
        }
    }

    pub fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / (count - 1) as f64;
                if self.log {
                    10f64.powf(t)
                } else {
                    t
                }
            })
            .collect()
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(body, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            body,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        Self { body }
    }

    fn frame(&mut self) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
    }

    fn x_axis(&mut self, axis: &Axis, label: &str) {
        for t in axis.ticks(5) {
            let px = axis.map(t);
            let y = HEIGHT - BOTTOM;
            let _ = writeln!(
                self.body,
                r#"<line x1="{px:.2}" y1="{y:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y + 5.0,
                y + 20.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            self.body,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 15.0,
            escape(label)
        );
    }

    fn y_axis(&mut self, axis: &Axis, label: &str, right: bool, color: &str) {
        let x = if right { WIDTH - RIGHT } else { LEFT };
        let (dx, anchor) = if right { (8.0, "start") } else { (-8.0, "end") };
        for t in axis.ticks(5) {
            let py = axis.map(t);
            let _ = writeln!(
                self.body,
                r#"<line x1="{x:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="{anchor}" fill="{color}">{}</text>"#,
                x + dx / 2.0,
                x + dx,
                py + 4.0,
                tick_label(t)
            );
        }
        let lx = if right { WIDTH - 12.0 } else { 14.0 };
        let ly = (TOP + HEIGHT - BOTTOM) / 2.0;
        let _ = writeln!(
            self.body,
            r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" fill="{color}" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
            escape(label)
        );
    }

    fn line(&mut self, s: &Series, x: &Axis, y: &Axis, color: &str, markers: bool) {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", x.map(a), y.map(b)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(s.name),
            pts.join(" ")
        );
        if markers {
            self.markers(s, x, y, color);
        }
    }

    fn markers(&mut self, s: &Series, x: &Axis, y: &Axis, color: &str) {
        for &(a, b) in s
            .points
            .iter()
            .filter(|(a, b)| a.is_finite() && b.is_finite())
        {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" data-series="{}" data-x="{a}" data-y="{b}"/>"#,
                x.map(a),
                y.map(b),
                escape(s.name)
            );
        }
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (name, color)) in entries.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * i as f64;
            let x = LEFT + 12.0;
            let _ = writeln!(
                self.body,
                r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
                y - 9.0,
                x + 16.0,
                escape(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn plot_x(lo: f64, hi: f64, log: bool, reversed: bool) -> Axis {
    let (from, to) = if reversed {
        (WIDTH - RIGHT, LEFT)
    } else {
        (LEFT, WIDTH - RIGHT)
    };
    Axis::new(lo, hi, from, to, log)
}

fn plot_y(lo: f64, hi: f64) -> Axis {
    Axis::new(lo, hi, HEIGHT - BOTTOM, TOP, false)
}

/// Estimated against simulated variance, with the y = x reference line.
pub fn identity_scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let (lo, hi) = range(points.iter().flat_map(|&(a, b)| [a, b]));
    let (lo, hi) = if lo.is_finite() {
        (lo.min(0.0), hi)
    } else {
        (0.0, 1.0)
    };
    let x = plot_x(lo, hi, false, false);
    let y = plot_y(lo, hi);
    let mut c = Canvas::new(title);
    c.frame();
    c.x_axis(&x, xlabel);
    c.y_axis(&y, ylabel, false, "black");
    let diag = Series {
        name: "y = x",
        points: vec![(lo, lo), (hi, hi)],
    };
    c.line(&diag, &x, &y, "#888888", false);
    let s = Series {
        name: "points",
        points: points.to_vec(),
    };
    c.markers(&s, &x, &y, PALETTE[0]);
    c.finish()
}

/// Two series sharing an x axis, each against its own y axis.
pub fn dual_axis(title: &str, xlabel: &str, left: &Series, right: &Series, log_x: bool) -> String {
    let (xlo, xhi) = range(left.points.iter().chain(&right.points).map(|p| p.0));
    let x = plot_x(xlo, xhi, log_x, false);
    let (llo, lhi) = range(left.points.iter().map(|p| p.1));
    let (rlo, rhi) = range(right.points.iter().map(|p| p.1));
    let yl = plot_y(llo, lhi);
    let yr = plot_y(rlo, rhi);
    let mut c = Canvas::new(title);
    c.frame();
    c.x_axis(&x, xlabel);
    c.y_axis(&yl, left.name, false, PALETTE[0]);
    c.y_axis(&yr, right.name, true, PALETTE[1]);
    c.line(left, &x, &yl, PALETTE[0], true);
    c.line(right, &x, &yr, PALETTE[1], true);
    c.legend(&[(left.name, PALETTE[0]), (right.name, PALETTE[1])]);
    c.finish()
}

/// Several series on shared axes; `reverse_x` draws the x axis high to low.
pub fn lines(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    reverse_x: bool,
) -> String {
    let (xlo, xhi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (ylo, yhi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let x = plot_x(xlo, xhi, false, reverse_x);
    let y = plot_y(ylo, yhi);
    let mut c = Canvas::new(title);
    c.frame();
    c.x_axis(&x, xlabel);
    c.y_axis(&y, ylabel, false, "black");
    let mut legend = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        c.line(s, &x, &y, color, true);
        legend.push((s.name, color));
    }
    c.legend(&legend);
    c.finish()
}
