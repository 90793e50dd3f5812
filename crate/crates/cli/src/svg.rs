//! Static SVG figures written as plain text.

use std::fmt::Write as _;

use effiq_core::stats::MonthStats;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Linear map from data ranges to the plot area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi - lo > 1e-12 {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn open(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            out,
            r#"<path d="M{x0},{y0} L{x0},{y1} L{x1},{y1}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
        for i in 0..=4 {
            let v = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let y = self.py(v);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
                x0 - 4.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                y + 4.0,
                tick(v)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Monthly mean prediction with a shaded `±z·σ` band and mean targets.
pub fn month_band_chart(title: &str, unit: &str, months: &[MonthStats], z: f64) -> String {
    let rows: Vec<(f64, f64, f64, f64)> = months
        .iter()
        .map(|m| {
            let sd = m.mean_var.unwrap_or(0.0).sqrt();
            (m.month as f64, m.mean_pred, z * sd, m.mean_target)
        })
        .collect();
    let lo = rows
        .iter()
        .map(|r| (r.1 - r.2).min(r.3))
        .fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|r| (r.1 + r.2).max(r.3))
        .fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(
        (0.5, 12.5),
        if rows.is_empty() {
            (0.0, 1.0)
        } else {
            (lo, hi)
        },
    );
    let mut out = String::new();
    frame.open(&mut out, title, "month", unit);
    for (i, name) in MONTHS.iter().enumerate() {
        let x = frame.px(i as f64 + 1.0);
        let y = H - BOTTOM;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{name}</text>"#,
            y + 18.0
        );
    }
    if !rows.is_empty() {
        let upper: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", frame.px(r.0), frame.py(r.1 + r.2)))
            .collect();
        let lower: Vec<String> = rows
            .iter()
            .rev()
            .map(|r| format!("{:.2},{:.2}", frame.px(r.0), frame.py(r.1 - r.2)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polygon points="{} {}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>"##,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", frame.px(r.0), frame.py(r.1)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
            line.join(" ")
        );
        for r in &rows {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
                frame.px(r.0),
                frame.py(r.3)
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" fill="#1f77b4">mean prediction ± {z:.2}σ</text>"##,
        LEFT + 10.0,
        TOP + 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">● mean target</text>"#,
        LEFT + 10.0,
        TOP + 28.0
    );
    out.push_str("</svg>\n");
    out
}

pub fn histogram(title: &str, xlabel: &str, values: &[f64], bins: usize) -> String {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if values.is_empty() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    };
    let width = ((hi - lo) / bins as f64).max(1e-9);
    let mut counts = vec![0usize; bins];
    for v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame::new((lo, lo + width * bins as f64), (0.0, top));
    let mut out = String::new();
    frame.open(&mut out, title, xlabel, "trips");
    for (i, &c) in counts.iter().enumerate() {
        let x0 = frame.px(lo + width * i as f64);
        let x1 = frame.px(lo + width * (i + 1) as f64);
        let y = frame.py(c as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            (x1 - x0).max(0.0),
            (H - BOTTOM - y).max(0.0)
        );
    }
    for i in 0..=4 {
        let v = lo + width * bins as f64 * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            frame.px(v),
            H - BOTTOM + 18.0,
            tick(v)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Points `(x, y, group)` colored by group, with optional group centers.
pub fn scatter(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[(f64, f64, usize)],
    centers: &[(f64, f64)],
) -> String {
    let xs = points
        .iter()
        .map(|p| p.0)
        .chain(centers.iter().map(|c| c.0));
    let ys = points
        .iter()
        .map(|p| p.1)
        .chain(centers.iter().map(|c| c.1));
    let range = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        })
    };
    let (mut xr, mut yr) = (range(&mut xs.clone()), range(&mut ys.clone()));
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    let frame = Frame::new(xr, yr);
    let mut out = String::new();
    frame.open(&mut out, title, xlabel, ylabel);
    for &(x, y, g) in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.6"/>"#,
            frame.px(x),
            frame.py(y),
            PALETTE[g % PALETTE.len()]
        );
    }
    for (i, &(x, y)) in centers.iter().enumerate() {
        let (cx, cy) = (frame.px(x), frame.py(y));
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="6" fill="none" stroke="black" stroke-width="2"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{i}</text>"#,
            cx + 8.0,
            cy - 6.0
        );
    }
    out.push_str("</svg>\n");
    out
}
