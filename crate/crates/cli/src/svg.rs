//! Static SVG charts. Every plotted value also appears in a table.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end)
        .map(|k| (k as f64 * step * 1e9).round() / 1e9)
        .collect()
}

fn tick_label(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mark {
    Points,
    Line,
    LinePoints,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Vertical interval per point.
    pub bands: Option<Vec<(f64, f64)>>,
    pub mark: Mark,
    pub dashed: bool,
    pub color: usize,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, mark: Mark, color: usize) -> Self {
        Series {
            name: name.into(),
            points,
            bands: None,
            mark,
            dashed: false,
            color,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn with_bands(mut self, bands: Vec<(f64, f64)>) -> Self {
        self.bands = Some(bands);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Guide {
    Horizontal(f64),
    Vertical(f64),
    Diagonal,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        esc(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, y_ticks: bool) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let (y0, y1) = (f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in ticks(f.x.0, f.x.1) {
        let x = f.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(t)
        );
    }
    if y_ticks {
        for t in ticks(f.y.0, f.y.1) {
            let y = f.py(t);
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                y + 4.0,
                tick_label(t)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

fn guide(out: &mut String, f: &Frame, g: Guide) {
    let (x0, x1, y0, y1) = match g {
        Guide::Horizontal(y) if y >= f.y.0 && y <= f.y.1 => (f.x.0, f.x.1, y, y),
        Guide::Vertical(x) if x >= f.x.0 && x <= f.x.1 => (x, x, f.y.0, f.y.1),
        Guide::Diagonal => {
            let lo = f.x.0.max(f.y.0);
            let hi = f.x.1.min(f.y.1);
            if lo >= hi {
                return;
            }
            (lo, hi, lo, hi)
        }
        _ => return,
    };
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444" stroke-dasharray="6 4"/>"##,
        f.px(x0),
        f.py(y0),
        f.px(x1),
        f.py(y1)
    );
}

fn legend(out: &mut String, entries: &[(String, usize, bool)]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, (name, c, dashed)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 18.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 22.0,
            color(*c),
            x + 28.0,
            y + 4.0,
            esc(name)
        );
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

/// Numeric x/y chart.
#[derive(Debug, Clone)]
pub struct XyChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub guides: Vec<Guide>,
    /// Fixed axis ranges; inferred from the data when absent.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl XyChart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        XyChart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            guides: Vec::new(),
            x_range: None,
            y_range: None,
        }
    }

    fn extent(&self, pick: impl Fn(&(f64, f64)) -> f64, with_bands: bool) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.series {
            for p in &s.points {
                lo = lo.min(pick(p));
                hi = hi.max(pick(p));
            }
            if with_bands {
                for (a, b) in s.bands.iter().flatten() {
                    lo = lo.min(*a);
                    hi = hi.max(*b);
                }
            }
        }
        if lo.is_finite() {
            padded(lo, hi)
        } else {
            (0.0, 1.0)
        }
    }

    pub fn render(&self) -> String {
        let f = Frame {
            x: self.x_range.unwrap_or_else(|| self.extent(|p| p.0, false)),
            y: self.y_range.unwrap_or_else(|| self.extent(|p| p.1, true)),
        };
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, &self.x_label, &self.y_label, true);
        for g in &self.guides {
            guide(&mut out, &f, *g);
        }
        for s in &self.series {
            let c = color(s.color);
            if let Some(bands) = &s.bands {
                for ((x, _), (lo, hi)) in s.points.iter().zip(bands) {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-opacity="0.6"/>"#,
                        f.px(*x),
                        f.py(*lo),
                        f.px(*x),
                        f.py(*hi)
                    );
                }
            }
            if matches!(s.mark, Mark::Line | Mark::LinePoints) && s.points.len() > 1 {
                let path: Vec<String> = s
                    .points
                    .iter()
                    .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
                    .collect();
                let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"{dash}/>"#,
                    path.join(" ")
                );
            }
            if matches!(s.mark, Mark::Points | Mark::LinePoints) {
                for (x, y) in &s.points {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#,
                        f.px(*x),
                        f.py(*y)
                    );
                }
            }
        }
        let entries: Vec<(String, usize, bool)> = self
            .series
            .iter()
            .map(|s| (s.name.clone(), s.color, s.dashed))
            .collect();
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}

/// One labeled row of a dot-and-interval chart.
#[derive(Debug, Clone)]
pub struct DotRow {
    pub label: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub color: usize,
}

/// Horizontal dot chart with interval whiskers, one row per label.
pub fn dot_chart(title: &str, x_label: &str, rows: &[DotRow], guides: &[Guide]) -> String {
    let mut lo = rows.iter().map(|r| r.lo.min(r.value)).fold(f64::INFINITY, f64::min);
    let mut hi = rows.iter().map(|r| r.hi.max(r.value)).fold(f64::NEG_INFINITY, f64::max);
    for g in guides {
        if let Guide::Vertical(x) = g {
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let f = Frame {
        x: padded(lo, hi),
        y: (0.0, rows.len().max(1) as f64 + 1.0),
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, "", false);
    for g in guides {
        guide(&mut out, &f, *g);
    }
    for (i, r) in rows.iter().enumerate() {
        let y = f.py(rows.len() as f64 - i as f64);
        let c = color(r.color);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}" stroke-width="2"/><circle cx="{:.2}" cy="{y:.2}" r="4" fill="{c}"/>"#,
            f.px(r.lo),
            f.px(r.hi),
            f.px(r.value)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - RIGHT + 10.0,
            y + 4.0,
            esc(&r.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        assert_eq!(ticks(0.0, 50.0), vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0]);
    }

    #[test]
    fn charts_render_dashed_guides() {
        let mut c = XyChart::new("t", "x", "y");
        c.series.push(Series::new("a", vec![(0.0, 0.5), (1.0, 0.7)], Mark::LinePoints, 0).dashed());
        c.guides.push(Guide::Diagonal);
        let svg = c.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("stroke-dasharray"));
        let dots = dot_chart(
            "rho",
            "rho",
            &[DotRow {
                label: "a<b".into(),
                value: 0.4,
                lo: 0.3,
                hi: 0.5,
                color: 1,
            }],
            &[Guide::Vertical(1.0)],
        );
        assert!(dots.contains("a&lt;b") && dots.contains("stroke-dasharray"));
    }
}
