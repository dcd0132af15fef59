//! Static SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    /// Empty labels stay out of the legend.
    pub label: String,
    /// Series sharing a group share a colour.
    pub group: usize,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Horizontal reference lines `(y, label)`.
    pub levels: Vec<(f64, String)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let map = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(map)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = 0.04 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v > 0.0 {
                v.log10()
            } else {
                return None;
            }
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    /// Tick positions in data units, with labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let step = ((b - a) / 6 + 1).max(1);
            return (a..=b).step_by(step as usize).map(|e| (10f64.powi(e), format!("1e{e}"))).collect();
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|i| {
                let v = i as f64 * step;
                (v, format!("{}", (v / step).round() * step).trim_end_matches(".0").to_string())
            })
            .map(|(v, s)| (v, if s.len() > 9 { format!("{v:.3e}") } else { s }))
            .collect()
    }
}

impl Plot {
    /// Render as a standalone SVG document; `description` is embedded verbatim (escaped) in `<desc>`.
    pub fn render(&self, description: &str) -> String {
        let xs = Axis::fit(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), self.log_x);
        let ys = Axis::fit(
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(self.levels.iter().map(|l| l.0)),
            self.log_y,
        );
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let px = |x: f64| xs.frac(x).map(|f| LEFT + f * pw);
        let py = |y: f64| ys.frac(y).map(|f| TOP + (1.0 - f) * ph);

        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(out, "<desc>{}</desc>", escape(description));
        let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

        for (v, label) in xs.ticks() {
            if let Some(x) = px(v) {
                let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
                let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 20.0, escape(&label));
            }
        }
        for (v, label) in ys.ticks() {
            if let Some(y) = py(v) {
                let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
                let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, escape(&label));
            }
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, TOP - 14.0, escape(&self.title));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (y, label) in &self.levels {
            if let Some(y) = py(*y) {
                let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#555" stroke-dasharray="6 4"/>"##, LEFT + pw);
                let _ = writeln!(out, r##"<text x="{}" y="{:.2}" text-anchor="end" fill="#555">{}</text>"##, LEFT + pw - 4.0, y - 4.0, escape(label));
            }
        }
        let legend: Vec<&Series> = self.series.iter().filter(|s| !s.label.is_empty()).collect();
        for s in &self.series {
            let color = PALETTE[s.group % PALETTE.len()];
            let pts: Vec<(f64, f64)> = s.points.iter().filter_map(|&(x, y)| Some((px(x)?, py(y)?))).collect();
            match s.style {
                Style::Line => {
                    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
                }
                Style::Markers => {
                    for (x, y) in &pts {
                        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
                    }
                }
            }
        }
        if !legend.is_empty() {
            let width = 40.0 + 8.0 * legend.iter().map(|s| s.label.chars().count()).max().unwrap_or(0) as f64;
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{width}" height="{}" fill="white" fill-opacity="0.85" stroke="#999"/>"##,
                LEFT + 6.0,
                TOP + 4.0,
                16.0 * legend.len() as f64 + 6.0
            );
        }
        for (i, s) in legend.iter().enumerate() {
            let color = PALETTE[s.group % PALETTE.len()];
            let ly = TOP + 20.0 + 16.0 * i as f64;
            let _ = writeln!(out, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#, LEFT + 12.0, ly - 5.0);
            let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, LEFT + 30.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\">"), "a&lt;b &amp; &quot;c&quot;&gt;");
    }

    #[test]
    fn linear_ticks_cover_range() {
        let axis = Axis { lo: -0.3, hi: 2.7, log: false };
        let ticks = axis.ticks();
        assert!(ticks.len() >= 3);
        assert!(ticks.iter().all(|(v, _)| *v >= -0.3 && *v <= 2.7));
        assert_eq!(ticks[1].1, "0.5");
    }

    #[test]
    fn log_axis_drops_nonpositive_points() {
        let plot = Plot {
            log_y: true,
            series: vec![Series { label: "e".into(), group: 0, points: vec![(1.0, 0.0), (2.0, 1e-3)], style: Style::Markers }],
            ..Default::default()
        };
        assert_eq!(plot.render("").matches("<circle").count(), 1);
    }
}
