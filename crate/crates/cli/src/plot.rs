//! Minimal standalone SVG charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn name(self) -> &'static str {
        match self {
            Scale::Linear => "linear",
            Scale::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
    LineMarkers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric vertical error half-widths, one per point.
    pub yerr: Option<Vec<f64>>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self {
            label: label.into(),
            points,
            yerr: None,
            style,
        }
    }

    pub fn with_errors(mut self, yerr: Vec<f64>) -> Self {
        self.yerr = Some(yerr);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

/// Rendered document together with the number of points that could not be
/// drawn (non-positive values on a log axis, non-finite values).
pub struct Rendered {
    pub svg: String,
    pub dropped: usize,
}

struct Axis {
    scale: Scale,
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(scale: Scale, values: &[f64], from: f64, to: f64) -> Self {
        let t = |v: f64| if scale == Scale::Log { v.log10() } else { v };
        let mut lo = values.iter().map(|&v| t(v)).fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().map(|&v| t(v)).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 1e-12 { 0.1 * lo.abs() } else { 0.5 };
            lo -= pad;
            hi += pad;
        } else if scale == Scale::Linear {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        if scale == Scale::Log {
            lo = lo.floor().min(lo);
            hi = hi.ceil().max(hi);
        }
        Self {
            scale,
            lo,
            hi,
            from,
            to,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = if self.scale == Scale::Log { v.log10() } else { v };
        self.from + (t - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match self.scale {
            Scale::Log => {
                let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
                let stride = ((b - a) / 6 + 1).max(1);
                (a..=b)
                    .step_by(stride as usize)
                    .map(|e| (10f64.powi(e), format!("1e{e}")))
                    .collect()
            }
            Scale::Linear => {
                let step = nice_step((self.hi - self.lo) / 6.0);
                let first = (self.lo / step).ceil() as i64;
                let last = (self.hi / step).floor() as i64;
                let digits = (-step.log10().floor()).max(0.0) as usize;
                (first..=last)
                    .map(|k| {
                        let v = k as f64 * step;
                        (v, format!("{:.*}", digits, if v.abs() < step * 1e-9 { 0.0 } else { v }))
                    })
                    .collect()
            }
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn drawable(scale: Scale, v: f64) -> bool {
    v.is_finite() && (scale == Scale::Linear || v > 0.0)
}

impl Chart {
    pub fn render(&self) -> Rendered {
        let mut dropped = 0;
        let kept: Vec<Vec<(f64, f64, Option<f64>)>> = self
            .series
            .iter()
            .map(|s| {
                let mut out = Vec::with_capacity(s.points.len());
                for (i, &(x, y)) in s.points.iter().enumerate() {
                    if drawable(self.x_scale, x) && drawable(self.y_scale, y) {
                        out.push((x, y, s.yerr.as_ref().map(|e| e[i])));
                    } else {
                        dropped += 1;
                    }
                }
                out
            })
            .collect();

        let xs: Vec<f64> = kept.iter().flatten().map(|p| p.0).collect();
        let mut ys: Vec<f64> = Vec::new();
        for &(_, y, e) in kept.iter().flatten() {
            ys.push(y);
            if let Some(e) = e.filter(|e| e.is_finite()) {
                for v in [y - e, y + e] {
                    if drawable(self.y_scale, v) {
                        ys.push(v);
                    }
                }
            }
        }
        let x_axis = Axis::new(self.x_scale, &xs, LEFT, WIDTH - RIGHT);
        let y_axis = Axis::new(self.y_scale, &ys, HEIGHT - BOTTOM, TOP);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(&self.title)
        );
        self.axes(&mut svg, &x_axis, &y_axis);

        for (k, (series, points)) in self.series.iter().zip(&kept).enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            if matches!(series.style, Style::Line | Style::LineMarkers) && points.len() > 1 {
                let path: Vec<String> = points
                    .iter()
                    .map(|&(x, y, _)| format!("{:.2},{:.2}", x_axis.map(x), y_axis.map(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            for &(x, y, e) in points {
                let (px, py) = (x_axis.map(x), y_axis.map(y));
                if let Some(e) = e.filter(|e| e.is_finite() && *e > 0.0) {
                    let lo = if drawable(self.y_scale, y - e) { y_axis.map(y - e) } else { HEIGHT - BOTTOM };
                    let hi = y_axis.map(y + e);
                    let _ = writeln!(
                        svg,
                        r#"<path stroke="{color}" stroke-width="1" d="M{px:.2},{lo:.2}V{hi:.2}M{:.2},{lo:.2}h6M{:.2},{hi:.2}h6"/>"#,
                        px - 3.0,
                        px - 3.0
                    );
                }
                if matches!(series.style, Style::Markers | Style::LineMarkers) || points.len() == 1 {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
                    );
                }
            }
            let ly = TOP + 10.0 + 18.0 * k as f64;
            let lx = WIDTH - RIGHT + 14.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        svg.push_str("</svg>\n");
        Rendered { svg, dropped }
    }

    fn axes(&self, svg: &mut String, x: &Axis, y: &Axis) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for (v, label) in x.ticks() {
            let px = x.map(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#,
                y0 + 5.0,
                y0 + 18.0
            );
        }
        for (v, label) in y.ticks() {
            let py = y.map(v);
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{} ({} scale)</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label),
            self.x_scale.name()
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{} ({} scale)</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label),
            self.y_scale.name()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(series: Vec<Series>, y_scale: Scale) -> Chart {
        Chart {
            title: "t".into(),
            x_label: "q".into(),
            y_label: "h(q)".into(),
            x_scale: Scale::Linear,
            y_scale,
            series,
        }
    }

    #[test]
    fn error_bars_and_single_polyline() {
        let pts = vec![(-2.0, 0.7), (0.0, 0.6), (2.0, 0.5)];
        let s = Series::new("h", pts, Style::LineMarkers).with_errors(vec![0.01; 3]);
        let r = chart(vec![s], Scale::Linear).render();
        assert_eq!(r.dropped, 0);
        assert_eq!(r.svg.matches("<polyline").count(), 1);
        assert_eq!(r.svg.matches("<path").count(), 3);
        assert!(r.svg.contains("q (linear scale)"));
        assert!(r.svg.starts_with("<svg"));
    }

    #[test]
    fn log_axis_drops_non_positive() {
        let s = Series::new("dh", vec![(1.0, 0.0), (2.0, 0.1), (3.0, -0.2), (4.0, 0.3)], Style::Line);
        let r = chart(vec![s], Scale::Log).render();
        assert_eq!(r.dropped, 2);
        assert!(r.svg.contains("(log scale)"));
    }

    #[test]
    fn single_point_is_marked() {
        let s = Series::new("f", vec![(0.5, 1.0)], Style::Line);
        let r = chart(vec![s], Scale::Linear).render();
        assert_eq!(r.svg.matches("<circle").count(), 1);
        assert_eq!(r.svg.matches("<polyline").count(), 0);
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(0.13), 0.2);
        assert_eq!(nice_step(3.0), 5.0);
        assert_eq!(nice_step(70.0), 100.0);
    }
}
