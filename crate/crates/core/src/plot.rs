//! Static SVG line charts of harness CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::harness::{CsvRow, Metric};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Horizontal axis of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Iteration,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotOptions {
    pub metric: Metric,
    pub x_axis: XAxis,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Mse,
            x_axis: XAxis::Iteration,
        }
    }
}

/// One polyline per variant; the metric is drawn on a log10 scale.
pub fn render_svg(rows: &[CsvRow], opts: PlotOptions) -> String {
    let mut lines: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        let y = match opts.metric {
            Metric::Mse => r.mse_mean,
            Metric::RmseNorm => r.norm_mean,
        };
        if !(y > 0.0) {
            continue;
        }
        let x = match opts.x_axis {
            XAxis::Iteration => r.k as f64,
            XAxis::Bits => r.bits_cum as f64,
        };
        if !lines.contains_key(r.variant.as_str()) {
            order.push(&r.variant);
        }
        lines.entry(&r.variant).or_default().push((x, y.log10()));
    }

    let points = lines.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for e in (y0 as i32)..=(y1 as i32) {
        let y = sy(e as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"##,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            y + 4.0
        );
    }
    for t in 0..=4 {
        let x = x0 + (x1 - x0) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(x),
            HEIGHT - MARGIN + 18.0,
            format_tick(x)
        );
    }
    let x_label = match opts.x_axis {
        XAxis::Iteration => "iteration k",
        XAxis::Bits => "cumulative bits",
    };
    let y_label = match opts.metric {
        Metric::Mse => "mean ||x_k - x*||^2",
        Metric::RmseNorm => "mean ||x_k - x*||",
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (i, name) in order.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = lines[name]
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            WIDTH - MARGIN - 90.0,
            WIDTH - MARGIN - 84.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(x: f64) -> String {
    if x.abs() >= 1e5 {
        format!("{x:.1e}")
    } else {
        format!("{}", x.round() as i64)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, variant: &str, mse: f64) -> CsvRow {
        CsvRow {
            k,
            variant: variant.into(),
            mse_mean: mse,
            mse_std: 0.0,
            norm_mean: mse.sqrt(),
            bits_cum: 4 * k as u64,
            delta_k: 0.0,
        }
    }

    #[test]
    fn one_polyline_per_variant() {
        let rows = vec![row(0, "a", 1.0), row(1, "a", 0.1), row(0, "b<c", 2.0), row(1, "b<c", 0.0)];
        let svg = render_svg(&rows, PlotOptions::default());
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn empty_input_still_renders() {
        let svg = render_svg(&[], PlotOptions::default());
        assert_eq!(svg.matches("<polyline").count(), 0);
    }
}
