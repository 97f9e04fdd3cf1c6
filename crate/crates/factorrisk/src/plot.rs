//! Static SVG chart emission: line charts for net-value and drawdown
//! series, bar charts for decile bias reports. Output is deterministic —
//! fixed-precision coordinates, no timestamps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn fmt(x: f64) -> String {
    format!("{x:.2}")
}

fn axis_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    (0..=n).map(|i| lo + span * i as f64 / n as f64).collect()
}

/// Multi-series line chart over a shared x index (e.g. trading days).
pub fn line_chart(
    path: &Path,
    title: &str,
    x_labels: (&str, &str),
    series: &[(&str, &[f64])],
) -> std::io::Result<()> {
    assert!(!series.is_empty());
    let n = series[0].1.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s) in series {
        assert_eq!(s.len(), n);
        for v in *s {
            if v.is_finite() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
    }
    if !lo.is_finite() || hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = (hi - lo) * 0.05;
    let (lo, hi) = (lo - pad, hi + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_of = |i: usize| MARGIN_L + plot_w * i as f64 / (n.max(2) - 1) as f64;
    let y_of = |v: f64| MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="18" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );

    // Axes and horizontal grid.
    for v in axis_ticks(lo, hi, 5) {
        let y = fmt(y_of(v));
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            fmt(MARGIN_L),
            fmt(WIDTH - MARGIN_R)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end" dy="4">{}</text>"#,
            fmt(MARGIN_L - 6.0),
            format!("{v:.3}")
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = fmt(MARGIN_L),
        r = fmt(WIDTH - MARGIN_R),
        t = fmt(MARGIN_T),
        b = fmt(HEIGHT - MARGIN_B)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        x_labels.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        x_labels.1
    );

    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for (i, v) in values.iter().enumerate() {
            if v.is_finite() {
                let _ = write!(points, "{},{} ", fmt(x_of(i)), fmt(y_of(*v)));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = MARGIN_T + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{name}</text>"#,
            fmt(MARGIN_L + 10.0),
            fmt(ly - 2.0),
            fmt(MARGIN_L + 28.0),
            fmt(ly + 3.0)
        );
    }
    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg)
}

/// Bar chart with one bar per labelled value, plus an optional reference
/// line (e.g. the ideal bias statistic of 1).
pub fn bar_chart(
    path: &Path,
    title: &str,
    labels: &[String],
    values: &[f64],
    reference: Option<f64>,
) -> std::io::Result<()> {
    assert_eq!(labels.len(), values.len());
    let hi = values
        .iter()
        .copied()
        .chain(reference)
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.1;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let n = values.len().max(1);
    let step = plot_w / n as f64;
    let bar_w = step * 0.7;
    let y_of = |v: f64| MARGIN_T + plot_h * (1.0 - v / hi);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="18" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    for v in axis_ticks(0.0, hi, 5) {
        let y = fmt(y_of(v));
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            fmt(MARGIN_L),
            fmt(WIDTH - MARGIN_R)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end" dy="4">{}</text>"#,
            fmt(MARGIN_L - 6.0),
            format!("{v:.2}")
        );
    }
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let x = MARGIN_L + step * i as f64 + (step - bar_w) / 2.0;
        let y = y_of(*v);
        let h = HEIGHT - MARGIN_B - y_of(*v);
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#1f77b4"/>"##,
            fmt(x),
            fmt(y),
            fmt(bar_w),
            fmt(h)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#,
            fmt(x + bar_w / 2.0),
            fmt(HEIGHT - MARGIN_B + 16.0)
        );
    }
    if let Some(r) = reference {
        let y = fmt(y_of(r));
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#d62728" stroke-dasharray="6 4"/>"##,
            fmt(MARGIN_L),
            fmt(WIDTH - MARGIN_R)
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = fmt(MARGIN_L),
        r = fmt(WIDTH - MARGIN_R),
        t = fmt(MARGIN_T),
        b = fmt(HEIGHT - MARGIN_B)
    );
    let _ = writeln!(svg, "</svg>");
    fs::write(path, svg)
}
