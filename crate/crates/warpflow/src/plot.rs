//! Minimal SVG time-series plots: polylines over a framed box with tick labels.

use std::fmt::Write;

use warpflow_core::GeoSummary;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) =
        vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo <= 1e-12 * lo.abs().max(1e-300) {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn label(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `series` against a shared x axis. Non-finite samples break the line.
pub fn time_series(title: &str, x_label: &str, series: &[Series<'_>]) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let xs = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let ys = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let (Some((x0, x1)), Some((y0, y1))) = (xs, ys) else {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">no finite data</text>"#,
            W / 2.0,
            H / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    };
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
            px(x),
            TOP + ph,
            TOP + ph + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            px(x),
            TOP + ph + 18.0,
            label(x)
        );
        let _ = writeln!(svg, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#, LEFT - 5.0, py(y), LEFT);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            LEFT - 8.0,
            py(y) + 4.0,
            label(y)
        );
    }

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for run in s.points.split(|p| !(p.0.is_finite() && p.1.is_finite())) {
            if run.is_empty() {
                continue;
            }
            let pts: Vec<String> = run.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        if series.len() > 1 {
            let y = TOP + 14.0 + 14.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<line x1="{0}" y1="{y}" x2="{1}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
                LEFT + pw - 120.0,
                LEFT + pw - 100.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                LEFT + pw - 95.0,
                y + 4.0,
                escape(s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// The standard set of run plots as `(file name, svg)`.
pub fn run_plots(summaries: &[GeoSummary]) -> Vec<(String, String)> {
    let t: Vec<f64> = summaries.iter().map(|s| s.time).collect();
    let one = |name: &str, f: &dyn Fn(&GeoSummary) -> f64| {
        let pts = t.iter().zip(summaries).map(|(&x, s)| (x, f(s))).collect();
        (format!("{name}.svg"), time_series(name, "simulation time", &[Series { label: name, points: pts }]))
    };
    let mut out = vec![
        one("ell", &|s| s.ell),
        one("h", &|s| s.h),
        one("area", &|s| s.area),
        one("d", &|s| s.d),
        one("girth_est", &|s| s.girth_est),
        one("lambda_hat", &|s| s.lambda_hat),
    ];
    for (file, title, labels, pick) in [
        (
            "margins",
            "ordering margins",
            ["K_top - K_2", "K_2 - K_1", "K_1 - L", "L"],
            (|s: &GeoSummary| s.ordering_margins) as fn(&GeoSummary) -> [f64; 4],
        ),
        ("gradient_margins", "gradient margins", ["(K_top)_s", "(K_1)_s", "(K_2)_s", "L_s"], |s| s.gradient_margins),
    ] {
        let series: Vec<Series<'_>> = (0..4)
            .map(|k| Series {
                label: labels[k],
                points: t.iter().zip(summaries).map(|(&x, s)| (x, pick(s)[k])).collect(),
            })
            .collect();
        out.push((format!("{file}.svg"), time_series(title, "simulation time", &series)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polylines_break_at_gaps() {
        let pts = vec![(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN), (3.0, 1.0), (4.0, 0.0)];
        let svg = time_series("x < y", "t", &[Series { label: "a", points: pts }]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("x &lt; y"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn empty_data_still_renders() {
        let svg = time_series("empty", "t", &[Series { label: "a", points: vec![(0.0, f64::NAN)] }]);
        assert!(svg.contains("no finite data"));
    }
}
