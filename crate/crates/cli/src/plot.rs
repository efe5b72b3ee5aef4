//! Self-contained SVG convergence plots on log-log axes.

use std::fmt::Write as _;
use std::path::Path;

use dualavg::analysis::slope_estimate;

use crate::error::{io_err, HarnessError, Result};
use crate::table::ResultTable;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn panel_title(metric: &str) -> String {
    match metric {
        "psi_gap_avg" => "objective gap (normalized)".into(),
        "mahalanobis_avg" => "Mahalanobis error (normalized)".into(),
        m => m.replace('_', " "),
    }
}

/// Metrics shown side by side: objective gap then Mahalanobis error when
/// both exist, otherwise the first two metrics of the table.
fn panel_metrics(table: &ResultTable) -> Vec<String> {
    let all = table.metrics();
    let preferred = ["psi_gap_avg", "mahalanobis_avg"];
    if preferred.iter().all(|m| all.iter().any(|a| a == m)) {
        return preferred.iter().map(|s| s.to_string()).collect();
    }
    all.into_iter().take(2).collect()
}

struct Curve {
    label: String,
    color: &'static str,
    /// `(log10 n, log10 value)`.
    points: Vec<(f64, f64)>,
    slope: Option<f64>,
}

fn curves(table: &ResultTable, metric: &str) -> Vec<Curve> {
    table
        .series_keys()
        .into_iter()
        .enumerate()
        .filter_map(|(i, (algo, sched))| {
            let pts = table.series(&algo, &sched, metric);
            let base = pts.iter().find(|p| p.0 == 0).map(|p| p.1).filter(|b| *b > 0.0 && b.is_finite());
            let scaled: Vec<(u64, f64)> = pts
                .iter()
                .filter(|p| p.0 >= 1)
                .map(|&(n, y)| (n, base.map_or(y, |b| y / b)))
                .filter(|p| p.1 > 0.0 && p.1.is_finite())
                .collect();
            if scaled.is_empty() {
                return None;
            }
            let n_max = scaled.last().map_or(1, |p| p.0);
            let slope = slope_estimate(&scaled, (n_max / 10, n_max)).ok();
            Some(Curve {
                label: format!("{algo} {sched}"),
                color: PALETTE[i % PALETTE.len()],
                points: scaled.iter().map(|&(n, y)| ((n as f64).log10(), y.log10())).collect(),
                slope,
            })
        })
        .collect()
}

fn decade_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn draw_panel(svg: &mut String, x0: f64, metric: &str, curves: &[Curve]) {
    let (w, h) = (PANEL_W - MARGIN_L - 20.0, PANEL_H - MARGIN_T - MARGIN_B);
    let (ox, oy) = (x0 + MARGIN_L, MARGIN_T);
    let (xlo, xhi) = decade_range(curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)));
    let (ylo, yhi) = decade_range(curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)));
    let sx = |x: f64| ox + (x - xlo) / (xhi - xlo) * w;
    let sy = |y: f64| oy + (yhi - y) / (yhi - ylo) * h;

    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#, ox + w / 2.0, oy - 14.0, panel_title(metric));
    let _ = writeln!(svg, r#"<rect x="{ox:.1}" y="{oy:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="black"/>"#);
    let mut k = xlo;
    while k <= xhi {
        let x = sx(k);
        let _ = writeln!(svg, r##"<line x1="{x:.1}" y1="{oy:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, oy + h);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">10<tspan dy="-5" font-size="8">{k}</tspan></text>"#, oy + h + 16.0);
        k += 1.0;
    }
    let mut k = ylo;
    while k <= yhi {
        let y = sy(k);
        let _ = writeln!(svg, r##"<line x1="{ox:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, ox + w);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">10<tspan dy="-5" font-size="8">{k}</tspan></text>"#, ox - 6.0, y + 4.0);
        k += 1.0;
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">n</text>"#, ox + w / 2.0, oy + h + 36.0);

    for c in curves {
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, c.color, pts.join(" "));
    }
    for (i, c) in curves.iter().enumerate() {
        let y = oy + 16.0 + 15.0 * i as f64;
        let slope = c.slope.map(|s| format!(" (slope {s:.2})")).unwrap_or_default();
        let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/>"#, ox + 8.0, y - 4.0, ox + 26.0, y - 4.0, c.color);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{y:.1}" font-size="11">{}{slope}</text>"#, ox + 30.0, c.label);
    }
}

/// SVG document with one log-log panel per displayed metric.
pub fn render_svg(table: &ResultTable) -> Result<String> {
    let panels: Vec<(String, Vec<Curve>)> = panel_metrics(table)
        .into_iter()
        .map(|m| {
            let c = curves(table, &m);
            (m, c)
        })
        .filter(|(_, c)| !c.is_empty())
        .collect();
    if panels.is_empty() {
        return Err(HarnessError::EmptyPlot);
    }
    let width = PANEL_W * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, (metric, curves)) in panels.iter().enumerate() {
        draw_panel(&mut svg, PANEL_W * i as f64, metric, curves);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the convergence figure; nothing is written when there is no series.
pub fn emit_plot(table: &ResultTable, path: &Path) -> Result<()> {
    let svg = render_svg(table)?;
    std::fs::write(path, svg).map_err(io_err(path))
}
