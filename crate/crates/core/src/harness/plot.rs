//! Self-contained SVG line charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{read_index_summary, read_summary, IndexSummaryRow, SummaryRow};
use crate::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 58.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional `(x, lower, upper)` band drawn behind the line.
    pub band: Vec<(f64, f64, f64)>,
}

/// Round step of roughly `span / 5`.
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e5) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// Line chart of `series` with labelled axes; a legend is drawn when there is
/// more than one series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| {
        s.points
            .iter()
            .map(|p| p.1)
            .chain(s.band.iter().flat_map(|b| [b.1, b.2]))
    }));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // grid and ticks
    for (lo, hi, vertical) in [(x0, x1, true), (y0, y1, false)] {
        let step = nice_step(hi - lo);
        let mut v = (lo / step).ceil() * step;
        while v <= hi + step * 1e-9 {
            if vertical {
                let x = sx(v);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#eee"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                    TOP + ph,
                    TOP + ph + 16.0,
                    fmt_tick(v)
                );
            } else {
                let y = sy(v);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eee"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                    LEFT + pw,
                    LEFT - 6.0,
                    y + 4.0,
                    fmt_tick(v)
                );
            }
            v += step;
        }
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.band.is_empty() {
            let mut pts: Vec<String> = s.band.iter().map(|b| format!("{:.2},{:.2}", sx(b.0), sy(b.2))).collect();
            pts.extend(s.band.iter().rev().map(|b| format!("{:.2},{:.2}", sx(b.0), sy(b.1))));
            let _ = writeln!(
                svg,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }

    if series.len() > 1 {
        let _ = writeln!(svg, r#"<g class="legend">"#);
        for (i, s) in series.iter().enumerate() {
            let y = TOP + 14.0 + 18.0 * i as f64;
            let x = LEFT + 12.0;
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                svg,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
                x + 22.0,
                x + 28.0,
                y + 4.0,
                escape(&s.label)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Groups rows by a key, keeping first-appearance order.
fn grouped<T, K: PartialEq + Clone>(rows: &[T], key: impl Fn(&T) -> K) -> Vec<(K, Vec<&T>)> {
    let mut out: Vec<(K, Vec<&T>)> = Vec::new();
    for r in rows {
        let k = key(r);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => out.push((k, vec![r])),
        }
    }
    out
}

/// Mean cumulative regret against `t` with a one-standard-deviation band, one
/// series per algorithm.
pub fn regret_chart(rows: &[SummaryRow]) -> String {
    let series: Vec<Series> = grouped(rows, |r| r.algorithm.clone())
        .into_iter()
        .map(|(label, rs)| {
            let origin = std::iter::once((0.0, 0.0, 0.0));
            Series {
                label,
                points: std::iter::once((0.0, 0.0))
                    .chain(rs.iter().map(|r| (r.t as f64, r.mean_cum_regret)))
                    .collect(),
                band: origin
                    .chain(rs.iter().map(|r| {
                        (
                            r.t as f64,
                            r.mean_cum_regret - r.std_cum_regret,
                            r.mean_cum_regret + r.std_cum_regret,
                        )
                    }))
                    .collect(),
            }
        })
        .collect();
    line_chart("Cumulative regret", "t", "cumulative regret", &series)
}

/// Mean index error against the epoch, one series per arm (and algorithm).
pub fn index_error_chart(rows: &[IndexSummaryRow]) -> String {
    let many = grouped(rows, |r| r.algorithm.clone()).len() > 1;
    let mut sorted: Vec<&IndexSummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.algorithm, a.arm, a.epoch).cmp(&(&b.algorithm, b.arm, b.epoch)));
    let series: Vec<Series> = grouped(&sorted, |r| (r.algorithm.clone(), r.arm))
        .into_iter()
        .map(|((alg, arm), rs)| Series {
            label: if many {
                format!("{alg} arm {}", arm + 1)
            } else {
                format!("arm {}", arm + 1)
            },
            points: rs.iter().map(|r| (r.epoch as f64, r.mean_index_error)).collect(),
            band: Vec::new(),
        })
        .collect();
    line_chart("Index estimation error", "epoch", "mean |v_hat - v|", &series)
}

/// Renders `regret.svg` from a summary file, plus `index_error.svg` when an
/// `index_summary.csv` sits next to it.
pub fn emit_plots(summary: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_summary(summary)?;
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let regret = out.join("regret.svg");
    std::fs::write(&regret, regret_chart(&rows))?;
    written.push(regret);
    let sibling = summary.with_file_name("index_summary.csv");
    if sibling.exists() {
        let idx = read_index_summary(&sibling)?;
        if !idx.is_empty() {
            let path = out.join("index_error.svg");
            std::fs::write(&path, index_error_chart(&idx))?;
            written.push(path);
        }
    }
    Ok(written)
}
