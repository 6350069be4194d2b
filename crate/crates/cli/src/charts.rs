//! SVG line charts of the per-epoch training log.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use metricscope_core::diagnostics::{read_log_csv, EpochRecord};

use crate::error::{CliError, Result};

pub const SYMLOG_THRESHOLD: f64 = 1e-3;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// `sign(x)·log10(1 + |x|/θ)`; maps 0 to 0.
pub fn symlog(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x.signum() * (1.0 + x.abs() / SYMLOG_THRESHOLD).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Loss,
    ActiveRatio,
    GradNorm,
}

impl Series {
    pub const ALL: [Series; 3] = [Series::Loss, Series::ActiveRatio, Series::GradNorm];

    pub fn name(self) -> &'static str {
        match self {
            Series::Loss => "loss",
            Series::ActiveRatio => "active_ratio",
            Series::GradNorm => "grad_norm",
        }
    }

    fn value(self, r: &EpochRecord) -> f64 {
        match self {
            Series::Loss => r.loss,
            Series::ActiveRatio => r.active_ratio,
            Series::GradNorm => r.grad_norm,
        }
    }
}

/// Chart of `ys` against `xs`. Both axes are linear in the plotted values.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let (x_lo, x_hi) = padded_range(xs);
    let (y_lo, y_hi) = padded_range(ys);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // Axes.
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for (v, anchor) in [(x_lo, "start"), (x_hi, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            px(v),
            y0 + 16.0,
            tick(v)
        );
    }
    for v in [y_lo, (y_lo + y_hi) / 2.0, y_hi] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py(v) + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

/// Data range, widened when flat so the line sits mid-plot.
fn padded_range(vs: &[f64]) -> (f64, f64) {
    let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        (lo - pad, hi + pad)
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `loss.svg`, `active_ratio.svg` and `grad_norm.svg` into
/// `out_dir` (with a `.symlog` infix when `symlog` is set).
pub fn render_charts(log_csv: &Path, out_dir: &Path, symlog_scale: bool) -> Result<Vec<PathBuf>> {
    let records = read_log_csv(log_csv)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let xs: Vec<f64> = records.iter().map(|r| r.epoch as f64).collect();
    let mut written = Vec::new();
    for series in Series::ALL {
        let mut ys: Vec<f64> = records.iter().map(|r| series.value(r)).collect();
        let (file, y_label) = if symlog_scale {
            ys.iter_mut().for_each(|y| *y = symlog(*y));
            (
                format!("{}.symlog.svg", series.name()),
                format!("symlog({})", series.name()),
            )
        } else {
            (format!("{}.svg", series.name()), series.name().to_string())
        };
        let svg = line_chart(series.name(), "epoch", &y_label, &xs, &ys);
        let path = out_dir.join(file);
        fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_points(svg: &str) -> Vec<(f64, f64)> {
        let start = svg.find("points=\"").unwrap() + 8;
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end]
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn symlog_fixes_zero_and_keeps_sign() {
        assert_eq!(symlog(0.0), 0.0);
        assert_eq!(symlog(-0.0), 0.0);
        assert!((symlog(0.999) - 3.0).abs() < 1e-12);
        assert_eq!(symlog(-2.5), -symlog(2.5));
    }

    #[test]
    fn constant_series_is_horizontal() {
        let svg = line_chart("t", "epoch", "v", &[0.0, 1.0, 2.0, 3.0], &[0.7; 4]);
        let pts = polyline_points(&svg);
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.1 == pts[0].1));
    }

    #[test]
    fn chart_is_labeled() {
        let svg = line_chart("loss", "epoch", "loss", &[0.0, 1.0], &[2.0, 1.0]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"class="x-label""#) && svg.contains(">epoch</text>"));
        assert!(svg.contains(r#"class="y-label""#));
        let pts = polyline_points(&svg);
        assert!(pts[0].1 < pts[1].1, "higher values sit higher on the page");
    }
}
