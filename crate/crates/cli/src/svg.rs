//! Minimal hand-written SVG: seed-averaged line charts with ±1 std bands
//! and per-method visitation heatmaps. Numbers are formatted with `{}` on
//! plain floats so output does not depend on locale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use curiosity_core::env::{FIRST_STOCHASTIC_COL, GRID_SIZE, NOISE_FLOOR};
use curiosity_core::harness::Band;
use curiosity_core::rewards::MethodSpec;

use crate::output::{CliError, LoadedRuns};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const FRACTION_SMOOTHING: usize = 10;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

pub fn write(path: &Path, svg: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, svg).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn num(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Series {
    label: String,
    color: &'static str,
    dashed: bool,
    band: Band,
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: Option<(f64, f64)>,
    series: Vec<Series>,
    guides: Vec<(f64, String)>,
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

impl Chart {
    fn render(&self) -> String {
        let (x0, x1) = self.x_range;
        let in_x = |s: usize| (s as f64) >= x0 && (s as f64) <= x1;
        let (y0, y1) = self.y_range.unwrap_or_else(|| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in &self.series {
                for (i, &step) in s.band.steps.iter().enumerate() {
                    let (m, d) = (s.band.mean[i], s.band.std[i]);
                    if in_x(step) && m.is_finite() {
                        lo = lo.min(m - d);
                        hi = hi.max(m + d);
                    }
                }
            }
            for (g, _) in &self.guides {
                lo = lo.min(*g);
                hi = hi.max(*g);
            }
            if !lo.is_finite() {
                (0.0, 1.0)
            } else {
                let pad = ((hi - lo) * 0.05).max(1e-3);
                (lo - pad, hi + pad)
            }
        });
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0).max(1e-12) * pw;
        let sy = |y: f64| TOP + ph - (y.clamp(y0, y1) - y0) / (y1 - y0).max(1e-12) * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            num(LEFT + pw / 2.0),
            escape(&self.title)
        );

        for t in ticks(y0, y1, 6) {
            let y = num(sy(t));
            let _ = writeln!(
                o,
                r##"<line x1="{LEFT}" x2="{}" y1="{y}" y2="{y}" stroke="#e0e0e0"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{}</text>"##,
                num(LEFT + pw),
                num(LEFT - 6.0),
                num(t)
            );
        }
        for t in ticks(x0, x1, 7) {
            let x = num(sx(t));
            let _ = writeln!(
                o,
                r##"<line x1="{x}" x2="{x}" y1="{TOP}" y2="{}" stroke="#e0e0e0"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"##,
                num(TOP + ph),
                num(TOP + ph + 16.0),
                t
            );
        }
        let _ = writeln!(
            o,
            r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            num(pw),
            num(ph)
        );
        let _ = writeln!(
            o,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(LEFT + pw / 2.0),
            num(HEIGHT - 10.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            num(TOP + ph / 2.0),
            escape(&self.y_label)
        );

        for (g, label) in &self.guides {
            let y = num(sy(*g));
            let _ = writeln!(
                o,
                r##"<line class="guide" data-value="{g}" x1="{LEFT}" x2="{}" y1="{y}" y2="{y}" stroke="#444" stroke-dasharray="6 4"/><text x="{}" y="{y}" dominant-baseline="middle" font-size="10">{}</text>"##,
                num(LEFT + pw),
                num(LEFT + pw + 4.0),
                escape(label)
            );
        }

        for s in &self.series {
            let pts: Vec<(f64, f64, f64)> = s
                .band
                .steps
                .iter()
                .enumerate()
                .filter(|(i, &st)| in_x(st) && s.band.mean[*i].is_finite())
                .map(|(i, &st)| (st as f64, s.band.mean[i], s.band.std[i]))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let upper: Vec<String> =
                pts.iter().map(|&(x, m, d)| format!("{},{}", num(sx(x)), num(sy(m + d)))).collect();
            let lower: Vec<String> =
                pts.iter().rev().map(|&(x, m, d)| format!("{},{}", num(sx(x)), num(sy(m - d)))).collect();
            let _ = writeln!(
                o,
                r#"<polygon class="band" points="{} {}" fill="{}" fill-opacity="0.15" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" "),
                s.color
            );
            let line: Vec<String> = pts.iter().map(|&(x, m, _)| format!("{},{}", num(sx(x)), num(sy(m)))).collect();
            let dash = if s.dashed { r#" stroke-dasharray="4 3""# } else { "" };
            let _ = writeln!(
                o,
                r#"<polyline class="mean" data-series="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                escape(&s.label),
                line.join(" "),
                s.color
            );
        }

        for (i, s) in self.series.iter().enumerate() {
            let y = TOP + 8.0 + 18.0 * i as f64;
            let x = LEFT + pw + 12.0;
            let dash = if s.dashed { r#" stroke-dasharray="4 3""# } else { "" };
            let _ = writeln!(
                o,
                r#"<line x1="{}" x2="{}" y1="{}" y2="{}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}" dominant-baseline="middle">{}</text>"#,
                num(x),
                num(x + 22.0),
                num(y),
                num(y),
                s.color,
                num(x + 28.0),
                num(y),
                escape(&s.label)
            );
        }
        o.push_str("</svg>\n");
        o
    }
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn full_range(runs: &LoadedRuns) -> (f64, f64) {
    let hi = runs
        .groups
        .iter()
        .flat_map(|(_, rs)| rs.iter().filter_map(|r| r.eval_curve.last().map(|p| p.step)))
        .max()
        .unwrap_or(1);
    (0.0, hi as f64)
}

pub fn error_chart(runs: &LoadedRuns, zoom: Option<(usize, usize)>) -> String {
    let series = runs
        .summaries()
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.error.map(|band| Series { label: s.method.name().into(), color: color(i), dashed: false, band })
        })
        .collect();
    let (x_range, title) = match zoom {
        Some((a, b)) => ((a as f64, b as f64), format!("Deterministic-cell error, steps {a}-{b}")),
        None => (full_range(runs), "Deterministic-cell error".to_string()),
    };
    Chart {
        title,
        x_label: "step".into(),
        y_label: "mean L2 error".into(),
        x_range,
        y_range: None,
        series,
        guides: vec![(NOISE_FLOOR, "noise floor".into())],
    }
    .render()
}

/// Trailing moving average over `k` points.
fn smooth(band: &Band, k: usize) -> Band {
    let avg = |xs: &[f64], i: usize| {
        let lo = (i + 1).saturating_sub(k);
        xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
    };
    Band {
        steps: band.steps.clone(),
        mean: (0..band.mean.len()).map(|i| avg(&band.mean, i).clamp(0.0, 1.0)).collect(),
        std: (0..band.std.len()).map(|i| avg(&band.std, i)).collect(),
    }
}

pub fn fraction_chart(runs: &LoadedRuns) -> String {
    let series = runs
        .summaries()
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.det_fraction.map(|band| Series {
                label: s.method.name().into(),
                color: color(i),
                dashed: false,
                band: smooth(&band, FRACTION_SMOOTHING),
            })
        })
        .collect();
    Chart {
        title: "Fraction of steps in the deterministic half".into(),
        x_label: "step".into(),
        y_label: "deterministic fraction".into(),
        x_range: full_range(runs),
        y_range: Some((0.0, 1.0)),
        series,
        guides: vec![(0.5, "uniform".into())],
    }
    .render()
}

/// `None` when no loaded method has a per-cell critic.
pub fn critic_chart(runs: &LoadedRuns) -> Option<String> {
    let mut series = Vec::new();
    for (i, s) in runs.summaries().into_iter().enumerate() {
        if let (Some(det), Some(stoch)) = (s.critic_det, s.critic_stoch) {
            series.push(Series {
                label: format!("{} det", s.method.name()),
                color: color(i),
                dashed: false,
                band: det,
            });
            series.push(Series {
                label: format!("{} stoch", s.method.name()),
                color: color(i),
                dashed: true,
                band: stoch,
            });
        }
    }
    if series.is_empty() {
        return None;
    }
    Some(
        Chart {
            title: "Critic estimate by region".into(),
            x_label: "step".into(),
            y_label: "mean estimate".into(),
            x_range: full_range(runs),
            y_range: None,
            series,
            guides: vec![(0.0, "0".into()), (NOISE_FLOOR, format!("{}", num(NOISE_FLOOR)))],
        }
        .render(),
    )
}

pub struct Panel {
    pub method: MethodSpec,
    pub seeds: usize,
    /// Seed-summed counts scaled so the busiest cell is 1.
    pub normalized: Vec<f64>,
    pub deterministic_mass: f64,
}

pub fn heatmap_panels(runs: &LoadedRuns, window: &str) -> Result<Vec<Panel>, CliError> {
    let mut panels = Vec::new();
    for (method, rs) in &runs.groups {
        let mut sum = vec![0u64; GRID_SIZE * GRID_SIZE];
        for r in rs {
            let w = r.visit_log.named_window(window).ok_or_else(|| {
                CliError::Input(format!("{} seed {} has no {window} visit histogram", method.name(), r.config.seed))
            })?;
            for (acc, &c) in sum.iter_mut().zip(&w.counts) {
                *acc += u64::from(c);
            }
        }
        let max = sum.iter().copied().max().unwrap_or(0).max(1) as f64;
        let total = sum.iter().sum::<u64>().max(1) as f64;
        let det: u64 =
            sum.iter().enumerate().filter(|(i, _)| i % GRID_SIZE < FIRST_STOCHASTIC_COL).map(|(_, &c)| c).sum();
        panels.push(Panel {
            method: *method,
            seeds: rs.len(),
            normalized: sum.iter().map(|&c| c as f64 / max).collect(),
            deterministic_mass: det as f64 / total,
        });
    }
    Ok(panels)
}

fn heat_color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - 0.1 * v)).round() as u8;
    let g = (255.0 * (1.0 - 0.75 * v)).round() as u8;
    let b = (255.0 * (1.0 - 0.95 * v)).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn heatmap(panels: &[Panel], window: &str) -> String {
    const CELL: f64 = 6.0;
    const GAP: f64 = 24.0;
    const COLS: usize = 3;
    let side = CELL * GRID_SIZE as f64;
    let rows = panels.len().div_ceil(COLS).max(1);
    let w = GAP + COLS as f64 * (side + GAP);
    let h = 40.0 + rows as f64 * (side + GAP + 20.0);

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Visitation, {} window</text>"#,
        num(w / 2.0),
        escape(window)
    );
    for (k, p) in panels.iter().enumerate() {
        let ox = GAP + (k % COLS) as f64 * (side + GAP);
        let oy = 40.0 + (k / COLS) as f64 * (side + GAP + 20.0);
        let _ = writeln!(
            o,
            r#"<g class="panel" data-method="{}" data-seeds="{}" transform="translate({} {})">"#,
            p.method.name(),
            p.seeds,
            num(ox),
            num(oy)
        );
        let _ = writeln!(
            o,
            r#"<text x="{}" y="-4" text-anchor="middle">{} (det {})</text>"#,
            num(side / 2.0),
            p.method.name(),
            num(p.deterministic_mass)
        );
        for (i, &v) in p.normalized.iter().enumerate() {
            let (row, col) = (i / GRID_SIZE, i % GRID_SIZE);
            let _ = writeln!(
                o,
                r#"<rect class="cell" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}" data-value="{v}"/>"#,
                num(col as f64 * CELL),
                num(row as f64 * CELL),
                heat_color(v)
            );
        }
        let bx = num(FIRST_STOCHASTIC_COL as f64 * CELL);
        let _ = writeln!(
            o,
            r#"<line class="boundary" x1="{bx}" x2="{bx}" y1="0" y2="{}" stroke="black" stroke-width="1.5"/>"#,
            num(side)
        );
        let _ = writeln!(o, r#"<rect width="{}" height="{}" fill="none" stroke="black"/></g>"#, num(side), num(side));
    }
    o.push_str("</svg>\n");
    o
}
