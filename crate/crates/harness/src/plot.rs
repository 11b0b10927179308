//! Static SVG line/scatter charts from harness CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{HarnessError, Result};
use crate::records::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    FVsP,
    DiffVsP,
    TraceStep,
    TraceTime,
    Rho,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::FVsP,
        PlotKind::DiffVsP,
        PlotKind::TraceStep,
        PlotKind::TraceTime,
        PlotKind::Rho,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::FVsP => "f_vs_p",
            PlotKind::DiffVsP => "diff_vs_p",
            PlotKind::TraceStep => "trace_step",
            PlotKind::TraceTime => "trace_time",
            PlotKind::Rho => "rho",
        }
    }
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Usage(format!("unknown plot kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn unit(column: &str) -> &'static str {
    match column {
        "p" => "sensors",
        "step" => "steps",
        "rho" => "fraction",
        c if c.ends_with("_ms") || c.ends_with("_ms_mean") => "ms",
        _ => "nats",
    }
}

fn axis_label(column: &str) -> String {
    format!("{column} ({})", unit(column))
}

fn value(cell: &str) -> f64 {
    cell.trim().parse().unwrap_or(f64::NAN)
}

/// Per x value: running sum of y and count.
type Accumulator = Vec<(f64, f64, usize)>;

/// Groups rows by the `group` column (first-appearance order) and averages the
/// finite `y` values at each distinct `x`.
fn grouped_means(table: &Table, path: &Path, group: &str, x: &str, y: &str) -> Result<Vec<Series>> {
    let (gi, xi, yi) = (table.column(group, path)?, table.column(x, path)?, table.column(y, path)?);
    let mut groups: Vec<(String, Accumulator)> = Vec::new();
    for row in &table.rows {
        let (xv, yv) = (value(&row[xi]), value(&row[yi]));
        if !xv.is_finite() || !yv.is_finite() {
            continue;
        }
        let pos = match groups.iter().position(|(g, _)| *g == row[gi]) {
            Some(pos) => pos,
            None => {
                groups.push((row[gi].clone(), Vec::new()));
                groups.len() - 1
            }
        };
        let acc = &mut groups[pos].1;
        match acc.iter_mut().find(|(ax, _, _)| *ax == xv) {
            Some(slot) => {
                slot.1 += yv;
                slot.2 += 1;
            }
            None => acc.push((xv, yv, 1)),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(label, mut acc)| {
            acc.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: format!("{label} {y}"),
                points: acc.into_iter().map(|(x, s, c)| (x, s / c as f64)).collect(),
            }
        })
        .collect())
}

fn raw_series(table: &Table, path: &Path, x: &str, y: &str) -> Result<Series> {
    let (xi, yi) = (table.column(x, path)?, table.column(y, path)?);
    let points = table
        .rows
        .iter()
        .map(|row| (value(&row[xi]), value(&row[yi])))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Series { label, points })
}

pub fn build_panels(kind: PlotKind, inputs: &[(PathBuf, Table)]) -> Result<Vec<Panel>> {
    let panel = |x: &str, y: &str, series| Panel {
        x_label: axis_label(x),
        y_label: axis_label(y),
        series,
    };
    let mut panels = Vec::new();
    match kind {
        PlotKind::FVsP | PlotKind::DiffVsP => {
            let mut series = Vec::new();
            for (path, table) in inputs {
                if kind == PlotKind::FVsP {
                    series.extend(grouped_means(table, path, "method", "p", "f")?);
                    series.extend(grouped_means(table, path, "method", "p", "f_org")?);
                } else {
                    let diff = grouped_means(table, path, "method", "p", "f_org_minus_greedy")?;
                    series.extend(diff.into_iter().filter(|s| !s.label.starts_with("greedy ")));
                }
            }
            let mut p = panel("p", "f_org_minus_greedy", series);
            if kind == PlotKind::FVsP {
                p.y_label = "f, f_org (nats)".into();
            }
            panels.push(p);
        }
        PlotKind::TraceStep | PlotKind::TraceTime => {
            let x = if kind == PlotKind::TraceStep { "step" } else { "elapsed_ms" };
            let series = inputs
                .iter()
                .map(|(path, table)| raw_series(table, path, x, "f"))
                .collect::<Result<_>>()?;
            panels.push(panel(x, "f", series));
        }
        PlotKind::Rho => {
            for y in ["f_mean", "wall_ms_mean"] {
                let series = inputs
                    .iter()
                    .map(|(path, table)| raw_series(table, path, "rho", y))
                    .collect::<Result<_>>()?;
                panels.push(panel("rho", y, series));
            }
        }
    }
    Ok(panels)
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    if v != 0.0 && (v.abs() >= 1e5 || step < 1e-4) {
        format!("{v:.2e}")
    } else {
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        format!("{v:.decimals$}")
    }
}

fn render_panel(svg: &mut String, panel: &Panel, top: f64) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (top + PANEL_HEIGHT - MARGIN_BOTTOM, top + MARGIN_TOP);
    let all = || panel.series.iter().flat_map(|s| s.points.iter());
    let (xmin, xmax) = padded_range(all().map(|p| p.0));
    let (ymin, ymax) = padded_range(all().map(|p| p.1));
    let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
    let sy = |y: f64| y0 - (y - ymin) / (ymax - ymin) * (y0 - y1);

    writeln!(svg, r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##, x1 - x0, y0 - y1).unwrap();
    for (axis, lo, hi) in [('x', xmin, xmax), ('y', ymin, ymax)] {
        let step = nice_step(hi - lo);
        let mut t = (lo / step).ceil() * step;
        while t <= hi {
            if axis == 'x' {
                let x = sx(t);
                writeln!(svg, r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, y0 + 5.0).unwrap();
                writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 20.0, tick_label(t, step)).unwrap();
            } else {
                let y = sy(t);
                writeln!(svg, r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#000"/>"##, x0 - 5.0).unwrap();
                writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, tick_label(t, step)).unwrap();
            }
            t += step;
        }
    }
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, y0 + 45.0, escape(&panel.x_label)).unwrap();
    let (lx, ly) = (25.0, (y0 + y1) / 2.0);
    writeln!(svg, r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#, escape(&panel.y_label)).unwrap();

    for (k, series) in panel.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if pts.len() > 1 {
            writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
        }
        for &(x, y) in &series.points {
            writeln!(svg, r#"<circle class="point" data-series="{k}" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
        }
        let ky = y1 + 10.0 + 18.0 * k as f64;
        writeln!(svg, r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/>"#, x1 + 15.0, ky - 10.0).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{ky:.2}">{}</text>"#, x1 + 32.0, escape(&series.label)).unwrap();
    }
}

pub fn render_svg(title: &str, panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(svg, r##"<rect width="100%" height="100%" fill="#fff"/>"##).unwrap();
    writeln!(svg, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, PANEL_HEIGHT * i as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads the CSVs and renders the chart for `kind`.
pub fn plot(kind: PlotKind, csvs: &[PathBuf]) -> Result<String> {
    if csvs.is_empty() {
        return Err(HarnessError::Usage("plot needs at least one --csv".into()));
    }
    if csvs.len() > 1 && matches!(kind, PlotKind::FVsP | PlotKind::DiffVsP) {
        log::info!("merging {} sweep files into one chart", csvs.len());
    }
    let inputs = csvs
        .iter()
        .map(|p| Table::read(p).map(|t| (p.clone(), t)))
        .collect::<Result<Vec<_>>>()?;
    let panels = build_panels(kind, &inputs)?;
    let names = || csvs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
    for panel in &panels {
        if panel.series.iter().all(|s| s.points.is_empty()) {
            return Err(HarnessError::EmptyData(names()));
        }
    }
    let panels: Vec<Panel> = panels
        .into_iter()
        .map(|mut p| {
            p.series.retain(|s| !s.points.is_empty());
            p
        })
        .collect();
    Ok(render_svg(kind.name(), &panels))
}
