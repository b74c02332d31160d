//! CSV, JSON and SVG renderings of a sweep.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellResult, Solver, SweepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::Parse(format!("unknown output format {other:?}"))),
        }
    }
}

/// One CSV row: `solver,K,sigma_w,trials,successes,success_rate,ci_halfwidth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub solver: Solver,
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma_w: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_halfwidth: f64,
}

impl From<&CellResult> for CsvRecord {
    fn from(c: &CellResult) -> Self {
        Self {
            solver: c.solver,
            k: c.k,
            sigma_w: c.sigma_w,
            trials: c.trials,
            successes: c.successes,
            success_rate: c.success_rate,
            ci_halfwidth: c.ci_halfwidth,
        }
    }
}

const CSV_HEADER: [&str; 7] = [
    "solver",
    "K",
    "sigma_w",
    "trials",
    "successes",
    "success_rate",
    "ci_halfwidth",
];

pub fn to_csv(result: &SweepResult) -> Result<String> {
    // The header is written by hand so an empty grid still gets one.
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    wtr.write_record(CSV_HEADER)?;
    for cell in &result.cells {
        wtr.serialize(CsvRecord::from(cell))?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Success rate against `K`, one polyline per `(solver, σ_w)` series.
pub fn to_svg(result: &SweepResult) -> String {
    let (width, height) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 180.0, 40.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let mut series: Vec<(Solver, f64)> = Vec::new();
    for c in &result.cells {
        if !series.iter().any(|&(s, w)| s == c.solver && w == c.sigma_w) {
            series.push((c.solver, c.sigma_w));
        }
    }
    let k_min = result.cells.iter().map(|c| c.k).min().unwrap_or(1) as f64;
    let k_max = result.cells.iter().map(|c| c.k).max().unwrap_or(1) as f64;
    let span = (k_max - k_min).max(1.0);
    let px = |k: f64| left + (k - k_min) / span * plot_w;
    let py = |rate: f64| top + (1.0 - rate) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">Exact support recovery rate</text>"#,
        left + plot_w / 2.0
    );

    for i in 0..=5 {
        let rate = i as f64 / 5.0;
        let y = py(rate);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{rate:.1}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    let mut ks: Vec<usize> = result.cells.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        let x = px(k as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" text-anchor="middle">{k}</text>"#,
            top + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">block sparsity K</text>"#,
        left + plot_w / 2.0,
        height - 18.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">success rate</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (i, &(solver, sigma_w)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut cells: Vec<&CellResult> = result
            .cells
            .iter()
            .filter(|c| c.solver == solver && c.sigma_w == sigma_w)
            .collect();
        cells.sort_by_key(|c| c.k);
        let points: Vec<String> = cells
            .iter()
            .map(|c| format!("{:.2},{:.2}", px(c.k as f64), py(c.success_rate)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        for c in &cells {
            let (x, y) = (px(c.k as f64), py(c.success_rate));
            let (lo, hi) = (
                py((c.success_rate - c.ci_halfwidth).max(0.0)),
                py((c.success_rate + c.ci_halfwidth).min(1.0)),
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{color}"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
            );
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + plot_w + 16.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{} σw={sigma_w}</text>"#,
            lx + 30.0,
            ly + 4.0,
            solver.name().to_uppercase()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_results(
    result: &SweepResult,
    format: OutputFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv(result)?,
        OutputFormat::Json => to_json(result)?,
        OutputFormat::Svg => to_svg(result),
    };
    std::fs::write(path, text)?;
    Ok(())
}
