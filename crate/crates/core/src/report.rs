//! Deterministic result renderers: CSV, JSON, plot-data files keyed by
//! figure id, and human-readable summary tables.
//!
//! CSV carries full-precision numbers so a parse-back reproduces every
//! cell exactly; the human-facing tables and plot data round to six
//! significant digits.

use std::collections::BTreeMap;

use crate::arch::ParamAxis;
use crate::dse::{ParamClassification, SetupComparison, SweepResult};
use crate::error::DseError;

pub const CSV_HEADER: &str = "axis,value,workload,cycles,slowdown";
const NA: &str = "NA";

/// Long-form CSV: one row per (point, workload) cell, ordered by
/// (axis, numeric value, workload). Flagged cells render as `NA`.
pub fn emit_csv(result: &SweepResult) -> String {
    let mut rows: Vec<(String, Vec<u64>, String, String)> = Vec::new();
    for entry in &result.entries {
        let axis = entry.point.axis_desc();
        let values = entry.point.values();
        let value_desc = entry.point.value_desc();
        for (workload, cell) in &entry.cells {
            let cycles = cell
                .cycles
                .map_or_else(|| NA.to_string(), |c| c.to_string());
            let slowdown = cell
                .slowdown
                .map_or_else(|| NA.to_string(), |s| s.to_string());
            rows.push((
                axis.clone(),
                values.clone(),
                workload.clone(),
                format!("{axis},{value_desc},{workload},{cycles},{slowdown}"),
            ));
        }
    }
    rows.sort_by(|a, b| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (_, _, _, line) in rows {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub axis: String,
    pub value: String,
    pub workload: String,
    pub cycles: Option<u64>,
    pub slowdown: Option<f64>,
}

/// Parse back what `emit_csv` wrote. Numeric cells reproduce exactly:
/// cycles are integers and slowdowns round-trip through the shortest
/// decimal rendering.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, DseError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CSV_HEADER {
        return Err(DseError::Parse {
            path: "<csv>".into(),
            message: format!("unexpected header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(DseError::Parse {
                path: "<csv>".into(),
                message: format!("line {}: expected 5 fields, found {}", n + 2, fields.len()),
            });
        }
        let parse_num = |s: &str, what: &str| -> Result<Option<f64>, DseError> {
            if s == NA {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| DseError::Parse {
                path: "<csv>".into(),
                message: format!("line {}: bad {what} `{s}`", n + 2),
            })
        };
        let cycles = if fields[3] == NA {
            None
        } else {
            Some(fields[3].parse::<u64>().map_err(|_| DseError::Parse {
                path: "<csv>".into(),
                message: format!("line {}: bad cycles `{}`", n + 2, fields[3]),
            })?)
        };
        rows.push(CsvRow {
            axis: fields[0].to_string(),
            value: fields[1].to_string(),
            workload: fields[2].to_string(),
            cycles,
            slowdown: parse_num(fields[4], "slowdown")?,
        });
    }
    Ok(rows)
}

/// Figure ids and the axis each one plots. The `fig3*` family is the
/// Pascal baseline's single-parameter set; `fig6*` is the Volta one
/// (which has no shared-memory subplot).
pub const FIGURE_AXES: &[(&str, ParamAxis)] = &[
    ("fig3a", ParamAxis::L1Size),
    ("fig3b", ParamAxis::L1Assoc),
    ("fig3c", ParamAxis::L2Size),
    ("fig3d", ParamAxis::L2Assoc),
    ("fig3e", ParamAxis::CoresPerSmb),
    ("fig3f", ParamAxis::Regfile),
    ("fig3g", ParamAxis::Shmem),
    ("fig3h", ParamAxis::WarpSchedulers),
    ("fig3i", ParamAxis::SmbPerSm),
    ("fig3j", ParamAxis::SmsPerCluster),
    ("fig3k", ParamAxis::NumSms),
    ("fig6a", ParamAxis::L1Size),
    ("fig6b", ParamAxis::L1Assoc),
    ("fig6c", ParamAxis::L2Size),
    ("fig6d", ParamAxis::L2Assoc),
    ("fig6e", ParamAxis::CoresPerSmb),
    ("fig6f", ParamAxis::Regfile),
    ("fig6g", ParamAxis::WarpSchedulers),
    ("fig6h", ParamAxis::SmbPerSm),
    ("fig6i", ParamAxis::SmsPerCluster),
    ("fig6j", ParamAxis::NumSms),
];

pub fn figure_axis(figure_id: &str) -> Result<ParamAxis, DseError> {
    FIGURE_AXES
        .iter()
        .find(|(id, _)| *id == figure_id)
        .map(|&(_, axis)| axis)
        .ok_or_else(|| DseError::UnknownFigure(figure_id.to_string()))
}

/// Round to six significant digits for the human-facing outputs.
fn sig6(x: f64) -> String {
    match format!("{x:.5e}").parse::<f64>() {
        Ok(v) => format!("{v}"),
        Err(_) => x.to_string(),
    }
}

/// One figure's worth of sweep data: x values down the rows, one
/// slowdown series per workload plus the geomean. Flagged cells hold no
/// value and render as explicit sentinels.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub figure_id: String,
    pub x_axis: Vec<u64>,
    pub series: Vec<String>,
    /// `values[row][col]`; dimensions are |x_axis| x |series|.
    pub values: Vec<Vec<Option<f64>>>,
    pub geomean: Vec<Option<f64>>,
}

/// Assemble the figure's slowdown matrix from the single-axis points of
/// the axis `figure_id` maps to.
pub fn figure_data(result: &SweepResult, figure_id: &str) -> Result<FigureSpec, DseError> {
    let axis = figure_axis(figure_id)?;
    let mut points: Vec<&crate::dse::SweepEntry> = result
        .entries
        .iter()
        .filter(|e| e.point.overrides.len() == 1 && e.point.overrides[0].0 == axis)
        .collect();
    if points.is_empty() {
        return Err(DseError::MissingSweep {
            axis: axis.to_string(),
            found: 0,
        });
    }
    points.sort_by_key(|e| e.point.overrides[0].1);
    Ok(FigureSpec {
        figure_id: figure_id.to_string(),
        x_axis: points.iter().map(|e| e.point.overrides[0].1).collect(),
        series: result.workloads.clone(),
        values: points
            .iter()
            .map(|e| {
                result
                    .workloads
                    .iter()
                    .map(|w| e.cells.get(w).and_then(|c| c.slowdown))
                    .collect()
            })
            .collect(),
        geomean: points.iter().map(|e| e.geomean).collect(),
    })
}

/// Plot-data file for one figure: whitespace-separated columns of the x
/// value, one slowdown column per workload, and the geomean last.
pub fn emit_figure_data(result: &SweepResult, figure_id: &str) -> Result<String, DseError> {
    let figure = figure_data(result, figure_id)?;
    let axis = figure_axis(figure_id)?;
    let mut out = format!("# {figure_id}: x={axis}");
    out.push('\n');
    out.push_str("# x");
    for w in &figure.series {
        out.push(' ');
        out.push_str(w);
    }
    out.push_str(" geomean\n");
    for (row, &x) in figure.x_axis.iter().enumerate() {
        out.push_str(&x.to_string());
        for cell in &figure.values[row] {
            out.push(' ');
            match cell {
                Some(s) => out.push_str(&sig6(*s)),
                None => out.push_str(NA),
            }
        }
        out.push(' ');
        match figure.geomean[row] {
            Some(g) => out.push_str(&sig6(g)),
            None => out.push_str(NA),
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_json(result: &SweepResult) -> String {
    serde_json::to_string_pretty(result).expect("SweepResult serializes")
}

pub fn parse_json(text: &str) -> Result<SweepResult, DseError> {
    serde_json::from_str(text).map_err(|e| DseError::Parse {
        path: "<json>".into(),
        message: e.to_string(),
    })
}

fn pad(s: &str, width: usize) -> String {
    format!("{s:>width$}")
}

/// Aligned per-axis summary of geomean slowdowns for the terminal.
pub fn render_summary(result: &SweepResult) -> String {
    let mut out = format!("sweep over `{}`\n", result.base_label);
    let mut by_axis: BTreeMap<String, Vec<(String, Option<f64>)>> = BTreeMap::new();
    for entry in &result.entries {
        by_axis
            .entry(entry.point.axis_desc())
            .or_default()
            .push((entry.point.value_desc(), entry.geomean));
    }
    for (axis, points) in by_axis {
        out.push_str(&format!("  {axis}:"));
        for (value, geomean) in points {
            let g = geomean.map_or_else(|| NA.into(), |g| sig6(g));
            out.push_str(&format!(" {value}={g}"));
        }
        out.push('\n');
    }
    out
}

/// Classification table in the two-category shape.
pub fn render_classification(rows: &[ParamClassification]) -> String {
    let mut out = String::from("parameter            category  limit\n");
    for row in rows {
        out.push_str(&format!(
            "{:<20} {:>8}  {}\n",
            row.param.as_str(),
            row.category.number(),
            row.limit
                .map_or_else(|| "-".to_string(), |l| l.to_string())
        ));
    }
    out
}

/// Comparison matrix: setups as rows, workloads plus geomean and the
/// area delta as columns.
pub fn render_setups(cmp: &SetupComparison) -> String {
    let mut widths: Vec<usize> = cmp.workloads.iter().map(|w| w.len().max(8)).collect();
    widths.push(8);
    let mut out = pad("setup", 18);
    for (w, width) in cmp.workloads.iter().zip(&widths) {
        out.push(' ');
        out.push_str(&pad(w, *width));
    }
    out.push_str(&format!(" {} {}\n", pad("geomean", 8), pad("area_delta", 12)));
    for row in &cmp.rows {
        out.push_str(&pad(&row.setup, 18));
        for (w, width) in cmp.workloads.iter().zip(&widths) {
            let cell = row
                .cells
                .get(w)
                .and_then(|c| c.slowdown)
                .map_or_else(|| NA.to_string(), sig6);
            out.push(' ');
            out.push_str(&pad(&cell, *width));
        }
        let g = row.geomean.map_or_else(|| NA.to_string(), sig6);
        out.push_str(&format!(
            " {} {}\n",
            pad(&g, 8),
            pad(&format!("{:+.0}", row.area_delta), 12)
        ));
    }
    out
}

/// Long-form CSV for the setup comparison.
pub fn emit_setups_csv(cmp: &SetupComparison) -> String {
    let mut out = String::from("setup,workload,cycles,slowdown,area_delta\n");
    for row in &cmp.rows {
        for (workload, cell) in &row.cells {
            let cycles = cell
                .cycles
                .map_or_else(|| NA.to_string(), |c| c.to_string());
            let slowdown = cell
                .slowdown
                .map_or_else(|| NA.to_string(), |s| s.to_string());
            out.push_str(&format!(
                "{},{workload},{cycles},{slowdown},{}\n",
                row.setup, row.area_delta
            ));
        }
    }
    out
}

pub fn emit_setups_json(cmp: &SetupComparison) -> String {
    serde_json::to_string_pretty(cmp).expect("SetupComparison serializes")
}
