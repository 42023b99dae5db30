//! CSV, JSON and text renderings of experiment reports.

use std::path::Path;

use serde::Serialize;

use regret_tree::analysis::RegretReport;
use regret_tree::oracle::{SweepReport, ValidationReport};
use regret_tree::selective::SelectiveCurve;

use crate::CliError;

/// One row of the dataset-level regret table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub dataset: String,
    pub leaf_regret: f64,
    pub structural_regret: f64,
    pub ratio: f64,
}

impl TableRow {
    pub fn new(dataset: impl Into<String>, leaf_regret: f64, structural_regret: f64) -> Self {
        Self {
            dataset: dataset.into(),
            leaf_regret,
            structural_regret,
            ratio: structural_regret / leaf_regret,
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Shortest round-trip representation, so CSV readers recover the exact value.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn decomposition_csv(report: &ValidationReport) -> String {
    csv(
        &[
            "point",
            "expected_leaf",
            "structural",
            "total_estimated",
            "total_simulated",
            "relative_error",
        ],
        report.points.iter().map(|d| {
            vec![
                d.point.to_string(),
                num(d.expected_leaf),
                num(d.structural),
                num(d.total_estimated),
                num(d.total_simulated),
                num(d.relative_error()),
            ]
        }),
    )
}

pub fn sweep_csv(report: &SweepReport) -> String {
    csv(
        &["min_leaf", "leaf_regret", "log_loss"],
        report
            .points
            .iter()
            .map(|p| vec![p.min_leaf.to_string(), num(p.leaf_regret), num(p.log_loss)]),
    )
}

pub fn table_csv(rows: &[TableRow]) -> String {
    csv(
        &["dataset", "leaf_regret", "structural_regret", "ratio"],
        rows.iter().map(|r| {
            vec![
                r.dataset.clone(),
                num(r.leaf_regret),
                num(r.structural_regret),
                num(r.ratio),
            ]
        }),
    )
}

/// Fixed-precision rendering: regrets to six decimals, ratio to two.
pub fn table_row_text(row: &TableRow) -> String {
    format!(
        "{},{:.6},{:.6},{:.2}",
        row.dataset, row.leaf_regret, row.structural_regret, row.ratio
    )
}

pub fn table_text(rows: &[TableRow]) -> String {
    let mut out = String::from("dataset,leaf_regret,structural_regret,ratio\n");
    for r in rows {
        out.push_str(&table_row_text(r));
        out.push('\n');
    }
    out
}

pub fn regret_csv(report: &RegretReport) -> String {
    csv(
        &[
            "instance",
            "leaf_id",
            "n_leaf",
            "p_hat",
            "leaf_regret",
            "structural_regret",
            "total",
        ],
        report.instances.iter().map(|r| {
            vec![
                r.instance.to_string(),
                r.leaf_id.to_string(),
                r.n_leaf.to_string(),
                num(r.p_hat),
                num(r.leaf_regret),
                num(r.structural_regret),
                num(r.total),
            ]
        }),
    )
}

/// Long format, one row per (strategy, coverage). Undefined recall is blank.
pub fn selective_csv(curves: &[SelectiveCurve]) -> String {
    csv(
        &[
            "strategy",
            "coverage",
            "recall",
            "retained",
            "retained_positives",
        ],
        curves.iter().flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![
                    c.strategy.to_string(),
                    num(p.coverage),
                    p.recall.map(num).unwrap_or_default(),
                    p.retained.to_string(),
                    p.retained_positives.to_string(),
                ]
            })
        }),
    )
}
