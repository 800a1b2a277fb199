//! Emits standalone matplotlib scripts for result and weight CSVs. The
//! scripts are written, never executed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    ErrorVsEta,
    ErrorVsN,
    WeightsHistogram,
}

impl PlotKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "error-vs-eta" => Some(PlotKind::ErrorVsEta),
            "error-vs-n" => Some(PlotKind::ErrorVsN),
            "weights-histogram" => Some(PlotKind::WeightsHistogram),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::ErrorVsEta => "error-vs-eta",
            PlotKind::ErrorVsN => "error-vs-n",
            PlotKind::WeightsHistogram => "weights-histogram",
        }
    }

    pub fn required_columns(&self) -> &'static [&'static str] {
        match self {
            PlotKind::ErrorVsEta => &["eta", "error_rate"],
            PlotKind::ErrorVsN => &["n_train", "error_rate"],
            PlotKind::WeightsHistogram => &["q"],
        }
    }
}

fn body(kind: PlotKind) -> String {
    match kind {
        PlotKind::ErrorVsEta | PlotKind::ErrorVsN => {
            let (x, label) = if kind == PlotKind::ErrorVsEta {
                ("eta", "noise rate eta")
            } else {
                ("n_train", "training samples")
            };
            format!(
                r#"groups = defaultdict(list)
for row in rows:
    if row["error_rate"] != "":
        groups[float(row["{x}"])].append(float(row["error_rate"]))
xs = sorted(groups)
means = [sum(groups[v]) / len(groups[v]) for v in xs]
spread = [
    (sum((e - m) ** 2 for e in groups[v]) / max(len(groups[v]) - 1, 1)) ** 0.5
    for v, m in zip(xs, means)
]
fig, ax = plt.subplots()
ax.errorbar(xs, means, yerr=spread, marker="o", capsize=3)
ax.set_xlabel("{label}")
ax.set_ylabel("test error")
"#
            )
        }
        PlotKind::WeightsHistogram => format!(
            r#"qs = [float(row["q"]) for row in rows]
fig, ax = plt.subplots()
ax.hist(qs, bins={HISTOGRAM_BINS}, range=(0.0, 1.0))
ax.set_xlabel("weight q")
ax.set_ylabel("samples")
"#
        ),
    }
}

/// Checks that `csv_path` has a header with the columns `kind` needs and at
/// least one data row, then writes a Python script next to `out` that plots
/// it to a PNG with the same stem. Returns the script path.
pub fn emit_plot_script(csv_path: &Path, kind: PlotKind, out: &Path) -> Result<PathBuf, HarnessError> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| HarnessError::io(csv_path, e))?;
    let header = reader.headers().map_err(|e| HarnessError::io(csv_path, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(HarnessError::EmptyCsv(csv_path.to_path_buf()));
    }
    let missing: Vec<String> = kind
        .required_columns()
        .iter()
        .filter(|c| !header.iter().any(|h| h == **c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingColumns { path: csv_path.to_path_buf(), missing });
    }
    if reader.records().next().is_none() {
        return Err(HarnessError::EmptyCsv(csv_path.to_path_buf()));
    }
    let csv_abs = std::fs::canonicalize(csv_path).map_err(|e| HarnessError::io(csv_path, e))?;
    let png = out.with_extension("png");
    let script = format!(
        r#"#!/usr/bin/env python3
# {name} plot for {csv}
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open({csv:?}, newline="") as f:
    rows = list(csv.DictReader(f))

{body}ax.set_title("{name}")
fig.tight_layout()
fig.savefig({png:?})
"#,
        name = kind.name(),
        csv = csv_abs.display().to_string(),
        body = body(kind),
        png = png.display().to_string(),
    );
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(out, script).map_err(|e| HarnessError::io(out, e))?;
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_script_referencing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("r.csv");
        std::fs::write(&csv, "eta,error_rate,seed\n0,0.01,1\n0.1,0.02,1\n").unwrap();
        let out = dir.path().join("plot.py");
        emit_plot_script(&csv, PlotKind::ErrorVsEta, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains(r#"row["eta"]"#) && text.contains(r#"row["error_rate"]"#));
        assert!(text.contains("plot.png"));
    }

    #[test]
    fn histogram_uses_twenty_bins() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("w.csv");
        std::fs::write(&csv, "index,q,provenance\n0,1,clean\n").unwrap();
        let out = dir.path().join("h.py");
        emit_plot_script(&csv, PlotKind::WeightsHistogram, &out).unwrap();
        assert!(std::fs::read_to_string(&out).unwrap().contains("bins=20"));
    }

    #[test]
    fn missing_columns_and_empty_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("r.csv");
        std::fs::write(&csv, "eta,seed\n0,1\n").unwrap();
        let out = dir.path().join("p.py");
        match emit_plot_script(&csv, PlotKind::ErrorVsN, &out) {
            Err(HarnessError::MissingColumns { missing, .. }) => {
                assert_eq!(missing, vec!["n_train".to_string(), "error_rate".to_string()])
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&csv, "").unwrap();
        assert!(matches!(emit_plot_script(&csv, PlotKind::ErrorVsEta, &out), Err(HarnessError::EmptyCsv(_))));
        std::fs::write(&csv, "eta,error_rate\n").unwrap();
        assert!(matches!(emit_plot_script(&csv, PlotKind::ErrorVsEta, &out), Err(HarnessError::EmptyCsv(_))));
        assert!(!out.exists());
    }
}
