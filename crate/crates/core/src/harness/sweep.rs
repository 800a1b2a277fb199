//! Grid sweeps: the Cartesian product of list-valued config keys times a
//! seed list, one independent run per cell.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::par;

use super::config::{parse_pairs, ConfigError, ExperimentConfig};
use super::run::{run_experiment, write_weights, ResultRow, RunResult, RunStatus};
use super::HarnessError;

/// A grid file is a config file in which any value may be a comma-separated
/// list. The extra key `seeds` lists the seeds to run every cell with.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    /// Keys with more than one value, in file order.
    pub axes: Vec<(String, Vec<String>)>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut base = ExperimentConfig::default();
        let mut axes = Vec::new();
        let mut seeds = None;
        for (key, value) in parse_pairs(text)? {
            let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
            if key == "seeds" {
                let parsed = values
                    .iter()
                    .map(|v| {
                        v.parse::<u64>().map_err(|_| ConfigError::Invalid {
                            field: "seeds".into(),
                            value: v.clone(),
                            reason: "not an integer".into(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                seeds = Some(parsed);
                continue;
            }
            // every listed value must be valid on its own
            for v in &values {
                base.clone().set(&key, v)?;
            }
            base.set(&key, &values[0])?;
            if values.len() > 1 {
                axes.push((key, values));
            }
        }
        let seeds = seeds.unwrap_or_else(|| vec![base.seed]);
        let grid = Self { base, axes, seeds };
        for cell in grid.cells() {
            cell.validate()?;
        }
        Ok(grid)
    }

    pub fn single(cfg: ExperimentConfig) -> Self {
        Self { seeds: vec![cfg.seed], base: cfg, axes: Vec::new() }
    }

    /// Cell configs in row order: axes vary slowest-first in file order,
    /// seeds fastest. Each cell writes under `out/cell_NNNN`.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut combos: Vec<Vec<(&str, &str)>> = vec![Vec::new()];
        for (key, values) in &self.axes {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.push((key.as_str(), v.as_str()));
                        c
                    })
                })
                .collect();
        }
        let mut out = Vec::with_capacity(combos.len() * self.seeds.len());
        for combo in combos {
            for &seed in &self.seeds {
                let mut cfg = self.base.clone();
                for (k, v) in &combo {
                    cfg.set(k, v).expect("grid values validated on parse");
                }
                cfg.seed = seed;
                cfg.out = self.base.out.join(format!("cell_{:04}", out.len()));
                out.push(cfg);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub eta: f64,
    pub mean_error: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub results: Vec<RunResult>,
    /// Mean test error per `eta` over rows that produced one.
    pub trend: Vec<TrendPoint>,
    /// Whether the mean error is non-decreasing in `eta`.
    pub non_decreasing: bool,
    pub failures: usize,
}

/// Runs every cell, at most `jobs` at a time. Cells are independent and
/// draw from their own seeded streams, so the output does not depend on
/// `jobs` or on scheduling (apart from `wall_ms`).
pub fn sweep(grid: &SweepGrid, jobs: usize) -> SweepOutcome {
    let cells = grid.cells();
    let results = par::with_jobs(jobs, || par::map_slice(&cells, run_experiment));
    let mut by_eta: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for r in &results {
        if let Some(e) = r.row.error_rate {
            let entry = by_eta.entry(r.row.eta.to_bits()).or_insert((r.row.eta, 0.0, 0));
            entry.1 += e;
            entry.2 += 1;
        }
    }
    let mut trend: Vec<TrendPoint> = by_eta
        .into_values()
        .map(|(eta, sum, runs)| TrendPoint { eta, mean_error: sum / runs as f64, runs })
        .collect();
    trend.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let non_decreasing = trend.windows(2).all(|w| w[1].mean_error >= w[0].mean_error);
    let failures = results.iter().filter(|r| matches!(r.row.status, RunStatus::Failed(_))).count();
    SweepOutcome { results, trend, non_decreasing, failures }
}

/// Writes `results.csv` (one row per cell), `summary.json` and a manifest
/// (plus weights, when present) per cell under `dir/cell_NNNN/`.
pub fn write_sweep(dir: &Path, outcome: &SweepOutcome) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut csv = ResultRow::header() + "\n";
    for (i, r) in outcome.results.iter().enumerate() {
        csv.push_str(&r.row.to_csv());
        csv.push('\n');
        let cell = dir.join(format!("cell_{i:04}"));
        std::fs::create_dir_all(&cell).map_err(|e| HarnessError::io(&cell, e))?;
        let manifest = cell.join("manifest.json");
        let json = serde_json::to_string_pretty(r).map_err(|e| HarnessError::io(&manifest, e))?;
        std::fs::write(&manifest, json + "\n").map_err(|e| HarnessError::io(&manifest, e))?;
        if !r.weights.is_empty() {
            write_weights(&cell.join("weights.csv"), &r.weights)?;
        }
    }
    let path = dir.join("results.csv");
    std::fs::write(&path, csv).map_err(|e| HarnessError::io(&path, e))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        cells: usize,
        failures: usize,
        trend: &'a [TrendPoint],
        non_decreasing: bool,
    }
    let summary = Summary {
        cells: outcome.results.len(),
        failures: outcome.failures,
        trend: &outcome.trend,
        non_decreasing: outcome.non_decreasing,
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::io(&path, e))?;
    std::fs::write(&path, json + "\n").map_err(|e| HarnessError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_cells() {
        let g = SweepGrid::parse("eta = 0, 0.05, 0.1\neta0 = 0.1\nseeds = 1,2,3,4,5\n").unwrap();
        let cells = g.cells();
        assert_eq!(cells.len(), 15);
        assert_eq!(cells[0].eta, 0.0);
        assert_eq!(cells[4].seed, 5);
        assert_eq!(cells[5].eta, 0.05);
        assert!(cells[14].out.ends_with("cell_0014"));
    }

    #[test]
    fn grid_rejects_bad_list_entry() {
        let e = SweepGrid::parse("gamma = 0.3, -1").unwrap_err();
        assert_eq!(e.field(), Some("gamma"));
        let e = SweepGrid::parse("eta = 0.2\neta0 = 0.1, 0.3").unwrap_err();
        assert_eq!(e.field(), Some("eta"));
    }

    #[test]
    fn single_cell_matches_run() {
        let cfg = ExperimentConfig {
            d: 10,
            s: 2,
            n_train: 200,
            n_test: 200,
            eta: 0.0,
            eta0: 0.0,
            record_wall_time: false,
            ..Default::default()
        };
        let out = sweep(&SweepGrid::single(cfg.clone()), 1);
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.results[0].row, run_experiment(&cfg).row);
    }
}
