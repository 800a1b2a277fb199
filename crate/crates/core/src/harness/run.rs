//! One experiment end to end, and its manifest and result files.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::error_rate;
use crate::learner::{learn_adversarial, learn_malicious_from_set, KktDiagnostics, PipelineReport};
use crate::rng::{stream, streams};
use crate::robustify::{sigma_bar, RemovalReport};
use crate::synth::{
    build_mixture_with, draw_clean, flip_labels_adversary, sample_sparse_halfspace, GroundTruth,
    MaliciousOracle, MixtureSpec, Provenance, SampleSet,
};

use super::config::{ExperimentConfig, NoiseModel};
use super::HarnessError;

/// Result CSV columns, in order.
pub const CSV_COLUMNS: [&str; 16] = [
    "d",
    "s",
    "k",
    "n_train",
    "eta",
    "eta0",
    "gamma",
    "r",
    "seed",
    "error_rate",
    "removal_rounds",
    "worst_variance",
    "sigma_bar",
    "stationarity_residual",
    "wall_ms",
    "status",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    /// The solver returned but its stationarity residual exceeds the
    /// tolerance.
    NotConverged,
    /// A stage returned an error; the string names it.
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            RunStatus::Ok => "ok".into(),
            RunStatus::NotConverged => "not-converged".into(),
            RunStatus::Failed(stage) => format!("failed:{stage}"),
        }
    }
}

/// One row of the result CSV. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub d: usize,
    pub s: usize,
    pub k: usize,
    pub n_train: usize,
    pub eta: f64,
    pub eta0: f64,
    pub gamma: f64,
    pub r: f64,
    pub seed: u64,
    pub error_rate: Option<f64>,
    pub removal_rounds: Option<usize>,
    pub worst_variance: Option<f64>,
    pub sigma_bar: f64,
    pub stationarity_residual: Option<f64>,
    pub wall_ms: u64,
    pub status: RunStatus,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRow {
    pub fn header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn to_csv(&self) -> String {
        [
            self.d.to_string(),
            self.s.to_string(),
            self.k.to_string(),
            self.n_train.to_string(),
            self.eta.to_string(),
            self.eta0.to_string(),
            self.gamma.to_string(),
            self.r.to_string(),
            self.seed.to_string(),
            opt(self.error_rate),
            opt(self.removal_rounds),
            opt(self.worst_variance),
            self.sigma_bar.to_string(),
            opt(self.stationarity_residual),
            self.wall_ms.to_string(),
            self.status.label(),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounters {
    pub n_drawn: usize,
    pub n_malicious: usize,
    pub n_flipped: usize,
    pub filtered_out: usize,
    pub removal_rounds: usize,
    pub weight_mass: f64,
    pub solver_iterations: usize,
    pub kink_band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub row: ResultRow,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub counters: StageCounters,
    pub filter_threshold: Option<f64>,
    pub removal: Option<RemovalReport>,
    pub kkt: Option<KktDiagnostics>,
    pub w_hat: Option<Vec<f64>>,
    pub w_star: Option<Vec<f64>>,
    /// Final weights with the provenance of each training sample.
    #[serde(skip)]
    pub weights: Vec<(f64, Provenance)>,
}

/// Data for one config: ground truth, mixture, noisy training set and clean
/// test set, each drawn from its own stream.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub gt: GroundTruth,
    pub mixture: MixtureSpec,
    pub train: SampleSet,
    pub test: SampleSet,
}

pub fn generate(cfg: &ExperimentConfig) -> Result<GeneratedData, HarnessError> {
    let synth = |e| HarnessError::stage("synth", e);
    let w = sample_sparse_halfspace(cfg.d, cfg.s, &mut stream(cfg.seed, streams::GROUND_TRUTH)).map_err(synth)?;
    let gt = GroundTruth::new(w, cfg.s, cfg.gamma).map_err(synth)?;
    let mixture = build_mixture_with(
        cfg.d,
        cfg.k,
        cfg.r,
        cfg.gamma,
        &gt.w_star,
        &cfg.mixture_options(),
        &mut stream(cfg.seed, streams::MIXTURE),
    )
    .map_err(synth)?;
    let test = draw_clean(&mixture, &gt, cfg.n_test, &mut stream(cfg.seed, streams::TEST)).map_err(synth)?;
    let train = match cfg.noise {
        NoiseModel::Malicious => {
            let mut oracle = MaliciousOracle::new(
                mixture.clone(),
                gt.clone(),
                cfg.eta,
                cfg.strategy(),
                stream(cfg.seed, streams::TRAIN),
            )
            .map_err(synth)?;
            oracle.draw(cfg.n_train).map_err(synth)?
        }
        NoiseModel::LabelFlip => {
            let clean = draw_clean(&mixture, &gt, cfg.n_train, &mut stream(cfg.seed, streams::TRAIN)).map_err(synth)?;
            flip_labels_adversary(&clean, &gt, cfg.eta, cfg.flip_policy, &mut stream(cfg.seed, streams::LABEL_FLIP))
                .map_err(synth)?
        }
    };
    Ok(GeneratedData { gt, mixture, train, test })
}

fn learn(cfg: &ExperimentConfig, data: &GeneratedData) -> Result<PipelineReport, HarnessError> {
    let pc = cfg.pipeline();
    match cfg.noise {
        NoiseModel::Malicious => learn_malicious_from_set(&data.train, &pc),
        NoiseModel::LabelFlip => learn_adversarial(&data.train, &pc),
    }
    .map_err(|e| HarnessError::stage("learn", e))
}

/// Runs generation, learning and evaluation. Stage failures are recorded in
/// the result (status `failed:<stage>`), not returned as errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunResult {
    let start = Instant::now();
    let mut res = RunResult {
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        row: ResultRow {
            d: cfg.d,
            s: cfg.s,
            k: cfg.k,
            n_train: cfg.n_train,
            eta: cfg.eta,
            eta0: cfg.eta0,
            gamma: cfg.gamma,
            r: cfg.r,
            seed: cfg.seed,
            error_rate: None,
            removal_rounds: None,
            worst_variance: None,
            sigma_bar: sigma_bar(cfg.d, cfg.r),
            stationarity_residual: None,
            wall_ms: 0,
            status: RunStatus::Ok,
        },
        warnings: cfg.warnings(),
        error: None,
        counters: StageCounters::default(),
        filter_threshold: None,
        removal: None,
        kkt: None,
        w_hat: None,
        w_star: None,
        weights: Vec::new(),
    };
    if let Err(e) = cfg.validate() {
        res.row.status = RunStatus::Failed("config".into());
        res.error = Some(e.to_string());
        return res;
    }
    let outcome = generate(cfg).and_then(|data| {
        let report = learn(cfg, &data)?;
        let err = error_rate(&report.model.w_hat, &data.test).map_err(|e| HarnessError::stage("evaluate", e))?;
        Ok((data, report, err))
    });
    match outcome {
        Ok((data, report, err)) => {
            let model = &report.model;
            let mut kkt = model.kkt.clone();
            kkt.attach_w_star(&model.w_hat, &data.gt.w_star);
            res.counters = StageCounters {
                n_drawn: report.n_drawn,
                n_malicious: data.train.count(Provenance::Malicious),
                n_flipped: data.train.count(Provenance::LabelFlipped),
                filtered_out: report.filtered_out,
                removal_rounds: report.removal.as_ref().map_or(0, |r| r.iterations),
                weight_mass: report.weights.mass(),
                solver_iterations: model.iterations_used,
                kink_band: model.kink_band,
            };
            res.row.error_rate = Some(err);
            res.row.removal_rounds = report.removal.as_ref().map(|r| r.iterations);
            res.row.worst_variance = report.removal.as_ref().map(|r| r.final_worst_variance);
            res.row.sigma_bar = report.sigma_bar;
            res.row.stationarity_residual = Some(model.kkt.stationarity_residual);
            if !model.converged {
                res.row.status = RunStatus::NotConverged;
            }
            res.filter_threshold = report.filter_threshold;
            res.weights = report.weights.q.iter().copied().zip(report.train.iter().map(|s| s.provenance)).collect();
            res.removal = report.removal;
            res.kkt = Some(kkt);
            res.w_hat = Some(report.model.w_hat);
            res.w_star = Some(data.gt.w_star);
        }
        Err(e) => {
            let stage = match &e {
                HarnessError::Stage { stage, .. } => *stage,
                _ => "run",
            };
            res.row.status = RunStatus::Failed(stage.into());
            res.error = Some(e.to_string());
        }
    }
    if cfg.record_wall_time {
        res.row.wall_ms = start.elapsed().as_millis() as u64;
    }
    res
}

/// Writes `weights.csv` with columns `index,q,provenance`.
pub fn write_weights(path: &Path, weights: &[(f64, Provenance)]) -> Result<(), HarnessError> {
    let mut text = String::from("index,q,provenance\n");
    for (i, (q, p)) in weights.iter().enumerate() {
        let _ = writeln!(text, "{i},{q},{}", p.name());
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes `manifest.json`, `results.csv` (header plus one row) and, when
/// the run produced weights, `weights.csv` into `dir`.
pub fn write_run(dir: &Path, res: &RunResult) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let manifest = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(res).map_err(|e| HarnessError::io(&manifest, e))?;
    std::fs::write(&manifest, json + "\n").map_err(|e| HarnessError::io(&manifest, e))?;
    let csv = dir.join("results.csv");
    std::fs::write(&csv, format!("{}\n{}\n", ResultRow::header(), res.row.to_csv()))
        .map_err(|e| HarnessError::io(&csv, e))?;
    if !res.weights.is_empty() {
        write_weights(&dir.join("weights.csv"), &res.weights)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            d: 20,
            s: 3,
            n_train: 300,
            n_test: 500,
            gamma: 0.3,
            r: 0.6,
            eta: 0.0,
            eta0: 0.0,
            record_wall_time: false,
            ..Default::default()
        }
    }

    #[test]
    fn row_layout_matches_columns() {
        let res = run_experiment(&small());
        assert_eq!(res.row.to_csv().split(',').count(), CSV_COLUMNS.len());
        assert_eq!(res.row.status, RunStatus::Ok, "{:?}", res.error);
        assert!(res.row.error_rate.unwrap() <= 0.05);
        assert_eq!(res.row.removal_rounds, None);
    }

    #[test]
    fn invalid_config_is_recorded() {
        let cfg = ExperimentConfig { s: 0, ..small() };
        let res = run_experiment(&cfg);
        assert_eq!(res.row.status, RunStatus::Failed("config".into()));
        assert!(res.error.unwrap().contains("`s`"));
    }
}
