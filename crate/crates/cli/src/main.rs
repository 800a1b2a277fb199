use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use halfspace_core::harness::{
    emit_plot_script, generate, parse_pairs, run_checks, run_experiment, sweep, write_dataset,
    write_run, write_sweep, CheckOptions, ConfigError, ExperimentConfig, HarnessError, PlotKind,
    RunStatus, SweepGrid,
};

#[derive(Parser)]
#[command(name = "halfspace", version, about = "Sparse halfspace learning under malicious and label noise")]
struct Cli {
    /// Flat `key = value` config file (a grid file for `sweep`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `seed` (for `sweep`, runs this seed only).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for sweeps and data-parallel kernels.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Output directory; overrides `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training and test sets as dataset CSVs.
    Gen,
    /// Run one experiment and write its manifest, result row and weights.
    Learn,
    /// Run every cell of a grid and write one result row per cell.
    Sweep,
    /// Run the diagnostics suite for one config.
    Check,
    /// Write a plotting script for a result or weights CSV.
    Plot {
        #[arg(long, value_name = "PATH")]
        csv: PathBuf,
        /// error-vs-eta, error-vs-n or weights-histogram
        #[arg(long)]
        kind: String,
        /// Script path; defaults to `<out>/<kind>.py`.
        #[arg(long, value_name = "PATH")]
        script: Option<PathBuf>,
    },
}

fn config_text(cli: &Cli, seed_key: &str) -> Result<String, HarnessError> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::Io {
            path: p.clone(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    let mut pairs = parse_pairs(&text)?;
    let mut set = |k: &str, v: String| match pairs.iter_mut().find(|(key, _)| key == k) {
        Some(slot) => slot.1 = v,
        None => pairs.push((k.to_string(), v)),
    };
    for o in &cli.overrides {
        let Some((k, v)) = o.split_once('=') else {
            return Err(ConfigError::Syntax { line: 0, text: o.clone() }.into());
        };
        set(k.trim(), v.trim().to_string());
    }
    if let Some(seed) = cli.seed {
        set(seed_key, seed.to_string());
    }
    if let Some(out) = &cli.out {
        set("out", out.display().to_string());
    }
    Ok(pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect())
}

fn load(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let cfg = ExperimentConfig::parse(&config_text(cli, "seed")?)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn mkdir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.into(), message: e.to_string() })
}

fn run(cli: &Cli) -> Result<ExitCode, HarnessError> {
    match &cli.command {
        Command::Gen => {
            let cfg = load(cli)?;
            let data = generate(&cfg)?;
            mkdir(&cfg.out)?;
            write_dataset(&cfg.out.join("train.csv"), &data.train)?;
            write_dataset(&cfg.out.join("test.csv"), &data.test)?;
            println!("wrote {} train and {} test samples to {}", data.train.len(), data.test.len(), cfg.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Learn => {
            let cfg = load(cli)?;
            let res = run_experiment(&cfg);
            write_run(&cfg.out, &res)?;
            println!("{}", res.row.to_csv());
            if let Some(e) = &res.error {
                eprintln!("error: {e}");
            }
            Ok(match res.row.status {
                RunStatus::Failed(_) => ExitCode::from(3),
                _ => ExitCode::SUCCESS,
            })
        }
        Command::Sweep => {
            let grid = SweepGrid::parse(&config_text(cli, "seeds")?)?;
            for w in grid.base.warnings() {
                eprintln!("warning: {w}");
            }
            let outcome = sweep(&grid, cli.jobs);
            write_sweep(&grid.base.out, &outcome)?;
            for t in &outcome.trend {
                println!("eta {}: mean error {} over {} runs", t.eta, t.mean_error, t.runs);
            }
            println!(
                "{} cells, {} failed, error non-decreasing in eta: {}",
                outcome.results.len(),
                outcome.failures,
                outcome.non_decreasing
            );
            Ok(if outcome.failures > 0 { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Command::Check => {
            let cfg = load(cli)?;
            let report = run_checks(&cfg, &CheckOptions::default())?;
            report.write(&cfg.out)?;
            for l in &report.lines {
                let verdict = match (l.passed, l.hard) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "NOTE",
                };
                println!("{verdict} {} value={} bound={} {}", l.name, l.value, l.bound, l.detail);
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Plot { csv, kind, script } => {
            let Some(k) = PlotKind::parse(kind) else {
                return Err(ConfigError::Invalid {
                    field: "kind".into(),
                    value: kind.clone(),
                    reason: "expected error-vs-eta, error-vs-n or weights-histogram".into(),
                }
                .into());
            };
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let path = script.clone().unwrap_or_else(|| out_dir.join(format!("{}.py", k.name())));
            let written = emit_plot_script(csv, k, &path)?;
            println!("wrote {}", written.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs.max(1);
    let result = halfspace_core::par::with_jobs(jobs, || run(&cli));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
