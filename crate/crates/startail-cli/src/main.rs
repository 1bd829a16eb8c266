//! Experiment runner: reproducible simulate -> estimate -> verify pipelines
//! driven by a TOML config, plus standalone verification suites and CSV
//! ingestion.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config or I/O error.

mod runner;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use startail::io as series_io;
use startail::space::Space;
use startail::verify::{run_suite, Scale};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "startail",
    version,
    about = "Heavy-tailed series: simulation, spectral tail processes, estimators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the tasks of an experiment config in order.
    Run {
        /// TOML experiment config.
        config: PathBuf,
        /// Override config fields, e.g. --set run.seed=43 --set model.alpha=2.0
        #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
        set: Vec<String>,
        /// Output directory (falls back to run.output_dir, then $STARTAIL_OUT,
        /// then ./startail_out).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a verification suite: axioms, timechange, nuk, estimator_oracle.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 20240811)]
        seed: u64,
        /// smoke (fast) or desk (reference scale).
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Also write the JSON summary here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Validate an external CSV series against a space block and print a
    /// summary.
    Ingest {
        csv: PathBuf,
        /// Inline TOML space table, e.g. '{ kind = "euclidean", dim = 2, p = 2.0 }'.
        /// Optional when the file carries its own descriptor line.
        #[arg(long)]
        space: Option<String>,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            set,
            output_dir,
        } => {
            let loaded = runner::load_config(&config, &set)?;
            let out = output_dir
                .or_else(|| loaded.config.run.output_dir.clone().map(PathBuf::from))
                .or_else(|| std::env::var_os("STARTAIL_OUT").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("startail_out"));
            let outcome = runner::run_experiment(&loaded, &out)?;
            let report_json = serde_json::to_string_pretty(&outcome.report)?;
            fs::write(out.join("report.json"), &report_json)
                .with_context(|| format!("cannot write report under {}", out.display()))?;
            println!("{report_json}");
            Ok(ExitCode::from(outcome.exit_code as u8))
        }
        Cmd::Verify {
            suite,
            seed,
            scale,
            json,
        } => {
            let scale: Scale = scale.parse().map_err(|e| anyhow!("{e}"))?;
            let report = run_suite(&suite, seed, scale).map_err(|e| anyhow!("{e}"))?;
            print!("{}", report.lines());
            if let Some(path) = json {
                fs::write(&path, report.to_json())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Ingest { csv, space } => {
            let expected = match space {
                Some(block) => {
                    let doc: toml::Value = toml::from_str(&format!("space = {block}"))
                        .map_err(|e| anyhow!("bad --space block: {e}"))?;
                    let space: Space = doc
                        .get("space")
                        .cloned()
                        .ok_or_else(|| anyhow!("bad --space block"))?
                        .try_into()
                        .map_err(|e| anyhow!("bad --space block: {e}"))?;
                    space.validate().map_err(|e| anyhow!("{e}"))?;
                    Some(space)
                }
                None => None,
            };
            let file =
                fs::File::open(&csv).with_context(|| format!("cannot open {}", csv.display()))?;
            let (series, space) =
                series_io::ingest_series(file, expected.as_ref()).map_err(|e| anyhow!("{e}"))?;
            let moduli = series.moduli(&space);
            let mut sorted = moduli.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let q = |p: f64| sorted[((sorted.len() as f64 - 1.0) * p) as usize];
            let summary = serde_json::json!({
                "rows": series.len(),
                "space": space.kind,
                "modulus_median": q(0.5),
                "modulus_q99": q(0.99),
                "modulus_max": sorted[sorted.len() - 1],
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
