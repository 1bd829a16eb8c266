//! Config loading, override handling, and the task runner.

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};
use startail::config::{ExperimentConfig, TaskConfig};
use startail::estimate;
use startail::models::{ModelSpec, SeriesPath};
use startail::point::Window;
use startail::rng::{StreamId, StreamSeed};
use startail::space::Space;
use startail::spectral::{self, RngPairing};
use startail::{axioms, io as series_io, tailmeasure};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// |z| gate for the generic verification tasks.
const TASK_Z_GATE: f64 = 4.0;

pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Canonical re-serialization of the effective config (after overrides).
    pub canonical: String,
    pub hash: String,
}

/// Read a config file, apply `key.path=value` overrides, validate.
pub fn load_config(path: &Path, overrides: &[String]) -> anyhow::Result<LoadedConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut doc: toml::Value = toml::from_str(&text)
        .map_err(|e| anyhow!("config parse error in {}: {e}", path.display()))?;

    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{ov}' is not of the form key.path=value"))?;
        apply_override(&mut doc, key.trim(), value.trim())?;
    }

    let config: ExperimentConfig = doc
        .clone()
        .try_into()
        .map_err(|e| anyhow!("config field error: {e}"))?;
    config.validate().map_err(|e| anyhow!("{e}"))?;

    let canonical = toml::to_string(&config).context("config re-serialization")?;
    let digest = Sha256::digest(canonical.as_bytes());
    let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedConfig {
        config,
        canonical,
        hash,
    })
}

fn apply_override(doc: &mut toml::Value, key: &str, raw: &str) -> anyhow::Result<()> {
    // parse the value as a TOML literal, falling back to a bare string
    let parsed: toml::Value = toml::from_str::<toml::Value>(&format!("v = {raw}"))
        .ok()
        .and_then(|t| t.get("v").cloned())
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("override '{key}': '{part}' is not a table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[derive(Serialize)]
pub struct TaskReport {
    pub kind: String,
    pub status: String,
    pub artifacts: Vec<String>,
    pub wall_ms: u128,
}

#[derive(Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub output_dir: String,
    pub tasks: Vec<TaskReport>,
    pub total_wall_ms: u128,
    /// False when a verification-style task reported a failed check.
    pub checks_pass: bool,
}

pub struct RunOutcome {
    pub report: RunReport,
    /// 0 ok, 1 verification failure, 2 config/task error.
    pub exit_code: i32,
}

struct TaskCtx<'a> {
    config: &'a ExperimentConfig,
    space: &'a Space,
    model: Option<ModelSpec>,
    series: Option<SeriesPath>,
    out: PathBuf,
}

impl TaskCtx<'_> {
    /// Simulate or ingest on first use.
    fn series(&mut self) -> anyhow::Result<&SeriesPath> {
        if self.series.is_none() {
            let path = if let Some(model) = &self.model {
                model
                    .simulate_in(
                        Default::default(),
                        self.config.run.n,
                        StreamSeed::named(self.config.run.seed, StreamId::Model),
                        self.config.run.burn_in,
                    )
                    .map_err(|e| anyhow!("{e}"))?
            } else if let Some(input) = &self.config.input {
                let file = fs::File::open(input).with_context(|| format!("cannot open {input}"))?;
                let (p, _) =
                    series_io::ingest_series(file, Some(self.space)).map_err(|e| anyhow!("{e}"))?;
                p
            } else {
                bail!("no model and no input series configured");
            };
            self.series = Some(path);
        }
        Ok(self.series.as_ref().expect("just set"))
    }

    fn threshold(&mut self) -> anyhow::Result<f64> {
        let rule = self.config.threshold_rule();
        let space = self.space.clone();
        let moduli = self.series()?.moduli(&space);
        rule.resolve(&moduli).map_err(|e| anyhow!("{e}"))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> anyhow::Result<String> {
        let path = self.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path.display().to_string())
    }
}

pub fn run_experiment(loaded: &LoadedConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let start = Instant::now();
    let config = &loaded.config;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;
    // the effective config (post-overrides) is what the hash covers
    fs::write(out_dir.join("effective_config.toml"), &loaded.canonical)
        .with_context(|| format!("cannot write under {}", out_dir.display()))?;

    let model = config
        .model
        .as_ref()
        .map(|kind| ModelSpec::new(kind.clone(), config.space.clone()));
    let mut ctx = TaskCtx {
        config,
        space: &config.space,
        model,
        series: None,
        out: out_dir.to_path_buf(),
    };

    let mut tasks = Vec::new();
    let mut checks_pass = true;
    let mut hard_error = false;

    for task in &config.tasks {
        let t0 = Instant::now();
        match run_task(task, &mut ctx) {
            Ok((artifacts, check_ok)) => {
                checks_pass &= check_ok;
                tasks.push(TaskReport {
                    kind: task.kind_name().to_string(),
                    status: if check_ok {
                        "ok".into()
                    } else {
                        "check_failed".into()
                    },
                    artifacts,
                    wall_ms: t0.elapsed().as_millis(),
                });
            }
            Err(e) => {
                tasks.push(TaskReport {
                    kind: task.kind_name().to_string(),
                    status: format!("failed: {e}"),
                    artifacts: vec![],
                    wall_ms: t0.elapsed().as_millis(),
                });
                hard_error = true;
                break;
            }
        }
    }

    let report = RunReport {
        config_hash: loaded.hash.clone(),
        seed: config.run.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        output_dir: out_dir.display().to_string(),
        tasks,
        total_wall_ms: start.elapsed().as_millis(),
        checks_pass,
    };
    let exit_code = if hard_error {
        2
    } else if !checks_pass {
        1
    } else {
        0
    };
    Ok(RunOutcome { report, exit_code })
}

/// Returns (artifact paths, check passed).
fn run_task(task: &TaskConfig, ctx: &mut TaskCtx) -> anyhow::Result<(Vec<String>, bool)> {
    let seed = ctx.config.run.seed;
    match task {
        TaskConfig::Simulate => {
            let space = ctx.space.clone();
            let series = ctx.series()?;
            let mut buf = Vec::new();
            series_io::export_series(series, &space, &mut buf).map_err(|e| anyhow!("{e}"))?;
            Ok((vec![ctx.write("series.csv", &buf)?], true))
        }
        TaskConfig::Hill { k } => {
            let n = ctx.config.run.n;
            let space = ctx.space.clone();
            let moduli = ctx.series()?.moduli(&space);
            let k = k.unwrap_or_else(|| (n as f64).powf(0.7).ceil() as usize);
            let est = estimate::hill(&moduli, k).map_err(|e| anyhow!("{e}"))?;
            let json = serde_json::json!({
                "alpha_hat": est.alpha_hat, "k": est.k, "se": est.se, "seed": seed,
            });
            Ok((
                vec![ctx.write("hill.json", json.to_string().as_bytes())?],
                true,
            ))
        }
        TaskConfig::Spectral { m } => {
            let space = ctx.space.clone();
            let rule = ctx.config.threshold_rule();
            let (emp, moduli) = {
                let series = ctx.series()?;
                let emp = estimate::empirical_spectral(series, &space, *m, rule)
                    .map_err(|e| anyhow!("{e}"))?;
                let moduli = series.moduli(&space);
                (emp, moduli)
            };
            let mut artifacts = Vec::new();

            let mut buf = Vec::new();
            series_io::export_spectral_draws(&emp, &space, &mut buf).map_err(|e| anyhow!("{e}"))?;
            artifacts.push(ctx.write("spectral_draws.csv", &buf)?);

            let mut check_ok = true;
            if let Some(model) = ctx.model.clone() {
                let law = model.true_forward_spectral().map_err(|e| anyhow!("{e}"))?;
                let k = (moduli.len() as f64).powf(0.7).ceil() as usize;
                let alpha_hat = estimate::hill(&moduli, k)
                    .map_err(|e| anyhow!("{e}"))?
                    .alpha_hat;
                let cmp = estimate::compare_spectral(
                    &emp,
                    &law,
                    alpha_hat,
                    &estimate::default_summaries(),
                    50_000,
                    seed,
                )
                .map_err(|e| anyhow!("{e}"))?;
                check_ok = cmp.max_abs_z <= TASK_Z_GATE;
                let json = serde_json::to_string_pretty(&cmp)?;
                artifacts.push(ctx.write("spectral_compare.json", json.as_bytes())?);
            }
            Ok((artifacts, check_ok))
        }
        TaskConfig::Extremogram { lags } => {
            let space = ctx.space.clone();
            let u = ctx.threshold()?;
            let series = ctx.series()?;
            let curve =
                estimate::extremogram(series, &space, lags, u).map_err(|e| anyhow!("{e}"))?;
            let mut buf = Vec::new();
            series_io::export_extremogram(&curve, &mut buf).map_err(|e| anyhow!("{e}"))?;
            let csv = ctx.write("extremogram.csv", &buf)?;
            let json = ctx.write(
                "extremogram.json",
                serde_json::to_string_pretty(&curve)?.as_bytes(),
            )?;
            Ok((vec![csv, json], true))
        }
        TaskConfig::Tailmeasure { m } => {
            let space = ctx.space.clone();
            let u = ctx.threshold()?;
            let series = ctx.series()?;
            let meas = tailmeasure::build_tail_measure(
                series,
                &space,
                *m,
                u,
                tailmeasure::DEFAULT_ATOM_FLOOR,
            )
            .map_err(|e| anyhow!("{e}"))?;
            let mut buf = Vec::new();
            series_io::export_measure_atoms(&meas, &space, &mut buf).map_err(|e| anyhow!("{e}"))?;
            let csv = ctx.write("tailmeasure_atoms.csv", &buf)?;
            let json = ctx.write(
                "tailmeasure.json",
                series_io::measure_sidecar_json(&meas).as_bytes(),
            )?;
            Ok((vec![csv, json], true))
        }
        TaskConfig::VerifyTimechange { s, t, f, n } => {
            let model = ctx
                .model
                .as_ref()
                .ok_or_else(|| anyhow!("verify_timechange needs a model"))?;
            let law = model.true_forward_spectral().map_err(|e| anyhow!("{e}"))?;
            let space = law.space.clone();
            let ff = |w: &Window| f.eval(&space, w);
            let check = spectral::time_change_residual(
                &law,
                &ff,
                *s,
                *t,
                *n,
                seed,
                RngPairing::Independent,
            )
            .map_err(|e| anyhow!("{e}"))?;
            let ok = check.z.abs() <= TASK_Z_GATE;
            let json = serde_json::json!({
                "s": s, "t": t, "f": f, "n": n, "seed": seed,
                "lhs": check.lhs, "rhs": check.rhs, "z": check.z, "pass": ok,
            });
            let path = ctx.write(
                "timechange.json",
                serde_json::to_string_pretty(&json)?.as_bytes(),
            )?;
            Ok((vec![path], ok))
        }
        TaskConfig::VerifyNuk { k, r0, levels, n } => {
            let model = ctx
                .model
                .as_ref()
                .ok_or_else(|| anyhow!("verify_nuk needs a model"))?
                .clone();
            let law = model.true_forward_spectral().map_err(|e| anyhow!("{e}"))?;
            let space = law.space.clone();
            let f = spectral::Functional::ProductExceed {
                levels: levels.clone(),
            };
            let ff = |w: &Window| f.eval(&space, w);
            let formula = spectral::nu_k_integral(
                &law,
                &ff,
                *k,
                *r0,
                *n,
                StreamSeed::named(seed, StreamId::NuK),
            )
            .map_err(|e| anyhow!("{e}"))?;
            let u = ctx.threshold()?;
            let series = ctx.series()?;
            let emp = estimate::empirical_nu_rectangle(series, &space, levels, u)
                .map_err(|e| anyhow!("{e}"))?;
            let z = spectral::z_score(&formula, &emp);
            let ok = z.abs() <= TASK_Z_GATE;
            let json = serde_json::json!({
                "k": k, "r0": r0, "levels": levels, "n": n, "seed": seed, "u": u,
                "formula": formula, "empirical": emp, "z": z, "pass": ok,
            });
            let path = ctx.write("nuk.json", serde_json::to_string_pretty(&json)?.as_bytes())?;
            Ok((vec![path], ok))
        }
        TaskConfig::ValidateSpace { n_samples, tol } => {
            let report = axioms::validate_axioms_default(ctx.space, *n_samples, *tol, seed)
                .map_err(|e| anyhow!("{e}"))?;
            let path = ctx.write("axioms.json", report.to_json().as_bytes())?;
            Ok((vec![path], report.pass))
        }
    }
}
