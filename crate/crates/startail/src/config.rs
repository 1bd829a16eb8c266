//! Typed experiment configuration. The file format is TOML: a `[space]`
//! block, an optional `[model]` block or input file, a `[run]` block, and an
//! ordered list of `[[task]]` entries. The CLI documents the grammar.

use crate::error::{Error, Result};
use crate::estimate::ThresholdRule;
use crate::models::{ModelKind, ModelSpec};
use crate::space::Space;
use crate::spectral::Functional;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: Space,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    /// CSV series to ingest instead of simulating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub run: RunBlock,
    #[serde(default, rename = "task")]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunBlock {
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Threshold rule shared by exceedance-based tasks; defaults to the
    /// order-statistic rule k = ceil(n^0.7).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdRule>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    /// Simulate the configured model and write the series CSV.
    Simulate,
    /// Hill tail-index estimate on the series moduli.
    Hill {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    /// Empirical spectral draws, compared against the model law when one is
    /// configured.
    Spectral { m: usize },
    /// Conditional exceedance curve over these lags.
    Extremogram { lags: Vec<usize> },
    /// Empirical window tail measure of half-width m.
    Tailmeasure { m: usize },
    /// Time-change residual check for a catalogue functional.
    VerifyTimechange {
        s: usize,
        t: usize,
        f: Functional,
        n: usize,
    },
    /// Forward tail-measure integral vs the direct empirical rectangle.
    VerifyNuk {
        k: usize,
        r0: f64,
        levels: Vec<f64>,
        n: usize,
    },
    /// Axiom validation of the configured space.
    ValidateSpace { n_samples: usize, tol: f64 },
}

impl TaskConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TaskConfig::Simulate => "simulate",
            TaskConfig::Hill { .. } => "hill",
            TaskConfig::Spectral { .. } => "spectral",
            TaskConfig::Extremogram { .. } => "extremogram",
            TaskConfig::Tailmeasure { .. } => "tailmeasure",
            TaskConfig::VerifyTimechange { .. } => "verify_timechange",
            TaskConfig::VerifyNuk { .. } => "verify_nuk",
            TaskConfig::ValidateSpace { .. } => "validate_space",
        }
    }
}

impl ExperimentConfig {
    /// Type-check the configuration against the modules' preconditions
    /// before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.model.is_none() && self.input.is_none() {
            return Err(Error::ConfigError(
                "need either a [model] block or run.input".into(),
            ));
        }
        if let Some(kind) = &self.model {
            ModelSpec::new(kind.clone(), self.space.clone()).validate()?;
        }
        if self.run.n == 0 {
            return Err(Error::ConfigError("run.n must be >= 1".into()));
        }
        let needs_series = |t: &TaskConfig| {
            matches!(
                t,
                TaskConfig::Hill { .. }
                    | TaskConfig::Spectral { .. }
                    | TaskConfig::Extremogram { .. }
                    | TaskConfig::Tailmeasure { .. }
            )
        };
        for t in &self.tasks {
            match t {
                TaskConfig::Hill { k: Some(k) } => {
                    if *k == 0 || *k >= self.run.n {
                        return Err(Error::ConfigError(format!(
                            "task hill: k = {k} out of range for n = {}",
                            self.run.n
                        )));
                    }
                }
                TaskConfig::Spectral { m } | TaskConfig::Tailmeasure { m } => {
                    if self.run.n < 2 * m + 1 {
                        return Err(Error::ConfigError(format!(
                            "task {}: window half-width {m} too wide for n = {}",
                            t.kind_name(),
                            self.run.n
                        )));
                    }
                }
                TaskConfig::Extremogram { lags } => {
                    if lags.is_empty() {
                        return Err(Error::ConfigError(
                            "task extremogram: lags must be nonempty".into(),
                        ));
                    }
                }
                TaskConfig::VerifyTimechange { f, n, .. } => {
                    f.validate()?;
                    if *n < 2 {
                        return Err(Error::ConfigError(
                            "task verify_timechange: n must be >= 2".into(),
                        ));
                    }
                    if self.model.is_none() {
                        return Err(Error::ConfigError(
                            "task verify_timechange needs a [model] block (law checks run on model laws)".into(),
                        ));
                    }
                }
                TaskConfig::VerifyNuk { k, r0, levels, n } => {
                    if *k == 0 || levels.len() != *k {
                        return Err(Error::ConfigError(format!(
                            "task verify_nuk: need k >= 1 levels matching k, got k = {k}, {} levels",
                            levels.len()
                        )));
                    }
                    if !(*r0 > 0.0) {
                        return Err(Error::ConfigError(
                            "task verify_nuk: r0 must be positive".into(),
                        ));
                    }
                    if *n < 2 {
                        return Err(Error::ConfigError("task verify_nuk: n must be >= 2".into()));
                    }
                    if self.model.is_none() {
                        return Err(Error::ConfigError(
                            "task verify_nuk needs a [model] block".into(),
                        ));
                    }
                }
                TaskConfig::ValidateSpace { n_samples, tol }
                    if *n_samples == 0 || !(*tol > 0.0) =>
                {
                    return Err(Error::ConfigError(
                        "task validate_space: n_samples >= 1 and tol > 0 required".into(),
                    ));
                }
                _ => {}
            }
            if needs_series(t) && self.model.is_none() && self.input.is_none() {
                return Err(Error::ConfigError(format!(
                    "task {} needs a series (model or input)",
                    t.kind_name()
                )));
            }
        }
        Ok(())
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        self.run
            .threshold
            .unwrap_or_else(|| ThresholdRule::default_for(self.run.n))
    }
}
