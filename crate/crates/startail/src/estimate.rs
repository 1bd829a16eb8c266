//! Data-driven estimators: tail index, empirical spectral process,
//! extremogram, and the estimator-vs-law comparison harness.
//!
//! Standard errors here ignore serial dependence (they are exact for
//! independent data and indicative otherwise); batteries that consume them
//! use conservative thresholds.

use crate::error::{Error, Result};
use crate::exec;
use crate::models::SeriesPath;
use crate::point::Window;
use crate::rng::{StreamId, StreamSeed};
use crate::space::Space;
use crate::spectral::{self, MCEstimate, SpectralLaw};
use serde::{Deserialize, Serialize};

/// Hill estimate of the tail index.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailIndexEstimate {
    pub alpha_hat: f64,
    pub k: usize,
    /// Asymptotic standard error `alpha_hat / sqrt(k)`.
    pub se: f64,
}

/// Hill estimator on nonnegative moduli:
/// `alpha_hat = k / sum_{i=1}^{k} log(X_(i) / X_(k+1))`
/// over descending order statistics, ties broken by stable sort.
pub fn hill(moduli: &[f64], k: usize) -> Result<TailIndexEstimate> {
    if k == 0 {
        return Err(Error::InvalidParameter("hill: k must be >= 1".into()));
    }
    let mut positive: Vec<f64> = moduli.iter().copied().filter(|v| *v > 0.0).collect();
    if positive.len() < k + 1 {
        return Err(Error::InsufficientData(format!(
            "hill: need at least k+1 = {} strictly positive values, have {}",
            k + 1,
            positive.len()
        )));
    }
    positive.sort_by(|a, b| b.partial_cmp(a).expect("finite moduli"));
    let threshold = positive[k];
    if threshold <= 0.0 {
        return Err(Error::NonPositiveThreshold);
    }
    let sum_log: f64 = positive[..k].iter().map(|x| (x / threshold).ln()).sum();
    if sum_log <= 0.0 {
        return Err(Error::InsufficientData(
            "hill: degenerate sample, top order statistics are all equal".into(),
        ));
    }
    let alpha_hat = k as f64 / sum_log;
    Ok(TailIndexEstimate {
        alpha_hat,
        k,
        se: alpha_hat / (k as f64).sqrt(),
    })
}

/// How the exceedance threshold u is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Use this value directly.
    Value { u: f64 },
    /// The (k+1)-th largest modulus, so about k values exceed.
    TopK { k: usize },
    /// Empirical quantile, e.g. q = 0.999.
    Quantile { q: f64 },
}

impl ThresholdRule {
    /// Order-statistic default: k = ceil(n^0.7).
    pub fn default_for(n: usize) -> Self {
        ThresholdRule::TopK {
            k: (n as f64).powf(0.7).ceil() as usize,
        }
    }

    pub fn resolve(&self, moduli: &[f64]) -> Result<f64> {
        let n = moduli.len();
        match self {
            ThresholdRule::Value { u } => {
                if !(*u > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "threshold must be positive, got {u}"
                    )));
                }
                Ok(*u)
            }
            ThresholdRule::TopK { k } => {
                if *k == 0 || *k >= n {
                    return Err(Error::InvalidParameter(format!(
                        "top_k threshold needs 1 <= k < n, got k = {k}, n = {n}"
                    )));
                }
                let mut sorted = moduli.to_vec();
                sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite moduli"));
                let u = sorted[*k];
                if !(u > 0.0) {
                    return Err(Error::InsufficientData(
                        "top_k threshold landed on a zero modulus".into(),
                    ));
                }
                Ok(u)
            }
            ThresholdRule::Quantile { q } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "quantile must be in (0, 1), got {q}"
                    )));
                }
                let mut sorted = moduli.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite moduli"));
                let idx = ((n as f64 - 1.0) * q).round() as usize;
                let u = sorted[idx.min(n - 1)];
                if !(u > 0.0) {
                    return Err(Error::InsufficientData("quantile threshold is zero".into()));
                }
                Ok(u)
            }
        }
    }
}

/// Empirical spectral draws: one window per exceedance anchor, scaled by the
/// anchor modulus so the center has modulus one.
#[derive(Clone, Debug)]
pub struct EmpiricalSpectral {
    pub m: usize,
    pub space: Space,
    pub draws: Vec<Window>,
    pub threshold: f64,
    pub anchor_count: usize,
    /// Finite-u surrogate for the exact atom at zero: a coordinate with
    /// modulus at or below this (in normalized units) counts as zero mass.
    pub zero_eta: f64,
}

/// Collect the conditional windows `(X_{s-m}, ..., X_{s+m}) / rho(X_s)` over
/// all anchors s with `rho(X_s) > u` and a full window. Overlapping windows
/// are kept: each exceedance is one draw.
pub fn empirical_spectral(
    path: &SeriesPath,
    space: &Space,
    m: usize,
    rule: ThresholdRule,
) -> Result<EmpiricalSpectral> {
    let len = path.len();
    if len < 2 * m + 1 {
        return Err(Error::InsufficientData(format!(
            "path of length {len} cannot hold a window of half-width {m}"
        )));
    }
    let moduli = path.moduli(space);
    let u = rule.resolve(&moduli)?;
    let anchors: Vec<usize> = (m..len - m).filter(|s| moduli[*s] > u).collect();
    if anchors.is_empty() {
        return Err(Error::NoExceedances {
            threshold: u,
            n: len,
        });
    }
    let chunks = exec::map_chunks(anchors.len(), exec::CHUNK, |_, range| {
        range
            .map(|i| {
                let s = anchors[i];
                let inv = 1.0 / moduli[s];
                let pts = (s - m..=s + m)
                    .map(|j| space.scale(inv, &path.points[j]))
                    .collect();
                Window::symmetric(m, pts)
            })
            .collect::<Vec<_>>()
    });
    Ok(EmpiricalSpectral {
        m,
        space: space.clone(),
        draws: chunks.concat(),
        threshold: u,
        anchor_count: len - 2 * m,
        zero_eta: 0.1,
    })
}

impl EmpiricalSpectral {
    /// Mean of `f` over the draws, with the independence-based standard
    /// error.
    pub fn summarize(&self, f: impl Fn(&Window) -> f64 + Sync) -> MCEstimate {
        let n = self.draws.len();
        let partials = exec::map_chunks(n, exec::CHUNK, |_, range| {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for i in range {
                let v = f(&self.draws[i]);
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        });
        let sums: Vec<f64> = partials.iter().map(|p| p.0).collect();
        let sumsqs: Vec<f64> = partials.iter().map(|p| p.1).collect();
        let mean = exec::pairwise_sum(&sums) / n as f64;
        let var = if n >= 2 {
            ((exec::pairwise_sum(&sumsqs) - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0)
        } else {
            0.0
        };
        MCEstimate {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Fraction of draws whose coordinate at `lag` is zero-mass under the
    /// finite-u surrogate.
    pub fn zero_mass(&self, lag: i64) -> MCEstimate {
        let eta = self.zero_eta;
        let space = self.space.clone();
        self.summarize(move |w| {
            if space.modulus(w.at(lag)) <= eta {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Lag-indexed conditional exceedance frequencies
/// `Pr[rho(X_{s+t}) > u | rho(X_s) > u]`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtremogramCurve {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Binomial standard errors, serial dependence ignored.
    pub se: Vec<f64>,
    pub threshold: f64,
    pub n_exceedances: usize,
}

pub fn extremogram(
    path: &SeriesPath,
    space: &Space,
    lags: &[usize],
    u: f64,
) -> Result<ExtremogramCurve> {
    if lags.is_empty() {
        return Err(Error::InvalidParameter(
            "extremogram: need at least one lag".into(),
        ));
    }
    let max_lag = *lags.iter().max().expect("nonempty");
    let len = path.len();
    if len <= max_lag {
        return Err(Error::InsufficientData(format!(
            "path of length {len} cannot reach lag {max_lag}"
        )));
    }
    let moduli = path.moduli(space);
    // one shared anchor range so every lag conditions on the same event
    let anchors = 0..len - max_lag;
    let exceed: Vec<usize> = anchors.filter(|s| moduli[*s] > u).collect();
    if exceed.is_empty() {
        return Err(Error::NoExceedances {
            threshold: u,
            n: len,
        });
    }
    let n_exc = exceed.len();
    let mut values = Vec::with_capacity(lags.len());
    let mut ses = Vec::with_capacity(lags.len());
    for &t in lags {
        let hits = exceed.iter().filter(|s| moduli[*s + t] > u).count();
        let v = hits as f64 / n_exc as f64;
        values.push(v);
        ses.push((v * (1.0 - v) / n_exc as f64).sqrt());
    }
    Ok(ExtremogramCurve {
        lags: lags.to_vec(),
        values,
        se: ses,
        threshold: u,
        n_exceedances: n_exc,
    })
}

/// Direct empirical estimate of the forward tail measure on a rectangle:
/// `#{s : rho(X_{s+i}) > levels_i * u for all i} / #{s : rho(X_s) > u}`,
/// both counts over the same anchor range. The standard error is a
/// Poisson-ratio approximation that ignores serial dependence.
pub fn empirical_nu_rectangle(
    path: &SeriesPath,
    space: &Space,
    levels: &[f64],
    u: f64,
) -> Result<MCEstimate> {
    let k = levels.len();
    if k == 0 {
        return Err(Error::InvalidParameter(
            "empirical_nu_rectangle: need at least one level".into(),
        ));
    }
    let len = path.len();
    if len <= k {
        return Err(Error::InsufficientData(format!(
            "path of length {len} cannot hold k = {k} lags"
        )));
    }
    let moduli = path.moduli(space);
    let mut exceed = 0usize;
    let mut hits = 0usize;
    for s in 0..len - k {
        if moduli[s] > u {
            exceed += 1;
        }
        if (0..k).all(|i| moduli[s + 1 + i] > levels[i] * u) {
            hits += 1;
        }
    }
    if exceed == 0 {
        return Err(Error::NoExceedances {
            threshold: u,
            n: len,
        });
    }
    let value = hits as f64 / exceed as f64;
    let se = if hits > 0 {
        value * ((1.0 / hits as f64) + (1.0 / exceed as f64)).sqrt()
    } else {
        1.0 / exceed as f64
    };
    Ok(MCEstimate {
        value,
        std_error: se,
        n: exceed,
    })
}

/// One row of the estimator-vs-law comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub lag: i64,
    pub summary: String,
    pub empirical: MCEstimate,
    pub law: MCEstimate,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralComparison {
    pub rows: Vec<ComparisonRow>,
    pub max_abs_z: f64,
    /// Exponent used in the alpha-power summaries (plug-in Hill estimate by
    /// default; the law's alpha when isolating estimator error).
    pub summary_alpha: f64,
}

/// Exceedance level for the default comparison summaries. Chosen off the
/// atoms of every builtin law (which sit at 0, powers of 1/2 and their
/// reciprocals, and 1) so the indicator is not evaluated on a knife edge.
pub const COMPARE_EXCEED_LEVEL: f64 = 0.75;

/// Per-lag summary functionals of the modulus for the estimator-vs-law
/// comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SpectralSummary {
    /// Mean of `rho^alpha`. Unbounded: informative when the law's modulus
    /// ratios are bounded (autoregressive, moving-average laws); for
    /// single-big-value laws the finite-threshold bias of this summary
    /// decays only logarithmically and swamps any z-test.
    AlphaPowerMean,
    /// `Pr[rho > level]`.
    ExceedProb { level: f64 },
    /// `Pr[rho <= eta]`, the finite-threshold surrogate of the atom at zero.
    ZeroMass,
}

impl SpectralSummary {
    fn name(&self) -> String {
        match self {
            SpectralSummary::AlphaPowerMean => "alpha_power_mean".into(),
            SpectralSummary::ExceedProb { level } => format!("exceed_{level}"),
            SpectralSummary::ZeroMass => "zero_mass".into(),
        }
    }

    fn apply(&self, rho: f64, alpha: f64, eta: f64) -> f64 {
        match self {
            SpectralSummary::AlphaPowerMean => rho.powf(alpha),
            SpectralSummary::ExceedProb { level } => {
                if rho > *level {
                    1.0
                } else {
                    0.0
                }
            }
            SpectralSummary::ZeroMass => {
                if rho <= eta {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Bounded summaries, valid for every law.
pub fn default_summaries() -> Vec<SpectralSummary> {
    vec![
        SpectralSummary::ExceedProb {
            level: COMPARE_EXCEED_LEVEL,
        },
        SpectralSummary::ZeroMass,
    ]
}

/// Compare the empirical spectral draws against a law, lag by lag, on the
/// given summaries. Negative lags on the law side go through the backward
/// machinery.
pub fn compare_spectral(
    emp: &EmpiricalSpectral,
    law: &SpectralLaw,
    summary_alpha: f64,
    summaries: &[SpectralSummary],
    n_law: usize,
    seed: u64,
) -> Result<SpectralComparison> {
    if emp.space.kind != law.space.kind {
        return Err(Error::ShapeMismatch(format!(
            "empirical draws live in {} but the law in {}",
            emp.space.descriptor(),
            law.space.descriptor()
        )));
    }
    let m = emp.m;
    let space = &law.space;
    let eta = emp.zero_eta;
    let mut rows = Vec::new();

    for lag in -(m as i64)..=(m as i64) {
        for (si, summary) in summaries.iter().enumerate() {
            let h = |rho: f64| summary.apply(rho, summary_alpha, eta);
            let empirical = emp.summarize(|w| h(space.modulus(w.at(lag))));
            let law_seed = StreamSeed::raw(
                seed,
                StreamId::LawSample as u64 ^ ((lag as u64) << 8) ^ ((si as u64) << 40),
            );
            let law_est = if lag >= 0 {
                spectral::mc_estimate(law_seed, n_law, |rng| {
                    let draw = law.sample_forward(lag as usize, rng);
                    h(space.modulus(&draw[lag as usize]))
                })
            } else {
                let g = |p: &crate::point::Point| h(space.modulus(p));
                spectral::theta_backward_law(law, (-lag) as usize, &g, n_law, law_seed)?
            };
            let z = spectral::z_score(&empirical, &law_est);
            rows.push(ComparisonRow {
                lag,
                summary: summary.name(),
                empirical,
                law: law_est,
                z,
            });
        }
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(SpectralComparison {
        rows,
        max_abs_z,
        summary_alpha,
    })
}
