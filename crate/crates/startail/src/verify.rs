//! Verification batteries: quantitative checks tying the estimators, the
//! closed-form laws, and the structural identities together. The CLI `verify`
//! subcommand and the acceptance test suite both run these.

use crate::axioms::validate_axioms_default;
use crate::error::{Error, Result};
use crate::estimate::{self, ThresholdRule};
use crate::models::{ModelKind, ModelSpec, SeriesPath};
use crate::point::{Point, Window};
use crate::rng::{self, StreamId, StreamSeed};
use crate::space::Space;
use crate::spectral::{self, Functional, RngPairing};
use crate::tailmeasure;
use serde::Serialize;
use std::time::Instant;

/// Battery sizes: `Desk` is the reference scale, `Smoke` a fast variant with
/// the same thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Smoke,
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::ConfigError(format!(
                "unknown scale '{other}' (smoke or desk)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub detail: String,
    pub pass: bool,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub scale: Scale,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One pass/fail line per criterion.
    pub fn lines(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out.push_str(&format!(
                "{} {} ({} ms): {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.wall_ms,
                c.detail
            ));
        }
        out
    }
}

/// Run one named suite. Suites: `axioms`, `timechange`, `nuk`,
/// `estimator_oracle`.
pub fn run_suite(name: &str, seed: u64, scale: Scale) -> Result<SuiteReport> {
    let criteria = match name {
        "axioms" => vec![criterion_axiom_validator(seed, scale)],
        "timechange" => vec![
            criterion_time_change_battery(seed, scale),
            criterion_moment_bound(seed, scale),
        ],
        "nuk" => vec![criterion_nu_k_agreement(seed, scale)],
        "estimator_oracle" => vec![
            criterion_polar_product(seed, scale),
            criterion_projection_consistency(seed, scale),
            criterion_estimator_oracle(seed, scale),
        ],
        other => return Err(Error::UnknownSuite(other.to_string())),
    };
    let pass = criteria.iter().all(|c| c.pass);
    Ok(SuiteReport {
        suite: name.to_string(),
        seed,
        scale,
        criteria,
        pass,
    })
}

pub const SUITES: [&str; 4] = ["axioms", "timechange", "nuk", "estimator_oracle"];

/// Absolute guard added to 3-sigma bands so exact (zero-variance) cases
/// compare at floating precision.
const EPS_GUARD: f64 = 1e-9;

fn e1() -> Space {
    Space::euclidean(1, 2.0)
}

fn battery_models() -> Vec<(&'static str, ModelSpec)> {
    vec![
        (
            "ar1(0.5,1)",
            ModelSpec::new(
                ModelKind::Ar1Positive {
                    phi: 0.5,
                    alpha: 1.0,
                },
                e1(),
            ),
        ),
        (
            "ar1(0.5,2)",
            ModelSpec::new(
                ModelKind::Ar1Positive {
                    phi: 0.5,
                    alpha: 2.0,
                },
                e1(),
            ),
        ),
        (
            "mma((1,1),1)",
            ModelSpec::new(
                ModelKind::MaxMovingAverage {
                    coeffs: vec![1.0, 1.0],
                    alpha: 1.0,
                },
                e1(),
            ),
        ),
        (
            "iid(1)",
            ModelSpec::new(ModelKind::IidPareto { alpha: 1.0 }, e1()),
        ),
    ]
}

fn fail(name: &str, start: Instant, detail: String) -> CriterionResult {
    CriterionResult {
        name: name.into(),
        detail,
        pass: false,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 1: on every battery model, backward indicator expectations
/// estimated through the telescoping machinery agree with the direct forward
/// weighted form (|z| <= 4 with independent streams), and the backward
/// nonzero probability hits its closed form within 3 standard errors.
pub fn criterion_time_change_battery(seed: u64, scale: Scale) -> CriterionResult {
    let name = "time_change_battery";
    let start = Instant::now();
    let n = match scale {
        Scale::Desk => 100_000,
        Scale::Smoke => 10_000,
    };
    let mut max_z = 0.0f64;
    let mut cases = 0usize;
    for (_, model) in battery_models() {
        let law = match model.true_forward_spectral() {
            Ok(l) => l,
            Err(e) => return fail(name, start, format!("law construction failed: {e}")),
        };
        for s in [1usize, 2] {
            for t in [0usize, 1] {
                for c in [0.5f64, 1.0, 2.0] {
                    let f = Functional::IndicatorExceed {
                        coord: -(s as i64),
                        level: c,
                    };
                    let ff = |w: &Window| f.eval(&law.space, w);
                    let case_seed =
                        seed ^ ((s as u64) << 32) ^ ((t as u64) << 36) ^ (c.to_bits() >> 20);
                    let check = match spectral::time_change_residual(
                        &law,
                        &ff,
                        s,
                        t,
                        n,
                        case_seed,
                        RngPairing::Independent,
                    ) {
                        Ok(c) => c,
                        Err(e) => return fail(name, start, format!("residual failed: {e}")),
                    };
                    cases += 1;
                    max_z = max_z.max(check.z.abs());
                    if check.z.abs() > 4.0 {
                        return fail(
                            name,
                            start,
                            format!(
                                "s={s} t={t} c={c}: lhs {} rhs {} |z| = {:.2} > 4",
                                check.lhs.value, check.rhs.value, check.z
                            ),
                        );
                    }
                }
            }
        }
    }

    // Pr[Theta_{-1} != 0] = phi^alpha = 0.25 for ar1(0.5, 2)
    let ar = ModelSpec::new(
        ModelKind::Ar1Positive {
            phi: 0.5,
            alpha: 2.0,
        },
        e1(),
    );
    let law = ar.true_forward_spectral().expect("valid model");
    let g = Functional::IndicatorNonzero { coord: -1 };
    let gf = |w: &Window| g.eval(&law.space, w);
    let est = match spectral::backward_expectation(
        &law,
        &gf,
        1,
        0,
        n,
        StreamSeed::named(seed, StreamId::SpectralLhs),
    ) {
        Ok(e) => e,
        Err(e) => return fail(name, start, format!("backward expectation failed: {e}")),
    };
    let target = ar.true_backward_nonzero(1).expect("closed form");
    let ok = (est.value - target).abs() <= 3.0 * est.std_error + EPS_GUARD;

    CriterionResult {
        name: name.into(),
        detail: format!(
            "{cases} cases at n={n} per side, max |z| = {max_z:.2}; Pr[Theta_-1 != 0] = {:.4} +- {:.4} (target {target})",
            est.value, est.std_error
        ),
        pass: ok,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 2: `E[rho(Theta_t)^alpha] <= 1 + 3 se` for t <= 10 on every
/// battery law, with the closed-form values hit within 3 standard errors.
pub fn criterion_moment_bound(seed: u64, scale: Scale) -> CriterionResult {
    let name = "moment_bound";
    let start = Instant::now();
    let n = match scale {
        Scale::Desk => 100_000,
        Scale::Smoke => 20_000,
    };
    let mut models = battery_models();
    models.push((
        "path_amplitude(1)",
        ModelSpec::new(
            ModelKind::PathAmplitude {
                alpha: 1.0,
                path: None,
            },
            Space::path_sup(8),
        ),
    ));
    let mut worst = f64::NEG_INFINITY;
    for (label, model) in &models {
        let law = model.true_forward_spectral().expect("valid model");
        for t in 0..=10usize {
            let est = match spectral::spectral_moment(
                &law,
                t,
                n,
                StreamSeed::raw(seed, 0x100 + t as u64),
            ) {
                Ok(e) => e,
                Err(e) => return fail(name, start, format!("{label} t={t}: {e}")),
            };
            let slack = est.value - (1.0 + 3.0 * est.std_error);
            worst = worst.max(slack);
            if slack > EPS_GUARD {
                return fail(
                    name,
                    start,
                    format!(
                        "{label} t={t}: E[rho^alpha] = {} breaks the bound",
                        est.value
                    ),
                );
            }
            let target = model.true_backward_nonzero(t).expect("closed form");
            if (est.value - target).abs() > 3.0 * est.std_error + EPS_GUARD {
                return fail(
                    name,
                    start,
                    format!(
                        "{label} t={t}: {} vs closed form {target} (se {})",
                        est.value, est.std_error
                    ),
                );
            }
        }
    }
    CriterionResult {
        name: name.into(),
        detail: format!(
            "{} laws, t <= 10 at n={n}: bound and closed forms hold (worst bound slack {worst:.2e})",
            models.len()
        ),
        pass: true,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 3: the forward tail-measure formula and the direct finite-u
/// empirical measure agree on a joint exceedance rectangle for ar1(0.5, 1),
/// and both sit at the analytic value 1/2.
pub fn criterion_nu_k_agreement(seed: u64, scale: Scale) -> CriterionResult {
    let name = "nu_k_agreement";
    let start = Instant::now();
    let (n_formula, n_path, q) = match scale {
        Scale::Desk => (200_000, 1_000_000, 0.999),
        Scale::Smoke => (20_000, 100_000, 0.995),
    };
    let model = ModelSpec::new(
        ModelKind::Ar1Positive {
            phi: 0.5,
            alpha: 1.0,
        },
        e1(),
    );
    let law = model.true_forward_spectral().expect("valid model");
    let f = Functional::ProductExceed {
        levels: vec![1.0, 1.0],
    };
    let ff = |w: &Window| f.eval(&law.space, w);
    let formula = match spectral::nu_k_integral(
        &law,
        &ff,
        2,
        1.0,
        n_formula,
        StreamSeed::named(seed, StreamId::NuK),
    ) {
        Ok(e) => e,
        Err(e) => return fail(name, start, format!("formula side failed: {e}")),
    };
    let analytic = 0.5;
    if (formula.value - analytic).abs() > 3.0 * formula.std_error + EPS_GUARD {
        return fail(
            name,
            start,
            format!(
                "formula {} +- {} vs analytic {analytic}",
                formula.value, formula.std_error
            ),
        );
    }

    let path = match model.simulate(n_path, StreamSeed::named(seed, StreamId::Model)) {
        Ok(p) => p,
        Err(e) => return fail(name, start, format!("simulation failed: {e}")),
    };
    let moduli = path.moduli(&model.space);
    let u = match (ThresholdRule::Quantile { q }).resolve(&moduli) {
        Ok(u) => u,
        Err(e) => return fail(name, start, format!("threshold failed: {e}")),
    };
    let emp = match estimate::empirical_nu_rectangle(&path, &model.space, &[1.0, 1.0], u) {
        Ok(e) => e,
        Err(e) => return fail(name, start, format!("empirical side failed: {e}")),
    };
    let z = spectral::z_score(&formula, &emp);
    CriterionResult {
        name: name.into(),
        detail: format!(
            "formula {:.4} +- {:.4}, empirical {:.4} +- {:.4} at u = {u:.1} (|z| = {:.2}, analytic {analytic})",
            formula.value, formula.std_error, emp.value, emp.std_error, z.abs()
        ),
        pass: z.abs() <= 3.0,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 4: exceedances of the independent model factor into a Pareto
/// modulus (fitted KS inside the 99% band) and a bin-independent angle
/// (permutation p > 0.01); exponential-tailed data must fail the KS check.
pub fn criterion_polar_product(seed: u64, scale: Scale) -> CriterionResult {
    let name = "polar_product";
    let start = Instant::now();
    let (n_path, n_perms) = match scale {
        Scale::Desk => (1_000_000, 199),
        Scale::Smoke => (100_000, 99),
    };
    let model = ModelSpec::new(
        ModelKind::IidPareto { alpha: 1.0 },
        Space::euclidean(2, 2.0),
    );
    let path = match model.simulate(n_path, StreamSeed::named(seed, StreamId::Model)) {
        Ok(p) => p,
        Err(e) => return fail(name, start, format!("simulation failed: {e}")),
    };
    let moduli = path.moduli(&model.space);
    let u = match (ThresholdRule::Quantile { q: 0.9 }).resolve(&moduli) {
        Ok(u) => u,
        Err(e) => return fail(name, start, format!("threshold failed: {e}")),
    };
    let rep = match tailmeasure::polar_product_check(&path, &model.space, u, 5, n_perms, seed) {
        Ok(r) => r,
        Err(e) => return fail(name, start, format!("check failed: {e}")),
    };
    if !rep.ks_pass || !rep.homogeneity_pass {
        return fail(
            name,
            start,
            format!(
                "ks {:.4} vs band {:.4}, perm p = {:.3}",
                rep.ks_stat, rep.ks_band_99, rep.perm_p
            ),
        );
    }

    // power check: exponential moduli with the same angles must fail
    let space = Space::euclidean(2, 2.0);
    let mut rng = StreamSeed::named(seed, StreamId::Permutation).chunk_rng(7);
    let points: Vec<Point> = (0..n_path)
        .map(|_| {
            let e = 1.0 - rng::unit_open_closed(&mut rng).ln();
            let (a, b) = rng::gaussian_pair(&mut rng);
            let norm = (a * a + b * b).sqrt().max(1e-300);
            Point::dense(vec![e * a / norm, e * b / norm])
        })
        .collect();
    let light = SeriesPath {
        points,
        seed: StreamSeed::named(seed, StreamId::Permutation),
        burn_in: 0,
    };
    let lmoduli = light.moduli(&space);
    let lu = match (ThresholdRule::Quantile { q: 0.9 }).resolve(&lmoduli) {
        Ok(u) => u,
        Err(e) => return fail(name, start, format!("power threshold failed: {e}")),
    };
    let lrep = match tailmeasure::polar_product_check(&light, &space, lu, 5, n_perms, seed ^ 1) {
        Ok(r) => r,
        Err(e) => return fail(name, start, format!("power check failed: {e}")),
    };
    let power_ok = !lrep.ks_pass;
    CriterionResult {
        name: name.into(),
        detail: format!(
            "{} exceedances: ks {:.4} <= band {:.4}, perm p = {:.3}; exponential data ks {:.4} (fails band: {power_ok})",
            rep.n_exceedances, rep.ks_stat, rep.ks_band_99, rep.perm_p, lrep.ks_stat
        ),
        pass: power_ok,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 5: projecting the width-2 empirical tail measure onto width 1
/// deviates from the directly built width-1 measure by at most the exact
/// edge-window bound, and not at all when the widths agree.
pub fn criterion_projection_consistency(seed: u64, scale: Scale) -> CriterionResult {
    let name = "projection_consistency";
    let start = Instant::now();
    let n_path = match scale {
        Scale::Desk => 10_000,
        Scale::Smoke => 2_000,
    };
    let model = ModelSpec::new(ModelKind::IidPareto { alpha: 1.0 }, e1());
    let path = match model.simulate(n_path, StreamSeed::named(seed, StreamId::Model)) {
        Ok(p) => p,
        Err(e) => return fail(name, start, format!("simulation failed: {e}")),
    };
    let moduli = path.moduli(&model.space);
    let u = match (ThresholdRule::Quantile { q: 0.95 }).resolve(&moduli) {
        Ok(u) => u,
        Err(e) => return fail(name, start, format!("threshold failed: {e}")),
    };
    let rep =
        match tailmeasure::projection_consistency(&path, &model.space, 2, 1, u, &[0.5, 1.0, 2.0]) {
            Ok(r) => r,
            Err(e) => return fail(name, start, format!("comparison failed: {e}")),
        };
    let same =
        match tailmeasure::projection_consistency(&path, &model.space, 1, 1, u, &[0.5, 1.0, 2.0]) {
            Ok(r) => r,
            Err(e) => return fail(name, start, format!("identity comparison failed: {e}")),
        };
    let pass = rep.pass && same.max_discrepancy == 0.0;
    CriterionResult {
        name: name.into(),
        detail: format!(
            "n=2 vs m=1 max discrepancy {:.3e} within edge bounds: {}; n=m discrepancy {:.1}",
            rep.max_discrepancy, rep.pass, same.max_discrepancy
        ),
        pass,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 6: the axiom validator passes the well-behaved spaces and flags the
/// weighted-Hilbert truncation with the basis witness.
pub fn criterion_axiom_validator(seed: u64, scale: Scale) -> CriterionResult {
    let name = "axiom_validator";
    let start = Instant::now();
    let n = match scale {
        Scale::Desk => 100_000,
        Scale::Smoke => 10_000,
    };
    let well_behaved = [
        Space::euclidean(3, 2.0),
        Space::path_sup(16),
        Space::snowflake_gauge(2, 0.5),
    ];
    for s in &well_behaved {
        let r = match validate_axioms_default(s, n, 1e-9, seed) {
            Ok(r) => r,
            Err(e) => return fail(name, start, format!("{}: {e}", s.descriptor())),
        };
        if !r.pass || r.separation_flagged {
            return fail(
                name,
                start,
                format!(
                    "{}: pass={} flagged={}",
                    s.descriptor(),
                    r.pass,
                    r.separation_flagged
                ),
            );
        }
    }
    let wh = Space::weighted_hilbert(100);
    let r = match validate_axioms_default(&wh, n, 1e-9, seed) {
        Ok(r) => r,
        Err(e) => return fail(name, start, format!("weighted_hilbert: {e}")),
    };
    let witness_ok = r.basis_trend.flagged
        && (r.basis_trend.witness_modulus - 0.1).abs() <= 1e-9
        && (r.basis_trend.witness_dist - 1.0).abs() <= 1e-9;
    let pass = r.pass && r.separation_flagged && witness_ok;
    CriterionResult {
        name: name.into(),
        detail: format!(
            "euclidean/path_sup/snowflake pass at n={n}; weighted_hilbert(100) flagged={} witness rho={:.3} dist={:.3} (basis slope {:.2})",
            r.separation_flagged,
            r.basis_trend.witness_modulus,
            r.basis_trend.witness_dist,
            r.basis_trend.slope,
        ),
        pass,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Criterion 7: estimators close the loop against the oracles — Hill
/// recovers alpha within 10%, the empirical spectral lag-1 modulus sits at
/// phi, the empirical extremogram matches its closed form.
pub fn criterion_estimator_oracle(seed: u64, scale: Scale) -> CriterionResult {
    let name = "estimator_oracle";
    let start = Instant::now();
    // the spectral median and extremogram checks need the threshold deep in
    // the tail, so the smoke scale shrinks the path but keeps the quantile
    let (hill_n, hill_k, path_n, q) = match scale {
        Scale::Desk => (100_000, 1000, 1_000_000, 0.999),
        Scale::Smoke => (20_000, 500, 200_000, 0.999),
    };

    let mut details = Vec::new();
    for alpha in [1.0f64, 2.0] {
        let model = ModelSpec::new(ModelKind::IidPareto { alpha }, e1());
        let path = match model.simulate(hill_n, StreamSeed::raw(seed, alpha.to_bits())) {
            Ok(p) => p,
            Err(e) => return fail(name, start, format!("simulation failed: {e}")),
        };
        let est = match estimate::hill(&path.moduli(&model.space), hill_k) {
            Ok(e) => e,
            Err(e) => return fail(name, start, format!("hill failed: {e}")),
        };
        if (est.alpha_hat - alpha).abs() > 0.10 * alpha {
            return fail(
                name,
                start,
                format!("hill alpha_hat = {} for alpha = {alpha}", est.alpha_hat),
            );
        }
        details.push(format!("hill({alpha}) = {:.3}", est.alpha_hat));
    }

    // empirical spectral: lag-1 modulus of ar1(0.5, 2) concentrates at phi
    let ar = ModelSpec::new(
        ModelKind::Ar1Positive {
            phi: 0.5,
            alpha: 2.0,
        },
        e1(),
    );
    let path = match ar.simulate(path_n, StreamSeed::named(seed, StreamId::Model)) {
        Ok(p) => p,
        Err(e) => return fail(name, start, format!("simulation failed: {e}")),
    };
    let emp = match estimate::empirical_spectral(&path, &ar.space, 1, ThresholdRule::Quantile { q })
    {
        Ok(e) => e,
        Err(e) => return fail(name, start, format!("empirical spectral failed: {e}")),
    };
    let mut lag1: Vec<f64> = emp
        .draws
        .iter()
        .map(|w| ar.space.modulus(w.at(1)))
        .collect();
    lag1.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = lag1[lag1.len() / 2];
    if !(0.45..=0.55).contains(&median) {
        return fail(
            name,
            start,
            format!("lag-1 modulus median = {median:.3} outside [0.45, 0.55]"),
        );
    }
    details.push(format!("spectral lag-1 median = {median:.3}"));

    // extremogram of ar1(0.5, 1) vs its closed form
    let ar1 = ModelSpec::new(
        ModelKind::Ar1Positive {
            phi: 0.5,
            alpha: 1.0,
        },
        e1(),
    );
    let path = match ar1.simulate(path_n, StreamSeed::raw(seed, 0xA11CE)) {
        Ok(p) => p,
        Err(e) => return fail(name, start, format!("simulation failed: {e}")),
    };
    let moduli = path.moduli(&ar1.space);
    let u = match (ThresholdRule::Quantile { q }).resolve(&moduli) {
        Ok(u) => u,
        Err(e) => return fail(name, start, format!("threshold failed: {e}")),
    };
    let curve = match estimate::extremogram(&path, &ar1.space, &[0, 1], u) {
        Ok(c) => c,
        Err(e) => return fail(name, start, format!("extremogram failed: {e}")),
    };
    let target = ar1.true_extremogram(1).expect("closed form");
    let ok =
        (curve.values[1] - target).abs() <= 3.0 * curve.se[1] + EPS_GUARD && curve.values[0] == 1.0;
    details.push(format!(
        "extremogram lag-1 = {:.3} +- {:.3} (target {target})",
        curve.values[1], curve.se[1]
    ));

    CriterionResult {
        name: name.into(),
        detail: details.join("; "),
        pass: ok,
        wall_ms: start.elapsed().as_millis(),
    }
}
