//! Empirical tail measures on finite windows, and the structural checks
//! they support: projection consistency across window widths and the
//! product (modulus times angle) shape of the exceedance limit.

use crate::error::{Error, Result};
use crate::exec;
use crate::models::SeriesPath;
use crate::point::{Point, Window};
use crate::rng::{self, StreamId, StreamSeed};
use crate::space::Space;
use serde::Serialize;

/// Weighted point cloud approximating the window tail measure: atoms are
/// scaled windows `(X_{s-m}, ..., X_{s+m}) / u`, each of weight
/// `1 / (anchor_count * V_hat(u))`, so the set `{rho(x_0) > 1}` has mass
/// exactly one by construction.
#[derive(Clone, Debug)]
pub struct EmpiricalTailMeasure {
    pub m: usize,
    pub atoms: Vec<(Window, f64)>,
    /// Empirical exceedance rate `V_hat(u)` over the anchor range.
    pub normalizer: f64,
    pub threshold: f64,
    pub anchor_count: usize,
    pub exceed_count: usize,
    /// Atoms whose scaled window max-modulus is at or below this were
    /// dropped; mass queries are exact for sets supported above it.
    pub atom_floor: f64,
}

pub const DEFAULT_ATOM_FLOOR: f64 = 0.01;

pub fn build_tail_measure(
    path: &SeriesPath,
    space: &Space,
    m: usize,
    u: f64,
    atom_floor: f64,
) -> Result<EmpiricalTailMeasure> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {u}"
        )));
    }
    let len = path.len();
    if len < 2 * m + 1 {
        return Err(Error::InsufficientData(format!(
            "path of length {len} is shorter than a window of half-width {m} (need {})",
            2 * m + 1
        )));
    }
    let moduli = path.moduli(space);
    let anchor_count = len - 2 * m;
    let exceed_count = (m..len - m).filter(|s| moduli[*s] > u).count();
    if exceed_count == 0 {
        return Err(Error::NoExceedances {
            threshold: u,
            n: len,
        });
    }
    let normalizer = exceed_count as f64 / anchor_count as f64;
    let weight = 1.0 / (anchor_count as f64 * normalizer);
    let inv_u = 1.0 / u;

    let chunks = exec::map_chunks(anchor_count, exec::CHUNK, |_, range| {
        let mut atoms = Vec::new();
        for i in range {
            let s = i + m;
            let scaled_max = (s - m..=s + m).map(|j| moduli[j]).fold(0.0f64, f64::max) * inv_u;
            if scaled_max <= atom_floor {
                continue;
            }
            let pts = (s - m..=s + m)
                .map(|j| space.scale(inv_u, &path.points[j]))
                .collect();
            atoms.push((Window::symmetric(m, pts), weight));
        }
        atoms
    });
    Ok(EmpiricalTailMeasure {
        m,
        atoms: chunks.concat(),
        normalizer,
        threshold: u,
        anchor_count,
        exceed_count,
        atom_floor,
    })
}

impl EmpiricalTailMeasure {
    /// Total weight of atoms satisfying the predicate. Exact for sets
    /// supported where some coordinate modulus exceeds the atom floor.
    pub fn mass(&self, pred: impl Fn(&Window) -> bool + Sync) -> f64 {
        let partials = exec::map_chunks(self.atoms.len(), exec::CHUNK, |_, range| {
            let mut acc = 0.0;
            for i in range {
                let (w, wt) = &self.atoms[i];
                if pred(w) {
                    acc += wt;
                }
            }
            acc
        });
        exec::pairwise_sum(&partials)
    }

    /// Project onto the narrower window `{-m2, ..., m2}`: atoms truncated,
    /// weights and normalizer untouched. Mass is preserved exactly on
    /// cylinder sets that depend only on retained coordinates.
    pub fn project(&self, m2: usize) -> Result<EmpiricalTailMeasure> {
        if m2 > self.m {
            return Err(Error::ShapeMismatch(format!(
                "cannot project a half-width {} measure onto half-width {m2}",
                self.m
            )));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|(w, wt)| (w.truncate_symmetric(m2).expect("projection narrows"), *wt))
            .collect();
        Ok(EmpiricalTailMeasure {
            m: m2,
            atoms,
            ..self.clone()
        })
    }
}

/// One catalogue set in the projection-consistency comparison:
/// `{windows : rho(x_coord) > level}`.
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyRow {
    pub coord: i64,
    pub level: f64,
    pub mass_narrow: f64,
    pub mass_projected: f64,
    pub abs_diff: f64,
    /// Provable edge bound: the two anchor ranges differ by 2(n-m) windows.
    pub edge_bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub m: usize,
    pub threshold: f64,
    pub rows: Vec<ConsistencyRow>,
    pub max_discrepancy: f64,
    pub pass: bool,
}

/// Build the half-width `n` and half-width `m` measures independently from
/// the same path, project the wide one down, and compare masses over
/// modulus-exceedance sets. The two builds see anchor ranges differing by
/// `2(n - m)` edge windows, which yields an exact per-set bound on the
/// discrepancy; for `n = m` the masses agree exactly.
pub fn projection_consistency(
    path: &SeriesPath,
    space: &Space,
    n: usize,
    m: usize,
    u: f64,
    levels: &[f64],
) -> Result<ConsistencyReport> {
    if m > n {
        return Err(Error::ShapeMismatch(format!(
            "projection needs m <= n, got m = {m}, n = {n}"
        )));
    }
    let wide = build_tail_measure(path, space, n, u, DEFAULT_ATOM_FLOOR)?;
    let narrow = build_tail_measure(path, space, m, u, DEFAULT_ATOM_FLOOR)?;
    let projected = wide.project(m)?;

    let delta = (narrow.anchor_count - wide.anchor_count) as f64;
    let mut rows = Vec::new();
    for coord in -(m as i64)..=(m as i64) {
        for level in levels {
            let pred = |w: &Window| space.modulus(w.at(coord)) > *level;
            let mass_narrow = narrow.mass(pred);
            let mass_projected = projected.mass(pred);
            let abs_diff = (mass_narrow - mass_projected).abs();
            let edge_bound = if delta == 0.0 {
                0.0
            } else {
                delta * mass_projected.max(1.0) / wide.exceed_count as f64
            };
            rows.push(ConsistencyRow {
                coord,
                level: *level,
                mass_narrow,
                mass_projected,
                abs_diff,
                edge_bound,
                within_bound: abs_diff <= edge_bound + 1e-12,
            });
        }
    }
    let max_discrepancy = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.within_bound);
    Ok(ConsistencyReport {
        n,
        m,
        threshold: u,
        rows,
        max_discrepancy,
        pass,
    })
}

/// Empirical angular distribution of exceedances: one unit-modulus atom per
/// anchor with `rho(X_s) > u`, uniform weights summing to one.
#[derive(Clone, Debug)]
pub struct AngularDistribution {
    pub atoms: Vec<(Point, f64)>,
}

pub fn angular_distribution(
    path: &SeriesPath,
    space: &Space,
    u: f64,
) -> Result<AngularDistribution> {
    let moduli = path.moduli(space);
    let mut atoms = Vec::new();
    for (s, rho) in moduli.iter().enumerate() {
        if *rho > u {
            atoms.push(space.polar_decompose(&path.points[s])?.theta);
        }
    }
    if atoms.is_empty() {
        return Err(Error::NoExceedances {
            threshold: u,
            n: path.len(),
        });
    }
    let w = 1.0 / atoms.len() as f64;
    Ok(AngularDistribution {
        atoms: atoms.into_iter().map(|a| (a, w)).collect(),
    })
}

impl AngularDistribution {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Weighted mean of a test function over the atoms.
    pub fn mean_of(&self, f: impl Fn(&Point) -> f64) -> f64 {
        let terms: Vec<f64> = self.atoms.iter().map(|(p, w)| w * f(p)).collect();
        exec::pairwise_sum(&terms)
    }
}

/// Classical two-sided Kolmogorov-Smirnov critical value at 99%, as the
/// coefficient of `1/sqrt(n)`.
pub const KS_CRITICAL_99: f64 = 1.63;

#[derive(Clone, Debug, Serialize)]
pub struct PolarProductReport {
    pub n_exceedances: usize,
    /// Pareto index fitted to the exceedance ratios by maximum likelihood.
    pub alpha_hat: f64,
    pub ks_stat: f64,
    pub ks_band_99: f64,
    pub ks_pass: bool,
    pub bins: usize,
    pub perm_stat: f64,
    pub perm_p: f64,
    /// All angle test functions were constant: the angle is degenerate and
    /// only the Pareto check applies.
    pub angle_degenerate: bool,
    pub homogeneity_pass: bool,
    pub pass: bool,
}

/// A bounded test function of the angle for the homogeneity check.
pub type AngleTest = Box<dyn Fn(&Point) -> f64 + Sync>;

/// Default angle battery: coordinate projections and their squares, capped
/// at the first four coordinates.
pub fn default_angle_tests(space: &Space) -> Vec<AngleTest> {
    let mut fns: Vec<AngleTest> = Vec::new();
    for c in 0..space.dim().min(4) {
        fns.push(Box::new(move |p: &Point| p.coords().map_or(0.0, |v| v[c])));
        fns.push(Box::new(move |p: &Point| {
            p.coords().map_or(0.0, |v| v[c] * v[c])
        }));
    }
    fns
}

/// Check the product structure of exceedances: the scaled modulus
/// `rho(X_s)/u` should follow a Pareto law (Kolmogorov-Smirnov against the
/// fitted index, 99% band), and the angle distribution should not depend on
/// the modulus bin (chi-square-style homogeneity statistic calibrated by
/// permutation of bin labels), tested on the default angle battery.
pub fn polar_product_check(
    path: &SeriesPath,
    space: &Space,
    u: f64,
    modulus_bins: usize,
    n_perms: usize,
    seed: u64,
) -> Result<PolarProductReport> {
    polar_product_check_with(
        path,
        space,
        u,
        modulus_bins,
        n_perms,
        seed,
        &default_angle_tests(space),
    )
}

/// [`polar_product_check`] with caller-supplied angle test functions.
/// Degenerate batteries (every function constant on the sample) short-circuit
/// to the Pareto check alone.
pub fn polar_product_check_with(
    path: &SeriesPath,
    space: &Space,
    u: f64,
    modulus_bins: usize,
    n_perms: usize,
    seed: u64,
    angle_tests: &[AngleTest],
) -> Result<PolarProductReport> {
    let moduli = path.moduli(space);
    let mut pairs: Vec<(f64, usize)> = Vec::new(); // (ratio, point index)
    for (s, rho) in moduli.iter().enumerate() {
        if *rho > u {
            pairs.push((*rho / u, s));
        }
    }
    let n_exc = pairs.len();
    if n_exc == 0 {
        return Err(Error::NoExceedances {
            threshold: u,
            n: path.len(),
        });
    }

    // Pareto fit and KS distance on the ratios
    let sum_log: f64 = pairs.iter().map(|(r, _)| r.ln()).sum();
    let alpha_hat = n_exc as f64 / sum_log;
    let mut ratios: Vec<f64> = pairs.iter().map(|(r, _)| *r).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut ks = 0.0f64;
    for (i, r) in ratios.iter().enumerate() {
        let f = 1.0 - r.powf(-alpha_hat);
        ks = ks.max((f - i as f64 / n_exc as f64).abs());
        ks = ks.max(((i + 1) as f64 / n_exc as f64 - f).abs());
    }
    let ks_band = KS_CRITICAL_99 / (n_exc as f64).sqrt();
    let ks_pass = ks <= ks_band;

    // angle homogeneity across modulus bins
    let degenerate_dim = space.dim() == 1;
    let (bins, perm_stat, perm_p, degenerate) =
        if degenerate_dim || n_exc < 60 || angle_tests.is_empty() {
            (0, 0.0, 1.0, true)
        } else {
            // angles of the exceedance points
            let angles: Vec<Point> = pairs
                .iter()
                .map(|(_, s)| {
                    space
                        .polar_decompose(&path.points[*s])
                        .expect("exceedance is nonzero")
                        .theta
                })
                .collect();
            let values: Vec<Vec<f64>> = angle_tests
                .iter()
                .map(|f| angles.iter().map(f.as_ref()).collect())
                .collect();

            // keep functions with real variation
            let mut active: Vec<&[f64]> = Vec::new();
            for v in &values {
                let mean = v.iter().sum::<f64>() / n_exc as f64;
                let var =
                    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n_exc as f64 - 1.0);
                if var > 1e-18 {
                    active.push(v);
                }
            }
            if active.is_empty() {
                (0, 0.0, 1.0, true)
            } else {
                // sort exceedances by ratio, split into quantile bins of >= 30
                let bins = modulus_bins.min(n_exc / 30).max(2);
                let mut order: Vec<usize> = (0..n_exc).collect();
                order.sort_by(|a, b| pairs[*a].0.partial_cmp(&pairs[*b].0).expect("finite"));
                let sizes: Vec<usize> = (0..bins)
                    .map(|b| (n_exc * (b + 1)) / bins - (n_exc * b) / bins)
                    .collect();

                let stat = homogeneity_stat(&active, &order, &sizes, n_exc);
                let mut rng = StreamSeed::named(seed, StreamId::Permutation).rng();
                let mut geq = 0usize;
                let mut perm = order.clone();
                for _ in 0..n_perms {
                    // Fisher-Yates
                    for i in (1..perm.len()).rev() {
                        let j = (rng::unit_closed_open(&mut rng) * (i + 1) as f64) as usize;
                        perm.swap(i, j.min(i));
                    }
                    if homogeneity_stat(&active, &perm, &sizes, n_exc) >= stat {
                        geq += 1;
                    }
                }
                let p = (1 + geq) as f64 / (n_perms + 1) as f64;
                (bins, stat, p, false)
            }
        };

    let homogeneity_pass = degenerate || perm_p > 0.01;
    Ok(PolarProductReport {
        n_exceedances: n_exc,
        alpha_hat,
        ks_stat: ks,
        ks_band_99: ks_band,
        ks_pass,
        bins,
        perm_stat,
        perm_p,
        angle_degenerate: degenerate,
        homogeneity_pass,
        pass: ks_pass && homogeneity_pass,
    })
}

/// Sum over bins and test functions of `n_b (mean_b - mean)^2 / var`, with
/// bins taken as consecutive blocks of `order`.
fn homogeneity_stat(values: &[&[f64]], order: &[usize], sizes: &[usize], n: usize) -> f64 {
    let mut stat = 0.0;
    for v in values {
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        let mut start = 0usize;
        for sz in sizes {
            let block = &order[start..start + sz];
            let bm = block.iter().map(|i| v[*i]).sum::<f64>() / *sz as f64;
            stat += *sz as f64 * (bm - mean) * (bm - mean) / var;
            start += sz;
        }
    }
    stat
}

#[derive(Clone, Debug, Serialize)]
pub struct TailRatioCurve {
    pub lambdas: Vec<f64>,
    /// `V_hat(lambda u) / V_hat(u)` per lambda.
    pub ratios: Vec<f64>,
    pub se: Vec<f64>,
    pub n_exceed: Vec<usize>,
    /// Log-log slope fit: an estimate of the tail index.
    pub alpha_slope: f64,
}

/// Empirical tail ratio curve at `lambda >= 1`. Points with no exceedances
/// are reported with a zero count, not a hard error.
pub fn tail_ratio_curve(
    path: &SeriesPath,
    space: &Space,
    u: f64,
    lambdas: &[f64],
) -> Result<TailRatioCurve> {
    if lambdas.iter().any(|l| !(*l >= 1.0)) {
        return Err(Error::InvalidParameter(
            "tail ratio grid must have lambda >= 1".into(),
        ));
    }
    let moduli = path.moduli(space);
    let base = moduli.iter().filter(|v| **v > u).count();
    if base == 0 {
        return Err(Error::NoExceedances {
            threshold: u,
            n: path.len(),
        });
    }
    let mut ratios = Vec::with_capacity(lambdas.len());
    let mut ses = Vec::with_capacity(lambdas.len());
    let mut counts = Vec::with_capacity(lambdas.len());
    for l in lambdas {
        let c = moduli.iter().filter(|v| **v > l * u).count();
        let r = c as f64 / base as f64;
        ratios.push(r);
        // exceeding lambda*u is nested inside exceeding u
        ses.push((r * (1.0 - r) / base as f64).sqrt());
        counts.push(c);
    }
    // regression through the origin on the log-log grid
    let mut num = 0.0;
    let mut den = 0.0;
    for (l, r) in lambdas.iter().zip(&ratios) {
        if *r > 0.0 && *l > 1.0 {
            num += l.ln() * r.ln();
            den += l.ln() * l.ln();
        }
    }
    let alpha_slope = if den > 0.0 { -num / den } else { f64::NAN };
    Ok(TailRatioCurve {
        lambdas: lambdas.to_vec(),
        ratios,
        se: ses,
        n_exceed: counts,
        alpha_slope,
    })
}
