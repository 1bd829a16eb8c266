//! Spectral tail processes and the identities that tie the forward law to
//! everything else.
//!
//! A spectral law is a samplable forward process `(Theta_0, Theta_1, ...)`
//! with `rho(Theta_0) = 1` and a tail index `alpha`. Stationarity of the
//! underlying series forces:
//!
//! * the moment bound `E[rho(Theta_t)^alpha] <= 1`;
//! * the time-change formula
//!   `E[f(Theta_{-s}, ..., Theta_t)] =
//!    E[f(Theta_0/rho(Theta_s), ..., Theta_{t+s}/rho(Theta_s)) rho(Theta_s)^alpha]`
//!   for f vanishing when its first argument is zero;
//! * a telescoping extension of the same formula valid for arbitrary
//!   integrable g, which lets every backward expectation be computed from
//!   forward samples only;
//! * the one-coordinate backward law: an atom at the origin of mass
//!   `1 - E[rho(Theta_t)^alpha]` plus the image of
//!   `Theta_0 / rho(Theta_t)` weighted by `rho(Theta_t)^alpha`;
//! * the forward tail measure `nu_k`, an explicit mixture over which
//!   coordinate is the first to be large.
//!
//! Every estimator here is a deterministic function of `(inputs, seed)`:
//! work is chunked with fixed boundaries, each chunk draws from its own
//! keyed stream, and partials reduce pairwise in chunk order.

use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::point::{Point, WeightedWindow, Window};
use crate::rng::{self, StreamId, StreamSeed};
use crate::space::Space;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Floor under combined standard errors when forming z-scores, so exact
/// (zero-variance) cases compare at floating precision instead of 0/0.
pub const SE_FLOOR: f64 = 1e-12;

/// Two-sample z-score with the degenerate-variance floor.
pub fn z_score(a: &MCEstimate, b: &MCEstimate) -> f64 {
    let diff = a.value - b.value;
    if diff == 0.0 {
        return 0.0;
    }
    diff / (a.std_error.hypot(b.std_error)).max(SE_FLOOR)
}

/// Chunked Monte Carlo mean in the given execution mode. The result is a
/// pure function of `(seed, n)`: fixed chunk boundaries, one keyed stream
/// per chunk, pairwise reduction in chunk order.
pub fn mc_estimate_in(
    mode: Mode,
    seed: StreamSeed,
    n: usize,
    eval: impl Fn(&mut ChaCha8Rng) -> f64 + Sync,
) -> MCEstimate {
    assert!(n >= 1, "mc_estimate needs n >= 1");
    let partials = exec::map_chunks_in(mode, n, exec::CHUNK, |c, range| {
        let mut rng = seed.chunk_rng(c as u64);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in range {
            let v = eval(&mut rng);
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

pub fn mc_estimate(
    seed: StreamSeed,
    n: usize,
    eval: impl Fn(&mut ChaCha8Rng) -> f64 + Sync,
) -> MCEstimate {
    mc_estimate_in(Mode::default(), seed, n, eval)
}

/// Distribution of the unit-modulus angle `Theta_0`.
#[derive(Clone, Debug)]
pub enum AngleLaw {
    /// The scalar unit point.
    UnitScalar,
    /// Gaussian direction normalized to unit modulus.
    UniformDirection,
    /// A fixed deterministic unit-modulus point.
    FixedPoint(Point),
}

impl AngleLaw {
    fn sample(&self, space: &Space, rng: &mut ChaCha8Rng) -> Point {
        match self {
            AngleLaw::UnitScalar => Point::scalar(1.0),
            AngleLaw::FixedPoint(p) => p.clone(),
            AngleLaw::UniformDirection => {
                let dim = space.dim();
                let mut coords = Vec::with_capacity(dim);
                while coords.len() < dim {
                    let (a, b) = rng::gaussian_pair(rng);
                    coords.push(a);
                    if coords.len() < dim {
                        coords.push(b);
                    }
                }
                let p = Point::dense(coords);
                let rho = space.modulus(&p);
                space.scale(1.0 / rho, &p)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum LawKind {
    /// One big value with no propagation: `Theta_0` from the angle law,
    /// exact zero afterwards (independent series, amplitude paths).
    SingleBig { angle: AngleLaw },
    /// Deterministic geometric decay `rho(Theta_t) = phi^t`.
    Ar1 { phi: f64 },
    /// The big innovation lands at lag J with probability
    /// `c_J^alpha / sum c^alpha`; `Theta_t = (c_{J+t} / c_J) * unit`.
    MaxMovingAvg { coeffs: Vec<f64>, cum: Vec<f64> },
    /// Resampling of stored forward draws (an estimated law).
    Empirical { draws: Arc<Vec<Vec<Point>>> },
}

/// A samplable forward spectral tail process with tail index `alpha`.
#[derive(Clone, Debug)]
pub struct SpectralLaw {
    pub alpha: f64,
    pub space: Space,
    kind: LawKind,
}

impl SpectralLaw {
    pub fn single_big(alpha: f64, space: Space, angle: AngleLaw) -> Self {
        SpectralLaw {
            alpha,
            space,
            kind: LawKind::SingleBig { angle },
        }
    }

    pub fn ar1(alpha: f64, space: Space, phi: f64) -> Self {
        SpectralLaw {
            alpha,
            space,
            kind: LawKind::Ar1 { phi },
        }
    }

    pub fn max_moving_average(alpha: f64, space: Space, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty()
            || coeffs.iter().any(|c| !(*c >= 0.0))
            || coeffs.iter().all(|c| *c == 0.0)
        {
            return Err(Error::InvalidParameter(
                "max_moving_average law needs nonnegative coefficients, not all zero".into(),
            ));
        }
        let total: f64 = coeffs.iter().map(|c| c.powf(alpha)).sum();
        let mut cum = Vec::with_capacity(coeffs.len());
        let mut acc = 0.0;
        for c in &coeffs {
            acc += c.powf(alpha) / total;
            cum.push(acc);
        }
        Ok(SpectralLaw {
            alpha,
            space,
            kind: LawKind::MaxMovingAvg { coeffs, cum },
        })
    }

    /// An estimated law backed by stored forward draws. Draws must have
    /// unit-modulus first coordinate.
    pub fn empirical(alpha: f64, space: Space, draws: Vec<Vec<Point>>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InsufficientData(
                "empirical law needs at least one draw".into(),
            ));
        }
        Ok(SpectralLaw {
            alpha,
            space,
            kind: LawKind::Empirical {
                draws: Arc::new(draws),
            },
        })
    }

    /// Draw `(Theta_0, ..., Theta_T)`. Structural zeros are origin markers,
    /// never small vectors, so indicator functions of `{theta = 0}` are
    /// exact.
    pub fn sample_forward(&self, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let mut out = Vec::with_capacity(horizon + 1);
        match &self.kind {
            LawKind::SingleBig { angle } => {
                out.push(angle.sample(&self.space, rng));
                for _ in 0..horizon {
                    out.push(Point::Origin);
                }
            }
            LawKind::Ar1 { phi } => {
                let mut r = 1.0;
                out.push(Point::scalar(1.0));
                for _ in 0..horizon {
                    r *= phi;
                    out.push(Point::scalar(r));
                }
            }
            LawKind::MaxMovingAvg { coeffs, cum } => {
                let u = rng::unit_closed_open(rng);
                let j = cum.iter().position(|c| u < *c).unwrap_or(coeffs.len() - 1);
                let q = coeffs.len() - 1;
                for t in 0..=horizon {
                    if j + t > q || coeffs[j + t] == 0.0 {
                        out.push(Point::Origin);
                    } else {
                        out.push(Point::scalar(coeffs[j + t] / coeffs[j]));
                    }
                }
            }
            LawKind::Empirical { draws } => {
                let i = (rng::unit_closed_open(rng) * draws.len() as f64) as usize;
                let d = &draws[i.min(draws.len() - 1)];
                assert!(
                    d.len() > horizon,
                    "empirical law stores horizon {}, requested {horizon}",
                    d.len() - 1
                );
                out.extend(d[..=horizon].iter().cloned());
            }
        }
        out
    }
}

/// `E[rho(Theta_t)^alpha]` by Monte Carlo over forward draws.
pub fn spectral_moment(
    law: &SpectralLaw,
    t: usize,
    n: usize,
    seed: StreamSeed,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "spectral_moment: n must be >= 2".into(),
        ));
    }
    Ok(mc_estimate(seed, n, |rng| {
        let draw = law.sample_forward(t, rng);
        law.space.modulus(&draw[t]).powf(law.alpha)
    }))
}

/// Per-draw value of the telescoping backward representation of
/// `E[g(Theta_{-s}, ..., Theta_t)]` evaluated on one forward draw
/// `(Theta_0, ..., Theta_{t+s})`:
///
/// for j = s down to 1 add
/// `{g(0^(s-j), Theta_0/rho_j, ..., Theta_{t+j}/rho_j)
///   - g(0^(s-j+1), Theta_1/rho_j, ..., Theta_{t+j}/rho_j)} * rho_j^alpha`,
/// with `rho_j = rho(Theta_j)`, then add `g(0^(s), Theta_0, ..., Theta_t)`.
/// Terms with `rho_j = 0` are skipped whole, so the division never happens.
pub fn telescoping_value(
    space: &Space,
    alpha: f64,
    draw: &[Point],
    s: usize,
    t: usize,
    g: &(dyn Fn(&Window) -> f64 + Sync),
) -> f64 {
    debug_assert!(draw.len() > t + s);
    let first = -(s as i64);
    let mut total = 0.0;
    for j in (1..=s).rev() {
        let rho = space.modulus(&draw[j]);
        if rho == 0.0 {
            continue;
        }
        let weight = rho.powf(alpha);
        let inv = 1.0 / rho;

        let mut prim = Vec::with_capacity(s + t + 1);
        prim.extend(std::iter::repeat_with(|| Point::Origin).take(s - j));
        prim.extend((0..=t + j).map(|i| space.scale(inv, &draw[i])));
        let prim = WeightedWindow {
            window: Window::new(first, prim),
            weight,
        };

        let mut shif = Vec::with_capacity(s + t + 1);
        shif.extend(std::iter::repeat_with(|| Point::Origin).take(s - j + 1));
        shif.extend((1..=t + j).map(|i| space.scale(inv, &draw[i])));
        let shif = WeightedWindow {
            window: Window::new(first, shif),
            weight,
        };

        total += (g(&prim.window) - g(&shif.window)) * weight;
    }
    let mut fin = Vec::with_capacity(s + t + 1);
    fin.extend(std::iter::repeat_with(|| Point::Origin).take(s));
    fin.extend(draw[..=t].iter().cloned());
    total + g(&Window::new(first, fin))
}

/// `E[g(Theta_{-s}, ..., Theta_t)]` from forward samples only, via the
/// telescoping representation. `g` must be bounded (caller contract) but
/// need not vanish at zero. With `s = 0` this is the plain forward mean on
/// the same stream, bit for bit.
pub fn backward_expectation(
    law: &SpectralLaw,
    g: &(dyn Fn(&Window) -> f64 + Sync),
    s: usize,
    t: usize,
    n: usize,
    seed: StreamSeed,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "backward_expectation: n must be >= 2".into(),
        ));
    }
    Ok(mc_estimate(seed, n, |rng| {
        let draw = law.sample_forward(t + s, rng);
        telescoping_value(&law.space, law.alpha, &draw, s, t, g)
    }))
}

/// Whether the two sides of the time-change check draw from independent
/// streams (a valid two-sample z) or share one stream (for exactness tests).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngPairing {
    Independent,
    Shared,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeChangeCheck {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    pub z: f64,
}

/// Check the time-change identity for an `f` that vanishes when its first
/// argument is zero: `lhs = E[f(Theta_{-s}, ..., Theta_t)]` estimated through
/// the backward machinery, `rhs` the direct forward weighted form
/// `E[f(Theta_0/rho(Theta_s), ...) rho(Theta_s)^alpha]`.
///
/// The zero contract is probed on sampled windows; a nonzero value of `f` at
/// a zero-marked first coordinate is a [`Error::ContractViolation`].
pub fn time_change_residual(
    law: &SpectralLaw,
    f: &(dyn Fn(&Window) -> f64 + Sync),
    s: usize,
    t: usize,
    n: usize,
    seed: u64,
    pairing: RngPairing,
) -> Result<TimeChangeCheck> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "time_change_residual: n must be >= 2".into(),
        ));
    }
    let lhs_seed = StreamSeed::named(seed, StreamId::SpectralLhs);
    let rhs_seed = match pairing {
        RngPairing::Independent => StreamSeed::named(seed, StreamId::SpectralRhs),
        RngPairing::Shared => lhs_seed,
    };

    // sampled contract check: f must vanish when its first coordinate is the
    // exact zero
    let mut probe_rng = StreamSeed::named(seed, StreamId::LawSample).rng();
    for _ in 0..64 {
        let draw = law.sample_forward(t + s, &mut probe_rng);
        let mut pts = Vec::with_capacity(s + t + 1);
        pts.push(Point::Origin);
        pts.extend(draw[..s + t].iter().cloned());
        let w = Window::new(-(s as i64), pts);
        let v = f(&w);
        if v != 0.0 {
            return Err(Error::ContractViolation(format!(
                "f evaluated {v} != 0 at a window whose first coordinate is the zero marker"
            )));
        }
    }

    let lhs = backward_expectation(law, f, s, t, n, lhs_seed)?;
    let rhs = mc_estimate(rhs_seed, n, |rng| {
        let draw = law.sample_forward(t + s, rng);
        let rho = law.space.modulus(&draw[s]);
        if rho == 0.0 {
            return 0.0;
        }
        let weight = rho.powf(law.alpha);
        let inv = 1.0 / rho;
        let pts: Vec<Point> = (0..=t + s)
            .map(|i| law.space.scale(inv, &draw[i]))
            .collect();
        f(&Window::new(-(s as i64), pts)) * weight
    });
    let z = z_score(&lhs, &rhs);
    Ok(TimeChangeCheck { lhs, rhs, z })
}

/// Integral of `g` against the one-coordinate backward law `nu_t`, the limit
/// law of `X_{-t} / rho(X_0)`: an atom at the origin of mass
/// `1 - E[rho(Theta_t)^alpha]` plus the weighted image of
/// `Theta_0 / rho(Theta_t)`.
///
/// Computed as `g(0) + E[(g(Theta_0/rho(Theta_t)) - g(0)) rho(Theta_t)^alpha]`
/// so that the masses cancel analytically: with `g = 1` the result is exactly
/// one, not one up to Monte Carlo noise.
pub fn theta_backward_law(
    law: &SpectralLaw,
    t: usize,
    g: &(dyn Fn(&Point) -> f64 + Sync),
    n: usize,
    seed: StreamSeed,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "theta_backward_law: n must be >= 2".into(),
        ));
    }
    let g0 = g(&Point::Origin);
    let est = mc_estimate(seed, n, |rng| {
        let draw = law.sample_forward(t, rng);
        let rho = law.space.modulus(&draw[t]);
        if rho == 0.0 {
            return 0.0;
        }
        (g(&law.space.scale(1.0 / rho, &draw[0])) - g0) * rho.powf(law.alpha)
    });
    Ok(MCEstimate {
        value: g0 + est.value,
        std_error: est.std_error,
        n,
    })
}

/// Integral of `f` against the forward tail measure `nu_k`:
///
/// `sum_{i=1}^{k} int_0^inf E[f(0^(i-1), z Theta_0, ..., z Theta_{k-i})
///                            1{max_{1-i<=j<=-1} rho(Theta_j) = 0}] d(-z^{-alpha})`.
///
/// `f` is a bounded function on windows over `{1, ..., k}` vanishing on
/// `{max_i rho(x_i) <= r0}`. The z-integral is realized exactly by the
/// inverse-transform substitution `z = a U^(-1/alpha)` with per-window lower
/// endpoint `a = r0 / max_j rho(theta_j)` and weight `a^(-alpha)`; when every
/// `rho(Theta_j) <= 1` (all the builtin closed-form laws) this endpoint is
/// just `r0`. Backward indicators are evaluated through the telescoping
/// representation, so only forward draws are consumed.
pub fn nu_k_integral(
    law: &SpectralLaw,
    f: &(dyn Fn(&Window) -> f64 + Sync),
    k: usize,
    r0: f64,
    n: usize,
    seed: StreamSeed,
) -> Result<MCEstimate> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "nu_k_integral: k must be >= 1".into(),
        ));
    }
    if !(r0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nu_k_integral: r0 must be positive, got {r0}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(
            "nu_k_integral: n must be >= 2".into(),
        ));
    }
    let space = &law.space;
    let alpha = law.alpha;

    // sampled support check: rescale forward windows to max modulus just
    // below r0; f must vanish there
    let mut probe_rng = StreamSeed::raw(seed.seed, seed.stream ^ 0x5eed_0001).rng();
    for _ in 0..64 {
        let draw = law.sample_forward(k - 1, &mut probe_rng);
        let m = draw.iter().map(|p| space.modulus(p)).fold(0.0f64, f64::max);
        if m == 0.0 {
            continue;
        }
        let shrink = r0 * (1.0 - 1e-9) / m;
        let pts: Vec<Point> = draw.iter().map(|p| space.scale(shrink, p)).collect();
        let probe = Window::new(1, pts);
        let observed = probe
            .points()
            .iter()
            .map(|p| space.modulus(p))
            .fold(0.0f64, f64::max);
        let v = f(&probe);
        if v != 0.0 {
            return Err(Error::SupportViolation { observed, r0 });
        }
    }

    Ok(mc_estimate(seed, n, |rng| {
        let draw = law.sample_forward(k - 1, rng);
        let u = rng::unit_open_closed(rng);
        let mut total = 0.0;
        for i in 1..=k {
            let s = i - 1;
            let t = k - i;
            let g_i = |w: &Window| -> f64 {
                // backward indicator: every coordinate left of zero must be
                // the exact origin
                for jj in w.first()..0 {
                    if !w.at(jj).is_origin_marker() {
                        return 0.0;
                    }
                }
                let m = (0..=t as i64)
                    .map(|jj| space.modulus(w.at(jj)))
                    .fold(0.0f64, f64::max);
                if m == 0.0 {
                    return 0.0;
                }
                let a = r0 / m;
                let z = a * u.powf(-1.0 / alpha);
                let mut pts = Vec::with_capacity(k);
                pts.extend(std::iter::repeat_with(|| Point::Origin).take(i - 1));
                pts.extend((0..=t as i64).map(|jj| space.scale(z, w.at(jj))));
                f(&Window::new(1, pts)) * a.powf(-alpha)
            };
            total += telescoping_value(space, alpha, &draw, s, t, &g_i);
        }
        total
    }))
}

/// Named window functionals, the catalogue exposed to the CLI. All of them
/// read window coordinates by absolute index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Functional {
    /// `1{rho(w[coord]) > level}`; vanishes at the zero marker when level > 0.
    IndicatorExceed { coord: i64, level: f64 },
    /// `1{w[coord] != 0}` using the structural marker. Exact on law samples;
    /// empirical windows never carry markers.
    IndicatorNonzero { coord: i64 },
    /// Product of exceedance indicators: level_i applies to the window's
    /// i-th coordinate from the left.
    ProductExceed { levels: Vec<f64> },
    /// `min(rho(w[coord]), 1)^alpha`, the extremogram integrand.
    MinAlphaPower { coord: i64, alpha: f64 },
}

impl Functional {
    pub fn eval(&self, space: &Space, w: &Window) -> f64 {
        match self {
            Functional::IndicatorExceed { coord, level } => {
                if space.modulus(w.at(*coord)) > *level {
                    1.0
                } else {
                    0.0
                }
            }
            Functional::IndicatorNonzero { coord } => {
                if w.at(*coord).is_origin_marker() {
                    0.0
                } else {
                    1.0
                }
            }
            Functional::ProductExceed { levels } => {
                for (i, level) in levels.iter().enumerate() {
                    let idx = w.first() + i as i64;
                    if !(space.modulus(w.at(idx)) > *level) {
                        return 0.0;
                    }
                }
                1.0
            }
            Functional::MinAlphaPower { coord, alpha } => {
                space.modulus(w.at(*coord)).min(1.0).powf(*alpha)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Functional::IndicatorExceed { level, .. } => {
                if !(*level > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "indicator_exceed: level must be positive, got {level}"
                    )));
                }
            }
            Functional::ProductExceed { levels } => {
                if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "product_exceed: levels must be nonempty and positive".into(),
                    ));
                }
            }
            Functional::MinAlphaPower { alpha, .. } => {
                if !(*alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "min_alpha_power: alpha must be positive, got {alpha}"
                    )));
                }
            }
            Functional::IndicatorNonzero { .. } => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, ModelSpec};

    fn e1() -> Space {
        Space::euclidean(1, 2.0)
    }

    fn ar1_law(phi: f64, alpha: f64) -> SpectralLaw {
        ModelSpec::new(ModelKind::Ar1Positive { phi, alpha }, e1())
            .true_forward_spectral()
            .unwrap()
    }

    fn iid_law(alpha: f64) -> SpectralLaw {
        ModelSpec::new(ModelKind::IidPareto { alpha }, e1())
            .true_forward_spectral()
            .unwrap()
    }

    fn mma_law(coeffs: Vec<f64>, alpha: f64) -> SpectralLaw {
        ModelSpec::new(ModelKind::MaxMovingAverage { coeffs, alpha }, e1())
            .true_forward_spectral()
            .unwrap()
    }

    fn seed(s: u64) -> StreamSeed {
        StreamSeed::named(s, StreamId::LawSample)
    }

    #[test]
    fn moment_at_lag_zero_is_exactly_one() {
        for law in [
            ar1_law(0.5, 2.0),
            iid_law(1.0),
            mma_law(vec![1.0, 1.0], 1.0),
        ] {
            let est = spectral_moment(&law, 0, 1000, seed(1)).unwrap();
            assert_eq!(est.value, 1.0);
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn iid_moment_vanishes_past_lag_zero() {
        let est = spectral_moment(&iid_law(1.0), 1, 1000, seed(2)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn ar1_moment_is_phi_to_the_t_alpha() {
        // phi^(t alpha) = 0.25 at t = 1, alpha = 2
        let est = spectral_moment(&ar1_law(0.5, 2.0), 1, 1000, seed(3)).unwrap();
        assert!((est.value - 0.25).abs() <= 3.0 * est.std_error + 1e-12);
    }

    #[test]
    fn moment_bound_holds_for_all_laws() {
        for law in [
            ar1_law(0.5, 1.0),
            ar1_law(0.9, 0.5),
            iid_law(2.0),
            mma_law(vec![1.0, 2.0, 0.5], 1.0),
        ] {
            for t in 0..=10 {
                let est = spectral_moment(&law, t, 20_000, seed(4 + t as u64)).unwrap();
                assert!(
                    est.value <= 1.0 + 3.0 * est.std_error + 1e-12,
                    "E[rho^alpha] = {} at t = {t}",
                    est.value
                );
            }
        }
    }

    #[test]
    fn telescoping_collapses_for_forward_only_g() {
        // g reads coordinates 0..t only: all differences cancel exactly and
        // the backward estimate equals the plain forward mean on the same
        // stream, bit for bit
        let law = ar1_law(0.5, 2.0);
        let g = |w: &Window| law.space.modulus(w.at(1)).min(1.0);
        let back = backward_expectation(&law, &g, 2, 1, 5000, seed(5)).unwrap();
        let fwd = mc_estimate(seed(5), 5000, |rng| {
            let draw = law.sample_forward(3, rng);
            law.space.modulus(&draw[1]).min(1.0)
        });
        assert_eq!(back.value.to_bits(), fwd.value.to_bits());
    }

    #[test]
    fn backward_s_zero_is_plain_forward_mean() {
        let law = mma_law(vec![1.0, 1.0], 1.0);
        let g = |w: &Window| if w.at(0).is_origin_marker() { 0.0 } else { 1.0 };
        let back = backward_expectation(&law, &g, 0, 1, 2000, seed(6)).unwrap();
        assert_eq!(back.value, 1.0);
    }

    #[test]
    fn backward_nonzero_probability_matches_closed_form() {
        // Pr[Theta_{-1} != 0] = E[rho(Theta_1)^alpha] = phi^alpha = 0.25
        let law = ar1_law(0.5, 2.0);
        let g = Functional::IndicatorNonzero { coord: -1 };
        let gf = |w: &Window| g.eval(&law.space, w);
        let est = backward_expectation(&law, &gf, 1, 0, 2000, seed(7)).unwrap();
        assert!(
            (est.value - 0.25).abs() <= 3.0 * est.std_error + 1e-12,
            "{est:?}"
        );

        let iid = iid_law(1.0);
        let gf = |w: &Window| g.eval(&iid.space, w);
        for s in 1..=3 {
            let est = backward_expectation(&iid, &gf, s, 0, 500, seed(8)).unwrap();
            assert_eq!(est.value, 0.0);
        }
    }

    #[test]
    fn time_change_residual_ar1_closed_form() {
        // backward law of AR(1): Theta_{-1} = 1/phi with probability
        // phi^alpha, else 0; with f = 1{rho > 1} both sides equal 0.25
        let law = ar1_law(0.5, 2.0);
        let f = Functional::IndicatorExceed {
            coord: -1,
            level: 1.0,
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let check =
            time_change_residual(&law, &ff, 1, 0, 20_000, 99, RngPairing::Independent).unwrap();
        assert!((check.lhs.value - 0.25).abs() <= 3.0 * check.lhs.std_error + 1e-12);
        assert!((check.rhs.value - 0.25).abs() <= 3.0 * check.rhs.std_error + 1e-12);
        assert!(check.z.abs() <= 4.0);
    }

    #[test]
    fn time_change_joint_window_functional() {
        // f spans the whole window {-1, 0, 1}: backward law of ar1(0.5, 2)
        // puts Theta_{-1} = 2 with probability 0.25, and then Theta_0 = 1,
        // Theta_1 = 0.5, so the joint indicator has expectation 0.25
        let law = ar1_law(0.5, 2.0);
        let f = Functional::ProductExceed {
            levels: vec![1.0, 0.2, 0.2],
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let check =
            time_change_residual(&law, &ff, 1, 1, 20_000, 77, RngPairing::Independent).unwrap();
        assert!(check.z.abs() <= 4.0, "{check:?}");
        assert!(
            (check.lhs.value - 0.25).abs() <= 3.0 * check.lhs.std_error + 1e-12,
            "{check:?}"
        );
        assert!(
            (check.rhs.value - 0.25).abs() <= 3.0 * check.rhs.std_error + 1e-12,
            "{check:?}"
        );

        // same joint functional on the enumerable moving-average law
        let law = mma_law(vec![1.0, 2.0, 0.5], 1.0);
        let ff = |w: &Window| f.eval(&law.space, w);
        let check =
            time_change_residual(&law, &ff, 1, 1, 40_000, 78, RngPairing::Independent).unwrap();
        // enumeration: J = 1 (p = 2/3.5) gives window (1/2, 1, 1/4):
        // 1{0.5 > 1} fails; J = 2 (p = 0.5/3.5) gives (4, 1, 0) and the
        // last factor fails; J = 0 has a zero first coordinate. Total 0.
        assert_eq!(check.lhs.value, 0.0, "{check:?}");
        assert_eq!(check.rhs.value, 0.0, "{check:?}");
    }

    #[test]
    fn time_change_zero_f_gives_zero_sides() {
        let law = iid_law(1.0);
        let f = |_: &Window| 0.0;
        let check = time_change_residual(&law, &f, 1, 1, 500, 1, RngPairing::Independent).unwrap();
        assert_eq!(check.lhs.value, 0.0);
        assert_eq!(check.rhs.value, 0.0);
        assert_eq!(check.z, 0.0);
    }

    #[test]
    fn time_change_s_zero_shared_stream_is_exact() {
        let law = ar1_law(0.5, 2.0);
        let f = Functional::IndicatorExceed {
            coord: 0,
            level: 0.5,
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let check = time_change_residual(&law, &ff, 0, 2, 2000, 5, RngPairing::Shared).unwrap();
        assert_eq!(check.z, 0.0);
        assert_eq!(check.lhs.value.to_bits(), check.rhs.value.to_bits());
    }

    #[test]
    fn time_change_contract_violation_detected() {
        let law = ar1_law(0.5, 2.0);
        let f = |_: &Window| 1.0; // does not vanish at zero first coordinate
        let err = time_change_residual(&law, &f, 1, 0, 500, 1, RngPairing::Independent);
        assert!(matches!(err, Err(Error::ContractViolation(_))));
    }

    #[test]
    fn backward_one_coordinate_law_examples() {
        let law = ar1_law(0.5, 2.0);
        // mass identity: exactly one by analytic cancellation
        let one = |_: &Point| 1.0;
        let est = theta_backward_law(&law, 1, &one, 1000, seed(9)).unwrap();
        assert_eq!(est.value, 1.0);

        // atom of mass 0.75 at zero, mass 0.25 at the point 2
        let g = |p: &Point| if law.space.modulus(p) > 1.0 { 1.0 } else { 0.0 };
        let est = theta_backward_law(&law, 1, &g, 1000, seed(10)).unwrap();
        assert!((est.value - 0.25).abs() <= 3.0 * est.std_error + 1e-12);

        let iid = iid_law(1.0);
        let gz = |p: &Point| if p.is_origin_marker() { 0.0 } else { 1.0 };
        let est = theta_backward_law(&iid, 1, &gz, 1000, seed(11)).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn nu_k_single_coordinate_closed_form() {
        // k = 1, f = 1{rho > c}: the integral is c^(-alpha)
        for (alpha, c) in [(1.0, 2.0), (2.0, 1.5)] {
            let law = ar1_law(0.5, alpha);
            let f = Functional::IndicatorExceed { coord: 1, level: c };
            let ff = |w: &Window| f.eval(&law.space, w);
            let est = nu_k_integral(&law, &ff, 1, c.min(1.0), 40_000, seed(12)).unwrap();
            let target = c.powf(-alpha);
            assert!(
                (est.value - target).abs() <= 3.0 * est.std_error + 1e-12,
                "alpha={alpha} c={c}: {est:?} vs {target}"
            );
        }
    }

    #[test]
    fn nu_k_iid_joint_exceedance_is_zero() {
        let law = iid_law(1.0);
        let f = Functional::ProductExceed {
            levels: vec![1.0, 1.0],
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let est = nu_k_integral(&law, &ff, 2, 1.0, 2000, seed(13)).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn nu_k_ar1_joint_exceedance_closed_form() {
        // ar1(0.5, 1), k = 2, f = 1{x_1 > 1, x_2 > 1}: only the i = 1 term
        // survives and needs z > 2: integral = 0.5
        let law = ar1_law(0.5, 1.0);
        let f = Functional::ProductExceed {
            levels: vec![1.0, 1.0],
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let est = nu_k_integral(&law, &ff, 2, 1.0, 60_000, seed(14)).unwrap();
        assert!(
            (est.value - 0.5).abs() <= 3.0 * est.std_error + 1e-12,
            "{est:?}"
        );
    }

    #[test]
    fn nu_k_support_violation_detected() {
        let law = ar1_law(0.5, 1.0);
        // f claims support r0 = 2 but is nonzero on moduli just above 1
        let f = Functional::IndicatorExceed {
            coord: 1,
            level: 1.0,
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let err = nu_k_integral(&law, &ff, 1, 2.0, 500, seed(15));
        assert!(matches!(err, Err(Error::SupportViolation { .. })));
    }

    /// Independent oracle for the telescoping machinery: the two-sided
    /// spectral law of a max-moving average is an explicit finite mixture
    /// over the lag J of the big innovation, with
    /// `Theta_t = c_{J+t} / c_J` inside the window and exact zero outside.
    /// Backward expectations computed from forward samples must match the
    /// enumerated mixture for arbitrary bounded g.
    #[test]
    fn backward_expectation_matches_mma_enumeration() {
        let coeffs = [1.0f64, 2.0, 0.5];
        let alpha = 1.3f64;
        let law = mma_law(coeffs.to_vec(), alpha);
        let total: f64 = coeffs.iter().map(|c| c.powf(alpha)).sum();
        let q = coeffs.len() - 1;

        let (s, t) = (2usize, 1usize);
        let enumerate = |g: &dyn Fn(&Window) -> f64| -> f64 {
            let mut acc = 0.0;
            for (j, c) in coeffs.iter().enumerate() {
                let p = c.powf(alpha) / total;
                let pts: Vec<Point> = (-(s as i64)..=(t as i64))
                    .map(|tau| {
                        let idx = j as i64 + tau;
                        if idx < 0 || idx > q as i64 || coeffs[idx as usize] == 0.0 {
                            Point::Origin
                        } else {
                            Point::scalar(coeffs[idx as usize] / c)
                        }
                    })
                    .collect();
                acc += p * g(&Window::new(-(s as i64), pts));
            }
            acc
        };

        type Case = Box<dyn Fn(&Window) -> f64 + Sync>;
        let space = law.space.clone();
        let cases: Vec<(&str, Case)> = vec![
            (
                "nonzero count",
                Box::new(move |w: &Window| {
                    w.points().iter().filter(|p| !p.is_origin_marker()).count() as f64
                }),
            ),
            ("clipped back modulus", {
                let space = space.clone();
                Box::new(move |w: &Window| space.modulus(w.at(-2)).min(3.0))
            }),
            ("joint exceedance", {
                let space = space.clone();
                Box::new(move |w: &Window| {
                    if space.modulus(w.at(-1)) > 0.4 && space.modulus(w.at(1)) > 0.4 {
                        1.0
                    } else {
                        0.0
                    }
                })
            }),
        ];
        for (i, (label, g)) in cases.iter().enumerate() {
            let target = enumerate(g.as_ref());
            let est =
                backward_expectation(&law, g.as_ref(), s, t, 60_000, seed(30 + i as u64)).unwrap();
            assert!(
                (est.value - target).abs() <= 3.0 * est.std_error + 1e-12,
                "{label}: {est:?} vs enumerated {target}"
            );
        }
    }

    /// Asymmetric rectangle on an increasing-coefficient moving average:
    /// the support of f in z starts below the declared r0 once a modulus
    /// ratio exceeds one, so the per-window integration endpoint matters.
    /// Enumerated value: only J = 0 contributes, args (z, 2z), threshold
    /// z > max(0.5, 2/2) = 1, mass 1^{-1} = 1, weight 1/3.
    #[test]
    fn nu_k_asymmetric_rectangle_on_increasing_mma() {
        let law = mma_law(vec![1.0, 2.0], 1.0);
        let f = Functional::ProductExceed {
            levels: vec![0.5, 2.0],
        };
        let ff = |w: &Window| f.eval(&law.space, w);
        let est = nu_k_integral(&law, &ff, 2, 2.0, 60_000, seed(40)).unwrap();
        let target = 1.0 / 3.0;
        assert!(
            (est.value - target).abs() <= 3.0 * est.std_error + 1e-12,
            "{est:?} vs enumerated {target}"
        );
    }

    #[test]
    fn law_samples_match_closed_forms() {
        // ar1(0.5): rho(Theta_3) = 0.125 on every draw
        let law = ar1_law(0.5, 1.0);
        let mut rng = seed(20).rng();
        for _ in 0..100 {
            let draw = law.sample_forward(3, &mut rng);
            assert_eq!(law.space.modulus(&draw[3]), 0.125);
        }
        // mma((1,1)): rho(Theta_1) is 1 or 0 with equal odds
        let law = mma_law(vec![1.0, 1.0], 1.0);
        let mut rng = seed(21).rng();
        let n = 20_000;
        let mut ones = 0usize;
        for _ in 0..n {
            let draw = law.sample_forward(1, &mut rng);
            let r = law.space.modulus(&draw[1]);
            if r == 1.0 {
                ones += 1;
            } else {
                assert_eq!(r, 0.0, "unexpected modulus {r}");
            }
        }
        let p = ones as f64 / n as f64;
        assert!(
            (p - 0.5).abs() <= 4.0 * (0.25f64 / n as f64).sqrt(),
            "p = {p}"
        );
    }

    #[test]
    fn functional_catalogue_evaluates() {
        let space = e1();
        let w = Window::new(
            -1,
            vec![Point::Origin, Point::scalar(1.0), Point::scalar(0.5)],
        );
        assert_eq!(
            Functional::IndicatorExceed {
                coord: 1,
                level: 0.4
            }
            .eval(&space, &w),
            1.0
        );
        assert_eq!(
            Functional::IndicatorNonzero { coord: -1 }.eval(&space, &w),
            0.0
        );
        assert_eq!(
            Functional::ProductExceed {
                levels: vec![0.5, 0.25]
            }
            .eval(
                &space,
                &Window::new(1, vec![Point::scalar(1.0), Point::scalar(0.5)])
            ),
            1.0
        );
        let f = Functional::MinAlphaPower {
            coord: 1,
            alpha: 2.0,
        };
        assert_eq!(f.eval(&space, &w), 0.25);
        let f = Functional::MinAlphaPower {
            coord: -1,
            alpha: 2.0,
        };
        assert_eq!(f.eval(&space, &w), 0.0);
        assert!(Functional::IndicatorExceed {
            coord: 0,
            level: -1.0
        }
        .validate()
        .is_err());
        assert!(Functional::ProductExceed { levels: vec![] }
            .validate()
            .is_err());
    }

    #[test]
    fn mc_estimate_parallel_matches_sequential() {
        let law = ar1_law(0.7, 1.5);
        let eval = |rng: &mut ChaCha8Rng| {
            let draw = law.sample_forward(2, rng);
            law.space.modulus(&draw[2]).powf(law.alpha)
        };
        let a = mc_estimate_in(Mode::Sequential, seed(16), 10_000, eval);
        let b = mc_estimate(seed(16), 10_000, eval);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
