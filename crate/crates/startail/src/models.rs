//! Stationary heavy-tailed series with known tail structure.
//!
//! Each model has exact Pareto innovations, a declared tail index, and a
//! forward spectral law in closed form, so estimators can be checked against
//! analytic truth. The AR recursion is realized as its moving-average
//! truncation `X_t = sum_{j<=B} phi^j Z_{t-j}` with a fixed window `B`, which
//! is exactly stationary and a pure function of `(seed, t)` — chunked
//! generation is bit-identical to sequential generation.

use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::point::Point;
use crate::rng::{CounterStream, StreamSeed};
use crate::space::{Space, SpaceKind};
use crate::spectral::{AngleLaw, SpectralLaw};
use serde::{Deserialize, Serialize};

/// Model variants. Serializes as a tagged config block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Independent draws: Pareto(alpha) modulus times a random unit angle.
    IidPareto { alpha: f64 },
    /// Positive AR(1): X_t = phi X_{t-1} + Z_t with Pareto(alpha) innovations,
    /// phi in (0, 1). Scalar-valued.
    Ar1Positive { phi: f64, alpha: f64 },
    /// Max-moving average: X_t = max_j c_j Z_{t-j}. Scalar-valued.
    MaxMovingAverage { coeffs: Vec<f64>, alpha: f64 },
    /// Function-valued: X_t = R_t * psi with iid Pareto(alpha) amplitudes and
    /// a fixed unit-modulus path psi on a sup-modulus grid space.
    PathAmplitude {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<Vec<f64>>,
    },
}

impl ModelKind {
    pub fn alpha(&self) -> f64 {
        match self {
            ModelKind::IidPareto { alpha }
            | ModelKind::Ar1Positive { alpha, .. }
            | ModelKind::MaxMovingAverage { alpha, .. }
            | ModelKind::PathAmplitude { alpha, .. } => *alpha,
        }
    }
}

/// A model bound to the space it generates points in.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub space: Space,
}

/// A simulated stretch of the series, with its reproducibility record.
#[derive(Clone, Debug)]
pub struct SeriesPath {
    pub points: Vec<Point>,
    pub seed: StreamSeed,
    pub burn_in: usize,
}

impl SeriesPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Modulus of every point, in order.
    pub fn moduli(&self, space: &Space) -> Vec<f64> {
        let n = self.points.len();
        let chunks = exec::map_chunks(n, exec::CHUNK, |_, range| {
            range
                .map(|i| space.modulus(&self.points[i]))
                .collect::<Vec<f64>>()
        });
        chunks.concat()
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, space: Space) -> Self {
        ModelSpec { kind, space }
    }

    pub fn alpha(&self) -> f64 {
        self.kind.alpha()
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let alpha = self.alpha();
        if !(alpha > 0.0) {
            return bad(format!("alpha must be positive, got {alpha}"));
        }
        match &self.kind {
            ModelKind::IidPareto { .. } => {}
            ModelKind::Ar1Positive { phi, .. } => {
                if !(*phi > 0.0 && *phi < 1.0) {
                    return bad(format!("ar1_positive: phi must be in (0, 1), got {phi}"));
                }
                if self.space.dim() != 1 {
                    return bad("ar1_positive is scalar: space must have dimension 1".into());
                }
            }
            ModelKind::MaxMovingAverage { coeffs, .. } => {
                if coeffs.is_empty() {
                    return bad("max_moving_average: needs at least one coefficient".into());
                }
                if coeffs.iter().any(|c| !(*c >= 0.0)) {
                    return bad("max_moving_average: coefficients must be nonnegative".into());
                }
                if coeffs.iter().all(|c| *c == 0.0) {
                    return bad(
                        "max_moving_average: at least one coefficient must be positive".into(),
                    );
                }
                if self.space.dim() != 1 {
                    return bad("max_moving_average is scalar: space must have dimension 1".into());
                }
            }
            ModelKind::PathAmplitude { path, .. } => {
                let grid = match self.space.kind {
                    SpaceKind::PathSup { grid } => grid,
                    _ => return bad("path_amplitude requires a path_sup space".into()),
                };
                if let Some(p) = path {
                    if p.len() != grid {
                        return bad(format!(
                            "path_amplitude: path has {} samples, grid has {grid}",
                            p.len()
                        ));
                    }
                    if p.iter().any(|v| !v.is_finite()) {
                        return bad("path_amplitude: path has non-finite samples".into());
                    }
                    let sup = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if sup == 0.0 {
                        return bad("path_amplitude: path must be nonzero".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Fixed burn-in window: long enough that the discarded AR tail is below
    /// 1e-12 relative, the full window for a max-moving average.
    pub fn default_burn_in(&self) -> usize {
        match &self.kind {
            ModelKind::Ar1Positive { phi, .. } => (1e-12f64.ln() / phi.ln()).ceil() as usize,
            ModelKind::MaxMovingAverage { coeffs, .. } => coeffs.len() - 1,
            _ => 0,
        }
    }

    /// The unit-modulus path for `path_amplitude`: the configured one
    /// normalized to sup 1, or a half-sine bump by default.
    pub fn unit_path(&self) -> Option<Vec<f64>> {
        let (grid, path) = match (&self.space.kind, &self.kind) {
            (SpaceKind::PathSup { grid }, ModelKind::PathAmplitude { path, .. }) => (*grid, path),
            _ => return None,
        };
        let raw: Vec<f64> = match path {
            Some(p) => p.clone(),
            None => (0..grid)
                .map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / grid as f64).sin())
                .collect(),
        };
        let sup = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // dividing by the attained max makes the sup exactly 1.0
        Some(raw.iter().map(|v| v / sup).collect())
    }

    pub fn simulate(&self, n: usize, seed: StreamSeed) -> Result<SeriesPath> {
        self.simulate_in(Mode::default(), n, seed, None)
    }

    /// Simulate `n` points in the given execution mode, optionally overriding
    /// the burn-in window. Output is a pure function of `(model, n, seed,
    /// burn_in)`.
    pub fn simulate_in(
        &self,
        mode: Mode,
        n: usize,
        seed: StreamSeed,
        burn_in: Option<usize>,
    ) -> Result<SeriesPath> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("simulate: n must be >= 1".into()));
        }
        let alpha = self.alpha();
        let burn = burn_in.unwrap_or_else(|| self.default_burn_in());

        // Innovations are addressed by absolute counter index, so each chunk
        // reads exactly the values it needs and the result is independent of
        // the chunking. Indices within a chunk are contiguous and read with
        // one buffered fill.
        let pareto_buf = |inn: &mut CounterStream, start: u64, len: usize| -> Vec<f64> {
            let mut buf = vec![0.0; len];
            inn.fill_units(start, &mut buf);
            for v in &mut buf {
                *v = v.powf(-1.0 / alpha);
            }
            buf
        };

        let points: Vec<Point> = match &self.kind {
            ModelKind::IidPareto { .. } => {
                let dim = self.space.dim();
                if dim == 1 {
                    let chunks = exec::map_chunks_in(mode, n, exec::CHUNK, |_, range| {
                        let mut inn = CounterStream::new(seed);
                        let buf = pareto_buf(&mut inn, range.start as u64, range.len());
                        buf.into_iter().map(Point::scalar).collect::<Vec<_>>()
                    });
                    chunks.concat()
                } else {
                    // lane layout per t: [radius uniform, d gaussian uniforms
                    // (padded even)]
                    let lanes = 1 + 2 * dim.div_ceil(2);
                    let space = &self.space;
                    let chunks = exec::map_chunks_in(mode, n, exec::CHUNK, |_, range| {
                        let mut inn = CounterStream::new(seed);
                        let mut buf = vec![0.0; range.len() * lanes];
                        inn.fill_units(range.start as u64 * lanes as u64, &mut buf);
                        buf.chunks_exact(lanes)
                            .map(|lane| {
                                let r = lane[0].powf(-1.0 / alpha);
                                let dir = gaussian_direction(space, &lane[1..], dim);
                                space.scale(r, &dir)
                            })
                            .collect::<Vec<_>>()
                    });
                    chunks.concat()
                }
            }
            ModelKind::Ar1Positive { phi, .. } => {
                let phi = *phi;
                let chunks = exec::map_chunks_in(mode, n, exec::CHUNK, |_, range| {
                    let mut inn = CounterStream::new(seed);
                    // buf[i] = Z_{range.start - burn + i}; Z_s sits at counter
                    // index s + burn, so the chunk reads indices
                    // range.start .. range.end + burn
                    let start = range.start;
                    let buf = pareto_buf(&mut inn, range.start as u64, range.len() + burn);
                    range
                        .map(|t| {
                            // Horner over the fixed window: X_t = sum_{j=0}^{burn} phi^j Z_{t-j}
                            let lo = t - start; // buf[lo] = Z_{t - burn}
                            let mut acc = buf[lo];
                            for off in 1..=burn {
                                acc = buf[lo + off] + phi * acc;
                            }
                            Point::scalar(acc)
                        })
                        .collect::<Vec<_>>()
                });
                chunks.concat()
            }
            ModelKind::MaxMovingAverage { coeffs, .. } => {
                let q = coeffs.len() - 1;
                let chunks = exec::map_chunks_in(mode, n, exec::CHUNK, |_, range| {
                    let mut inn = CounterStream::new(seed);
                    let start = range.start;
                    let buf = pareto_buf(&mut inn, range.start as u64, range.len() + q);
                    range
                        .map(|t| {
                            let lo = t - start; // buf[lo] = Z_{t-q}
                            let x = coeffs
                                .iter()
                                .enumerate()
                                .map(|(j, c)| c * buf[lo + q - j])
                                .fold(0.0f64, f64::max);
                            Point::scalar(x)
                        })
                        .collect::<Vec<_>>()
                });
                chunks.concat()
            }
            ModelKind::PathAmplitude { .. } => {
                let psi = self
                    .unit_path()
                    .expect("validated path_amplitude has a unit path");
                let chunks = exec::map_chunks_in(mode, n, exec::CHUNK, |_, range| {
                    let mut inn = CounterStream::new(seed);
                    let buf = pareto_buf(&mut inn, range.start as u64, range.len());
                    buf.into_iter()
                        .map(|r| Point::dense(psi.iter().map(|v| r * v).collect()))
                        .collect::<Vec<_>>()
                });
                chunks.concat()
            }
        };

        Ok(SeriesPath {
            points,
            seed,
            burn_in: burn,
        })
    }

    /// The forward spectral tail process in closed form.
    pub fn true_forward_spectral(&self) -> Result<SpectralLaw> {
        self.validate()?;
        let alpha = self.alpha();
        match &self.kind {
            ModelKind::IidPareto { .. } => {
                let angle = if self.space.dim() == 1 {
                    AngleLaw::UnitScalar
                } else {
                    AngleLaw::UniformDirection
                };
                Ok(SpectralLaw::single_big(alpha, self.space.clone(), angle))
            }
            ModelKind::Ar1Positive { phi, .. } => {
                Ok(SpectralLaw::ar1(alpha, self.space.clone(), *phi))
            }
            ModelKind::MaxMovingAverage { coeffs, .. } => {
                SpectralLaw::max_moving_average(alpha, self.space.clone(), coeffs.clone())
            }
            ModelKind::PathAmplitude { .. } => {
                let psi = self.unit_path().expect("validated");
                Ok(SpectralLaw::single_big(
                    alpha,
                    self.space.clone(),
                    AngleLaw::FixedPoint(Point::dense(psi)),
                ))
            }
        }
    }

    /// Closed-form extremogram limit at lag `t >= 0`:
    /// `E[min(rho(Theta_t), 1)^alpha]`.
    pub fn true_extremogram(&self, t: usize) -> Result<f64> {
        self.validate()?;
        if t == 0 {
            return Ok(1.0);
        }
        let alpha = self.alpha();
        match &self.kind {
            ModelKind::IidPareto { .. } | ModelKind::PathAmplitude { .. } => Ok(0.0),
            ModelKind::Ar1Positive { phi, .. } => Ok(phi.powf(t as f64 * alpha)),
            ModelKind::MaxMovingAverage { coeffs, .. } => Ok(mma_moment(coeffs, alpha, t, true)),
        }
    }

    /// Closed-form `Pr[Theta_{-s} != 0] = E[rho(Theta_s)^alpha]`.
    pub fn true_backward_nonzero(&self, s: usize) -> Result<f64> {
        self.validate()?;
        if s == 0 {
            return Ok(1.0);
        }
        let alpha = self.alpha();
        match &self.kind {
            ModelKind::IidPareto { .. } | ModelKind::PathAmplitude { .. } => Ok(0.0),
            ModelKind::Ar1Positive { phi, .. } => Ok(phi.powf(s as f64 * alpha)),
            ModelKind::MaxMovingAverage { coeffs, .. } => Ok(mma_moment(coeffs, alpha, s, false)),
        }
    }
}

/// `E[g(rho(Theta_t))]` for the max-moving average: the big innovation lands
/// at lag J with probability `c_J^alpha / sum c^alpha`, and
/// `rho(Theta_t) = c_{J+t} / c_J` (zero past the window).
fn mma_moment(coeffs: &[f64], alpha: f64, t: usize, clamp_at_one: bool) -> f64 {
    let q = coeffs.len() - 1;
    let total: f64 = coeffs.iter().map(|c| c.powf(alpha)).sum();
    let mut acc = 0.0;
    for (j, c) in coeffs.iter().enumerate() {
        if *c == 0.0 || j + t > q {
            continue;
        }
        let ratio = coeffs[j + t] / c;
        let r = if clamp_at_one { ratio.min(1.0) } else { ratio };
        acc += c.powf(alpha) / total * r.powf(alpha);
    }
    acc
}

/// Gaussian direction normalized to unit modulus in `space`, built from a
/// lane of pre-drawn uniforms (two per Box-Muller pair).
fn gaussian_direction(space: &Space, uniforms: &[f64], dim: usize) -> Point {
    let mut coords = Vec::with_capacity(dim);
    let mut lane = 0;
    while coords.len() < dim {
        let u1 = uniforms[lane];
        let u2 = uniforms[lane + 1];
        lane += 2;
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = std::f64::consts::TAU * u2;
        coords.push(r * phi.cos());
        if coords.len() < dim {
            coords.push(r * phi.sin());
        }
    }
    let p = Point::dense(coords);
    let rho = space.modulus(&p);
    space.scale(1.0 / rho, &p)
}
