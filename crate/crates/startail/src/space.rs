//! Star-shaped metric spaces: metric, origin, scalar multiplication, modulus.
//!
//! A space here is a complete separable metric space with an origin and a
//! scalar multiplication that strictly increases distance from the origin
//! along rays. A *modulus* is a continuous homogeneous norm-like function
//! separating the origin from the rest of the space; it yields the polar
//! decomposition `x -> (rho(x), x / rho(x))`.
//!
//! Four builtin spaces are provided. Three satisfy every axiom; the fourth,
//! `weighted_hilbert`, is a truncated counterexample whose modulus decays
//! along the basis directions and is meant to be caught by the axiom
//! validator.

use crate::error::{Error, Result};
use crate::point::{Point, Window};
use serde::{Deserialize, Serialize};

/// Which builtin space. Serializes as a tagged config block, e.g.
/// `{ kind = "euclidean", dim = 2, p = 2.0 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// R^dim with the l_p metric and the l_p norm as modulus.
    Euclidean {
        dim: usize,
        #[serde(default = "default_p")]
        p: f64,
    },
    /// Grid-sampled paths with the sup metric and sup modulus.
    PathSup { grid: usize },
    /// R^dim with the snowflaked metric ||x - y||^beta; the gauge modulus
    /// recovers the Euclidean norm.
    SnowflakeGauge { dim: usize, beta: f64 },
    /// Truncation of the Hilbert-space counterexample: l_2 metric with
    /// modulus (sum x_i^2 / i)^(1/2), so rho(e_i) = i^(-1/2) sinks to zero
    /// while the metric keeps every e_i at distance one.
    WeightedHilbert { n: usize },
}

fn default_p() -> f64 {
    2.0
}

/// A space instance: the kind plus the numeric floor below which a modulus
/// is treated as "at the origin".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Space {
    #[serde(flatten)]
    pub kind: SpaceKind,
    #[serde(default = "default_origin_epsilon")]
    pub origin_epsilon: f64,
}

fn default_origin_epsilon() -> f64 {
    1e-12
}

/// Result of the polar decomposition: `x = scale(r, theta)` with
/// `modulus(theta) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarCoordinates {
    pub r: f64,
    pub theta: Point,
}

impl Space {
    pub fn new(kind: SpaceKind) -> Self {
        Space {
            kind,
            origin_epsilon: default_origin_epsilon(),
        }
    }

    pub fn euclidean(dim: usize, p: f64) -> Self {
        Space::new(SpaceKind::Euclidean { dim, p })
    }

    pub fn path_sup(grid: usize) -> Self {
        Space::new(SpaceKind::PathSup { grid })
    }

    pub fn snowflake_gauge(dim: usize, beta: f64) -> Self {
        Space::new(SpaceKind::SnowflakeGauge { dim, beta })
    }

    pub fn weighted_hilbert(n: usize) -> Self {
        Space::new(SpaceKind::WeightedHilbert { n })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match &self.kind {
            SpaceKind::Euclidean { dim, p } => {
                if *dim == 0 {
                    return bad("euclidean: dim must be >= 1".into());
                }
                if !(*p >= 1.0) {
                    return bad(format!("euclidean: p must be >= 1, got {p}"));
                }
            }
            SpaceKind::PathSup { grid } => {
                if *grid == 0 {
                    return bad("path_sup: grid must be >= 1".into());
                }
            }
            SpaceKind::SnowflakeGauge { dim, beta } => {
                if *dim == 0 {
                    return bad("snowflake_gauge: dim must be >= 1".into());
                }
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return bad(format!(
                        "snowflake_gauge: beta must be in (0, 1], got {beta}"
                    ));
                }
            }
            SpaceKind::WeightedHilbert { n } => {
                if *n == 0 {
                    return bad("weighted_hilbert: n must be >= 1".into());
                }
            }
        }
        if !(self.origin_epsilon > 0.0) {
            return bad("origin_epsilon must be positive".into());
        }
        Ok(())
    }

    /// Number of coordinates a dense point carries.
    pub fn dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Euclidean { dim, .. } => *dim,
            SpaceKind::PathSup { grid } => *grid,
            SpaceKind::SnowflakeGauge { dim, .. } => *dim,
            SpaceKind::WeightedHilbert { n } => *n,
        }
    }

    pub fn origin(&self) -> Point {
        Point::Origin
    }

    /// Check that a point has the right shape and finite coordinates.
    pub fn validate_point(&self, x: &Point) -> Result<()> {
        if let Some(c) = x.coords() {
            if c.len() != self.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "point has {} coordinates, space has dimension {}",
                    c.len(),
                    self.dim()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "point has non-finite coordinate".into(),
                ));
            }
        }
        Ok(())
    }

    fn coord(x: &Point, i: usize) -> f64 {
        x.coords().map_or(0.0, |c| c[i])
    }

    fn lp_norm_of(&self, f: impl Fn(usize) -> f64, n: usize, p: f64) -> f64 {
        if p == f64::INFINITY {
            (0..n).map(|i| f(i).abs()).fold(0.0, f64::max)
        } else if p == 1.0 {
            (0..n).map(|i| f(i).abs()).sum()
        } else if p == 2.0 {
            (0..n).map(|i| f(i) * f(i)).sum::<f64>().sqrt()
        } else {
            (0..n)
                .map(|i| f(i).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }

    /// Metric distance.
    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        let n = self.dim();
        let diff = |i: usize| Self::coord(x, i) - Self::coord(y, i);
        match &self.kind {
            SpaceKind::Euclidean { p, .. } => self.lp_norm_of(diff, n, *p),
            SpaceKind::PathSup { .. } => self.lp_norm_of(diff, n, f64::INFINITY),
            SpaceKind::SnowflakeGauge { beta, .. } => self.lp_norm_of(diff, n, 2.0).powf(*beta),
            SpaceKind::WeightedHilbert { .. } => self.lp_norm_of(diff, n, 2.0),
        }
    }

    /// Modulus `rho`. Zero exactly on the structural origin.
    pub fn modulus(&self, x: &Point) -> f64 {
        if x.is_origin_marker() {
            return 0.0;
        }
        let n = self.dim();
        let c = |i: usize| Self::coord(x, i);
        match &self.kind {
            SpaceKind::Euclidean { p, .. } => self.lp_norm_of(c, n, *p),
            SpaceKind::PathSup { .. } => self.lp_norm_of(c, n, f64::INFINITY),
            // gauge of the snowflaked metric: inf{l : (||x||/l)^beta <= 1} = ||x||
            SpaceKind::SnowflakeGauge { .. } => self.lp_norm_of(c, n, 2.0),
            SpaceKind::WeightedHilbert { .. } => (0..n)
                .map(|i| c(i) * c(i) / (i as f64 + 1.0))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Scalar multiplication. `scale(0, x)` is the structural origin for
    /// every x, and the origin is absorbing.
    pub fn scale(&self, lambda: f64, x: &Point) -> Point {
        assert!(lambda >= 0.0, "scalar multiplication takes lambda >= 0");
        if lambda == 0.0 || x.is_origin_marker() {
            return Point::Origin;
        }
        match x {
            Point::Origin => Point::Origin,
            Point::Dense(v) => Point::Dense(v.iter().map(|c| lambda * c).collect()),
        }
    }

    /// Tolerant origin check: structural marker or modulus at/below the floor.
    pub fn is_origin(&self, x: &Point) -> bool {
        x.is_origin_marker() || self.modulus(x) <= self.origin_epsilon
    }

    /// Polar decomposition `x -> (rho(x), x / rho(x))`. Undefined at the
    /// origin, where it reports [`Error::OriginPoint`].
    pub fn polar_decompose(&self, x: &Point) -> Result<PolarCoordinates> {
        let r = self.modulus(x);
        if r <= self.origin_epsilon {
            return Err(Error::OriginPoint {
                modulus: r,
                floor: self.origin_epsilon,
            });
        }
        Ok(PolarCoordinates {
            r,
            theta: self.scale(1.0 / r, x),
        })
    }

    /// Compact JSON descriptor for file headers.
    pub fn descriptor(&self) -> String {
        serde_json::to_string(&self.kind).expect("space kind serializes")
    }

    pub fn from_descriptor(s: &str) -> Result<Space> {
        let kind: SpaceKind = serde_json::from_str(s)
            .map_err(|e| Error::ConfigError(format!("bad space descriptor: {e}")))?;
        let space = Space::new(kind);
        space.validate()?;
        Ok(space)
    }
}

/// Gauge modulus of Example-2 type: `inf{l > 0 : dist(x / l, origin) <= 1}`,
/// computed by doubling/halving bracketing and bisection to relative
/// tolerance `tol`. The caller asserts that the metric satisfies the
/// uniformity hypothesis; when no bracket exists in `[2^-60, 2^60]` the
/// failure is reported as [`Error::BracketFailure`].
pub fn gauge_modulus(space: &Space, x: &Point, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gauge tolerance must be positive, got {tol}"
        )));
    }
    let origin = space.origin();
    if x.is_origin_marker() || space.dist(x, &origin) == 0.0 {
        return Ok(0.0);
    }
    let g = |lambda: f64| space.dist(&space.scale(1.0 / lambda, x), &origin);

    const LO_LIMIT: f64 = 8.673617379884035e-19; // 2^-60
    const HI_LIMIT: f64 = 1.152921504606847e18; // 2^60

    // dist(x / lambda, origin) is strictly decreasing in lambda, so bracket
    // the level set {g <= 1} by doubling or halving from lambda = 1.
    let (mut lo, mut hi);
    if g(1.0) <= 1.0 {
        hi = 1.0;
        lo = 0.5;
        while g(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
            if lo < LO_LIMIT {
                return Err(Error::BracketFailure {
                    observed: format!("dist(x/lambda, 0) <= 1 for all lambda down to {lo:.3e}"),
                });
            }
        }
    } else {
        lo = 1.0;
        hi = 2.0;
        while g(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > HI_LIMIT {
                return Err(Error::BracketFailure {
                    observed: format!("dist(x/lambda, 0) > 1 for all lambda up to {hi:.3e}"),
                });
            }
        }
    }

    // g(lo) > 1 >= g(hi); bisect to relative tolerance.
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Sequence-space metric on symmetric windows:
/// `d_m(x, y) = sum_{t=-m}^{m} 2^(-|t|) d(x_t, y_t) / (1 + d(x_t, y_t))`.
///
/// The full sequence metric `d_inf` is never computed; `d_m` approximates it
/// with truncation error at most [`seq_metric_truncation_bound`].
pub fn seq_metric(space: &Space, x: &Window, y: &Window, m: usize) -> Result<f64> {
    if x.half_width() != Some(m) || y.half_width() != Some(m) {
        return Err(Error::ShapeMismatch(format!(
            "seq_metric needs two windows over {{-{m}, ..., {m}}}; got ranges [{}, {}] and [{}, {}]",
            x.first(),
            x.last(),
            y.first(),
            y.last()
        )));
    }
    let mut total = 0.0;
    for t in -(m as i64)..=(m as i64) {
        let d = space.dist(x.at(t), y.at(t));
        total += 0.5f64.powi(t.unsigned_abs() as i32) * d / (1.0 + d);
    }
    Ok(total)
}

/// Upper bound on `d_inf - d_m`: the tail of `sum 2^(-|t|)` past `m`.
pub fn seq_metric_truncation_bound(m: usize) -> f64 {
    2.0 * 0.5f64.powi(m as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_decompose_three_four_five() {
        let s = Space::euclidean(2, 2.0);
        let p = s.polar_decompose(&Point::dense(vec![3.0, 4.0])).unwrap();
        assert_eq!(p.r, 5.0);
        let theta = p.theta.coords().unwrap();
        assert!((theta[0] - 0.6).abs() <= 1e-15 && (theta[1] - 0.8).abs() <= 1e-15);
    }

    #[test]
    fn polar_decompose_unit_modulus_is_identity() {
        let s = Space::euclidean(2, 2.0);
        let x = Point::dense(vec![0.6, 0.8]);
        let p = s.polar_decompose(&x).unwrap();
        assert!((p.r - 1.0).abs() <= 1e-15);
        let back = s.scale(p.r, &p.theta);
        assert!(s.dist(&back, &x) <= 1e-15);
    }

    #[test]
    fn polar_decompose_rejects_origin() {
        let s = Space::euclidean(2, 2.0);
        assert!(matches!(
            s.polar_decompose(&Point::Origin),
            Err(Error::OriginPoint { .. })
        ));
        assert!(matches!(
            s.polar_decompose(&Point::dense(vec![0.0, 0.0])),
            Err(Error::OriginPoint { .. })
        ));
    }

    #[test]
    fn scale_zero_is_structural_origin() {
        let s = Space::euclidean(3, 2.0);
        let x = Point::dense(vec![1.0, -2.0, 3.0]);
        assert!(s.scale(0.0, &x).is_origin_marker());
        assert!(s.scale(2.0, &Point::Origin).is_origin_marker());
    }

    #[test]
    fn snowflake_gauge_recovers_euclidean_norm() {
        let s = Space::snowflake_gauge(2, 0.5);
        let x = Point::dense(vec![9.0, 0.0]);
        assert!((s.dist(&x, &s.origin()) - 3.0).abs() <= 1e-12);
        let g = gauge_modulus(&s, &x, 1e-10).unwrap();
        // closed form: inf{l : (||x||/l)^beta <= 1} = ||x|| = 9
        assert!((g - 9.0).abs() <= 9.0 * 1e-9, "gauge {g} != 9");
        assert!((s.modulus(&x) - 9.0).abs() <= 1e-12);
    }

    #[test]
    fn gauge_of_norm_metric_is_the_norm() {
        let s = Space::euclidean(2, 2.0);
        let x = Point::dense(vec![3.0, 4.0]);
        let g = gauge_modulus(&s, &x, 1e-10).unwrap();
        assert!((g - 5.0).abs() <= 5.0 * 1e-9);
    }

    #[test]
    fn gauge_of_origin_is_zero() {
        let s = Space::euclidean(2, 2.0);
        assert_eq!(gauge_modulus(&s, &Point::Origin, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn gauge_bracket_failure_outside_lambda_range() {
        // gauge of this point is 1e300, far beyond the 2^60 bracket ceiling
        let s = Space::euclidean(1, 2.0);
        let x = Point::dense(vec![1e300]);
        assert!(matches!(
            gauge_modulus(&s, &x, 1e-9),
            Err(Error::BracketFailure { .. })
        ));
    }

    #[test]
    fn weighted_hilbert_modulus_sinks_along_basis() {
        let s = Space::weighted_hilbert(100);
        let mut e100 = vec![0.0; 100];
        e100[99] = 1.0;
        let e100 = Point::dense(e100);
        assert!((s.modulus(&e100) - 0.1).abs() <= 1e-15);
        assert!((s.dist(&e100, &s.origin()) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn seq_metric_examples() {
        let s = Space::euclidean(1, 2.0);
        let w = |vals: &[f64]| {
            Window::symmetric(
                vals.len() / 2,
                vals.iter().map(|&v| Point::scalar(v)).collect(),
            )
        };
        let x = w(&[1.0, 2.0, 3.0]);
        assert_eq!(seq_metric(&s, &x, &x, 1).unwrap(), 0.0);

        // m = 0, unit distance: 1 / (1 + 1) = 0.5
        let a = Window::symmetric(0, vec![Point::scalar(0.0)]);
        let b = Window::symmetric(0, vec![Point::scalar(1.0)]);
        assert_eq!(seq_metric(&s, &a, &b, 0).unwrap(), 0.5);

        // m = 1, all coordinate distances 1: 0.5 + 2 * (0.5 * 0.5) = 1.0
        let a = w(&[0.0, 0.0, 0.0]);
        let b = w(&[1.0, 1.0, 1.0]);
        assert_eq!(seq_metric(&s, &a, &b, 1).unwrap(), 1.0);
    }

    #[test]
    fn seq_metric_shape_mismatch() {
        let s = Space::euclidean(1, 2.0);
        let a = Window::symmetric(0, vec![Point::scalar(0.0)]);
        let b = Window::symmetric(
            1,
            vec![Point::scalar(0.0), Point::scalar(1.0), Point::scalar(2.0)],
        );
        assert!(matches!(
            seq_metric(&s, &a, &b, 1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn descriptor_round_trip() {
        let s = Space::snowflake_gauge(3, 0.7);
        let d = s.descriptor();
        let back = Space::from_descriptor(&d).unwrap();
        assert_eq!(back.kind, s.kind);
    }
}
