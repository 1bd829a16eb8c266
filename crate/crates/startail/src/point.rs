//! Points and finite windows of points.

use serde::{Deserialize, Serialize};

/// A point of a star-shaped space. Points are dense real vectors; the origin
/// carries a structural marker so that indicators like `1{x = origin}` are
/// exact rather than a floating comparison. Samplers that know a coordinate
/// is structurally zero emit `Origin`, never a small numeric vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Origin,
    Dense(Vec<f64>),
}

impl Point {
    pub fn dense(coords: Vec<f64>) -> Self {
        Point::Dense(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Point::Dense(vec![x])
    }

    /// Structural origin check. Numeric near-zero points do not count;
    /// use [`crate::space::Space::is_origin`] for the tolerant check.
    pub fn is_origin_marker(&self) -> bool {
        matches!(self, Point::Origin)
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Origin => None,
            Point::Dense(v) => Some(v),
        }
    }
}

/// A finite stretch of points over a contiguous integer index range.
/// `first` is the lowest index, so a window over {-m, ..., m} has
/// `first = -m` and `2m + 1` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    first: i64,
    points: Vec<Point>,
}

impl Window {
    pub fn new(first: i64, points: Vec<Point>) -> Self {
        Window { first, points }
    }

    /// Symmetric window over {-m, ..., m}. Panics if the length is not 2m+1.
    pub fn symmetric(m: usize, points: Vec<Point>) -> Self {
        assert_eq!(
            points.len(),
            2 * m + 1,
            "symmetric window needs 2m+1 points"
        );
        Window {
            first: -(m as i64),
            points,
        }
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn last(&self) -> i64 {
        self.first + self.points.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point at absolute index `t`. Panics when `t` is outside the range.
    pub fn at(&self, t: i64) -> &Point {
        let off = t - self.first;
        assert!(
            off >= 0 && (off as usize) < self.points.len(),
            "index {t} outside window"
        );
        &self.points[off as usize]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter_indexed(&self) -> impl Iterator<Item = (i64, &Point)> {
        self.points
            .iter()
            .enumerate()
            .map(move |(i, p)| (self.first + i as i64, p))
    }

    /// Half-width when the window is symmetric around 0.
    pub fn half_width(&self) -> Option<usize> {
        if self.first <= 0 && self.last() == -self.first {
            Some((-self.first) as usize)
        } else {
            None
        }
    }

    /// Truncate to the index range {-m, ..., m}. The window must cover it.
    pub fn truncate_symmetric(&self, m: usize) -> Option<Window> {
        let m = m as i64;
        if self.first > -m || self.last() < m {
            return None;
        }
        let lo = (-m - self.first) as usize;
        let hi = (m - self.first) as usize;
        Some(Window {
            first: -m,
            points: self.points[lo..=hi].to_vec(),
        })
    }
}

/// A window paired with a nonnegative change-of-measure weight, as produced
/// by the telescoping expansion of backward expectations.
#[derive(Clone, Debug)]
pub struct WeightedWindow {
    pub window: Window,
    pub weight: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_indexing() {
        let w = Window::symmetric(
            1,
            vec![Point::scalar(1.0), Point::scalar(2.0), Point::scalar(3.0)],
        );
        assert_eq!(w.first(), -1);
        assert_eq!(w.last(), 1);
        assert_eq!(w.at(-1), &Point::scalar(1.0));
        assert_eq!(w.at(1), &Point::scalar(3.0));
        assert_eq!(w.half_width(), Some(1));
    }

    #[test]
    fn truncation_keeps_center() {
        let w = Window::symmetric(2, (0..5).map(|i| Point::scalar(i as f64)).collect());
        let t = w.truncate_symmetric(1).unwrap();
        assert_eq!(t.at(-1), &Point::scalar(1.0));
        assert_eq!(t.at(0), &Point::scalar(2.0));
        assert_eq!(t.at(1), &Point::scalar(3.0));
        assert!(w.truncate_symmetric(3).is_none());
    }
}
