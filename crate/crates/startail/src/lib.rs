//! Heavy-tailed time series in star-shaped metric spaces.
//!
//! The crate simulates stationary regularly varying series with known tail
//! structure, decomposes extremes into modulus and angle, realizes the
//! spectral-tail-process identities numerically (moment bound, time-change
//! formula, backward laws, forward tail measures), and estimates the same
//! objects back from raw data so the two routes can be checked against each
//! other.
//!
//! Everything that consumes randomness is a deterministic function of
//! `(inputs, seed)`: streams are counter-based and keyed, work is chunked
//! with fixed boundaries, and reductions run in a fixed order, so results do
//! not depend on thread count. The `parallel` feature (default) runs the
//! chunk loops on rayon; without it the same loops run sequentially and
//! produce bit-identical numbers.

// validation uses `!(x > 0.0)` so NaN parameters are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod config;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod io;
pub mod models;
pub mod point;
pub mod rng;
pub mod space;
pub mod spectral;
pub mod tailmeasure;
pub mod verify;

pub use error::{Error, Result};
pub use point::{Point, WeightedWindow, Window};
pub use space::{PolarCoordinates, Space, SpaceKind};
