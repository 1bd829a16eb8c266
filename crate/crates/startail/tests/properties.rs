//! Property tests for the space layer: polar reconstruction, modulus
//! homogeneity, sequence-metric axioms, projection mass preservation.

use proptest::prelude::*;
use startail::point::{Point, Window};
use startail::space::{seq_metric, seq_metric_truncation_bound, Space};
use startail::tailmeasure::EmpiricalTailMeasure;

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1e6f64..1e6).prop_filter("nonzero-ish", |v| v.abs() > 1e-6),
        Just(0.0)
    ]
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(coord(), dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn polar_reconstruction_is_identity(
        coords in point(3),
        p in prop_oneof![Just(1.0f64), Just(2.0), Just(3.0), Just(f64::INFINITY)],
    ) {
        let space = Space::euclidean(3, p);
        let x = Point::dense(coords);
        if let Ok(polar) = space.polar_decompose(&x) {
            let back = space.scale(polar.r, &polar.theta);
            let err = space.dist(&back, &x);
            prop_assert!(err <= 1e-12 * polar.r, "reconstruction error {err} at r = {}", polar.r);
            prop_assert!((space.modulus(&polar.theta) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn modulus_homogeneity_dyadic_exact(
        coords in point(4),
        k in -20i32..20,
        p in prop_oneof![Just(1.0f64), Just(2.0), Just(f64::INFINITY)],
    ) {
        // powers of two scale IEEE arithmetic exactly for p in {1, 2, inf}
        let lambda = (k as f64).exp2();
        for space in [Space::euclidean(4, p), Space::path_sup(4)] {
            let x = Point::dense(coords.clone());
            let lhs = space.modulus(&space.scale(lambda, &x));
            let rhs = lambda * space.modulus(&x);
            prop_assert_eq!(lhs, rhs, "space {:?} lambda {}", space.kind, lambda);
        }
    }

    #[test]
    fn modulus_homogeneity_general(
        coords in point(4),
        lambda in 1e-6f64..1e6,
    ) {
        for space in [
            Space::euclidean(4, 3.0),
            Space::snowflake_gauge(4, 0.5),
            Space::weighted_hilbert(4),
        ] {
            let x = Point::dense(coords.clone());
            let lhs = space.modulus(&space.scale(lambda, &x));
            let rhs = lambda * space.modulus(&x);
            let denom = rhs.abs().max(1e-300);
            prop_assert!((lhs - rhs).abs() / denom <= 1e-12);
        }
    }

    #[test]
    fn seq_metric_axioms(
        xs in prop::collection::vec(point(2), 3),
        ys in prop::collection::vec(point(2), 3),
        zs in prop::collection::vec(point(2), 3),
    ) {
        let space = Space::euclidean(2, 2.0);
        let win = |v: &Vec<Vec<f64>>| {
            Window::symmetric(1, v.iter().map(|c| Point::dense(c.clone())).collect())
        };
        let (x, y, z) = (win(&xs), win(&ys), win(&zs));
        let dxy = seq_metric(&space, &x, &y, 1).unwrap();
        let dyx = seq_metric(&space, &y, &x, 1).unwrap();
        let dxz = seq_metric(&space, &x, &z, 1).unwrap();
        let dzy = seq_metric(&space, &z, &y, 1).unwrap();
        prop_assert_eq!(dxy, dyx);
        prop_assert!(dxy <= dxz + dzy + 1e-12, "triangle: {dxy} > {dxz} + {dzy}");
        prop_assert!(dxy < 3.0);
        prop_assert_eq!(seq_metric(&space, &x, &x, 1).unwrap(), 0.0);
    }

    #[test]
    fn projection_preserves_cylinder_mass(
        windows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 5), 1..40),
        level in 0.1f64..5.0,
    ) {
        let space = Space::euclidean(1, 2.0);
        let atoms: Vec<(Window, f64)> = windows
            .iter()
            .map(|w| {
                (Window::symmetric(2, w.iter().map(|v| Point::scalar(*v)).collect()), 0.25)
            })
            .collect();
        let meas = EmpiricalTailMeasure {
            m: 2,
            atoms,
            normalizer: 0.5,
            threshold: 1.0,
            anchor_count: windows.len(),
            exceed_count: windows.len().div_ceil(2),
            atom_floor: 0.0,
        };
        let pred = |w: &Window| space.modulus(w.at(0)) > level;
        let wide_mass = meas.mass(pred);
        for m2 in [0usize, 1, 2] {
            let proj = meas.project(m2).unwrap();
            prop_assert_eq!(proj.mass(pred), wide_mass);
        }
    }
}

#[test]
fn truncation_bound_formula() {
    assert_eq!(seq_metric_truncation_bound(0), 2.0);
    assert_eq!(seq_metric_truncation_bound(3), 0.25);
}
