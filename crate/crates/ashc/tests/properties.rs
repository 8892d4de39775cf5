//! Property-based invariants across the numerics: similarity invariance of
//! the eigensolver, quadratic-form envelopes, input-affinity, left-inverse
//! identities, and signal ranges.

use ashc::cuk::{self, CukParams, DeltaVariant};
use ashc::integrator::triangle_wave;
use ashc::linalg::{sym_eigenvalues, weighted_norm_sq, Matrix, SymMatrix};
use proptest::prelude::*;

fn small_sym(order: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-10.0f64..10.0, order * order)
        .prop_map(move |data| SymMatrix::new(order, data).unwrap())
}

/// Orthogonal matrix as a product of random plane rotations.
fn random_orthogonal(order: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec((0..order, 0..order, -3.1f64..3.1), 6).prop_map(move |rots| {
        let mut q = Matrix::identity(order);
        for (p, r, angle) in rots {
            if p == r {
                continue;
            }
            let mut g = Matrix::identity(order);
            g[(p, p)] = angle.cos();
            g[(r, r)] = angle.cos();
            g[(p, r)] = -angle.sin();
            g[(r, p)] = angle.sin();
            q = q.matmul(&g).unwrap();
        }
        q
    })
}

proptest! {
    #[test]
    fn eigenvalues_invariant_under_rotation(
        s in small_sym(4),
        q in random_orthogonal(4),
    ) {
        let rotated = q.transpose().matmul(&s.as_matrix()).unwrap().matmul(&q).unwrap();
        let rotated = SymMatrix::from_matrix(&rotated).unwrap();
        let a = sym_eigenvalues(&s, 1e-11).unwrap().eigenvalues;
        let b = sym_eigenvalues(&rotated, 1e-11).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn quadratic_form_respects_eigen_envelopes(
        x in prop::collection::vec(-100.0f64..100.0, 4),
    ) {
        let m = cuk::default_certificate_matrix();
        let eig = sym_eigenvalues(&m, 1e-12).unwrap().eigenvalues;
        let (lo, hi) = (eig[0], eig[3]);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let v = weighted_norm_sq(&x, &m).unwrap();
        prop_assert!(v >= lo * r2 - 1e-9 * (1.0 + r2));
        prop_assert!(v <= hi * r2 + 1e-9 * (1.0 + r2));
    }

    #[test]
    fn dynamics_affine_in_input(
        x in prop::collection::vec(-80.0f64..80.0, 4),
        u1 in -1.0f64..2.0,
        u2 in -1.0f64..2.0,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let built = cuk::build_cuk(&CukParams::default(), DeltaVariant::Unit).unwrap();
        let f = |u: f64| ashc::system::evaluate_dynamics(built.plant(), &x, &[u]).unwrap();
        let lhs = f(a * u1 + b * u2);
        let (f1, f2, f0) = (f(u1), f(u2), f(0.0));
        for i in 0..4 {
            let rhs = a * f1[i] + b * f2[i] - (a + b - 1.0) * f0[i];
            prop_assert!(
                (lhs[i] - rhs).abs() <= 1e-10 * (1.0 + lhs[i].abs()),
                "component {i}: {} vs {rhs}", lhs[i]
            );
        }
    }

    #[test]
    fn left_inverse_round_trip(xi in 0.0f64..0.95) {
        let p = CukParams::default();
        let x = cuk::p_map(&p, xi);
        let back = cuk::m_map(&p, x[3]).unwrap();
        prop_assert!((back - xi).abs() <= 1e-9);
        // and the output recovers through kappa
        prop_assert!((cuk::kappa_map(&p, back) - x[3]).abs() <= 1e-9);
    }

    #[test]
    fn output_recovery_on_region(x4 in -120.0f64..0.0) {
        let p = CukParams::default();
        let m = cuk::m_map(&p, x4).unwrap();
        prop_assert!((cuk::kappa_map(&p, m) - x4).abs() <= 1e-9);
        // the left inverse lands inside the certified domain
        prop_assert!((0.0..=0.95).contains(&m));
    }

    #[test]
    fn triangle_wave_range_and_period(t in -50.0f64..50.0) {
        let v = triangle_wave(t);
        prop_assert!((-1.0..=1.0).contains(&v));
        let shifted = triangle_wave(t + 2.0 * std::f64::consts::PI);
        prop_assert!((v - shifted).abs() <= 1e-9);
    }

    #[test]
    fn symmetrisation_is_exact(data in prop::collection::vec(-5.0f64..5.0, 9)) {
        let s = SymMatrix::new(3, data).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
    }
}
