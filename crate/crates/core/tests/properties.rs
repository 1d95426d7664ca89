mod common;

use common::{dist_sq, dot5, embed3, max_abs_diff, sphere3, IDENTITY5};
use mlgp::conformal::{mat5_mul, Vec3};
use mlgp::tetris::ShapePoints;
use mlgp::{
    canonical_shapes, conformal_dot, embed_point, make_dataset, motor_matrix_point,
    motor_matrix_sphere, Checkpoint, DatasetKind, EuclideanPoint, Hypersphere, LabeledShapeSet,
    Model, ModelKind, RigidMotion,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coord() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn point() -> impl Strategy<Value = Vec3> {
    [coord(), coord(), coord()]
}

fn motion() -> impl Strategy<Value = RigidMotion> {
    any::<u64>().prop_map(|seed| common::random_motion(&mut ChaCha8Rng::seed_from_u64(seed), 3.0))
}

fn model_kind() -> impl Strategy<Value = ModelKind> {
    prop::sample::select(ModelKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn dot_measures_signed_sphere_incidence(x in point(), c in point(), r in 0.0..5.0f64) {
        let s = Hypersphere::from_center_radius(&EuclideanPoint::new(c.to_vec()).unwrap(), r).unwrap();
        let d = conformal_dot(&embed_point(&EuclideanPoint::new(x.to_vec()).unwrap()), &s).unwrap();
        let expected = -0.5 * dist_sq(&x, &c) + 0.5 * r * r;
        prop_assert!((d - expected).abs() <= 1e-12, "{d} vs {expected}");
        prop_assert!((d - dot5(&embed3(&x), &sphere3(&c, r))).abs() <= 1e-12);
    }

    #[test]
    fn zero_radius_sphere_gives_distance(x in point(), y in point()) {
        let d = dot5(&embed3(&x), &sphere3(&y, 0.0));
        prop_assert!((d + 0.5 * dist_sq(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn scaling_scales_dot_and_normalization_recovers(
        x in point(), c in point(), r in 0.0..5.0f64, gamma in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64],
    ) {
        let s = Hypersphere::from_center_radius(&EuclideanPoint::new(c.to_vec()).unwrap(), r).unwrap();
        let xe = embed_point(&EuclideanPoint::new(x.to_vec()).unwrap());
        let raw = Hypersphere::from_raw(s.scaled(gamma).coords().to_vec()).unwrap();
        let d = conformal_dot(&xe, &s).unwrap();
        let dg = conformal_dot(&xe, &raw).unwrap();
        prop_assert!((dg - gamma * d).abs() <= 1e-10 * (1.0 + dg.abs()));

        let (normalized, g) = raw.point_normalize().unwrap();
        prop_assert_eq!(g, gamma);
        for (a, b) in normalized.scaled(g).coords().iter().zip(raw.coords()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let (center, r2) = normalized.center_radius_sq().unwrap();
        for (a, b) in center.coords().iter().zip(&c) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((r2 - r * r).abs() <= 1e-10);
    }

    #[test]
    fn sphere_and_point_motors_are_adjoint(m in motion()) {
        let ms = motor_matrix_sphere(&m);
        let mx = motor_matrix_point(&m);
        prop_assert!(max_abs_diff(&mat5_mul(&mx.transpose(), ms.entries()), &IDENTITY5) <= 1e-12);
    }

    #[test]
    fn motors_compose_like_motions(a in motion(), b in motion()) {
        let ab = a.compose(&b);
        let lhs = motor_matrix_sphere(&ab);
        let rhs = motor_matrix_sphere(&a).mul(&motor_matrix_sphere(&b));
        prop_assert!(max_abs_diff(lhs.entries(), rhs.entries()) <= 1e-12);
        let lhs = motor_matrix_point(&ab);
        let rhs = motor_matrix_point(&a).mul(&motor_matrix_point(&b));
        prop_assert!(max_abs_diff(lhs.entries(), rhs.entries()) <= 1e-12);
    }

    #[test]
    fn point_motor_commutes_with_embedding(m in motion(), x in point()) {
        let lhs = motor_matrix_point(&m).apply(&embed3(&x));
        let rhs = embed3(&m.apply(&x));
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn motors_preserve_the_scalar_product(
        m in motion(), x in point(), w in prop::array::uniform5(-5.0..5.0f64),
    ) {
        let before = dot5(&embed3(&x), &w);
        let after = dot5(&motor_matrix_point(&m).apply(&embed3(&x)), &motor_matrix_sphere(&m).apply(&w));
        prop_assert!((after - before).abs() <= 1e-9 * (1.0 + before.abs()));
    }

    #[test]
    fn motion_inverse_round_trip(m in motion(), x in point()) {
        let back = m.inverse().apply(&m.apply(&x));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn noiseless_samples_are_rigid_copies(seed in any::<u64>(), theta in any::<bool>()) {
        let kind = if theta { DatasetKind::ThetaSplitEval } else { DatasetKind::Main };
        let set = make_dataset(kind, 16, 0.0, seed).unwrap();
        let shapes = canonical_shapes();
        for s in &set.samples {
            let canon = &shapes[s.label as usize].points;
            prop_assert!(pairwise_gap(&s.points, canon) <= 1e-9);
        }
    }

    #[test]
    fn noisy_samples_stay_near_the_rigid_copy(seed in any::<u64>(), a in 0.01..0.3f64) {
        let set = make_dataset(DatasetKind::Main, 16, a, seed).unwrap();
        let shapes = canonical_shapes();
        for s in &set.samples {
            // Each coordinate moves by less than a, so each distance by less than 2a*sqrt(3).
            let canon = &shapes[s.label as usize].points;
            prop_assert!(pairwise_gap(&s.points, canon) < 2.0 * a * 3f64.sqrt());
        }
    }

    #[test]
    fn dataset_csv_round_trip(seed in any::<u64>(), a in 0.0..0.3f64) {
        let set = make_dataset(DatasetKind::ThetaSplitTrain, 24, a, seed).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = LabeledShapeSet::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.samples, set.samples);
    }

    #[test]
    fn checkpoint_round_trip(kind in model_kind(), seed in any::<u64>(), step in any::<u64>()) {
        let ckpt = Checkpoint::new(Model::build(kind.into(), seed).unwrap(), step);
        let back = Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, ckpt);
    }
}

/// Largest difference between corresponding pairwise distances.
fn pairwise_gap(a: &ShapePoints, b: &ShapePoints) -> f64 {
    let mut gap = 0.0f64;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = dist_sq(&a[i], &a[j]).sqrt();
            let db = dist_sq(&b[i], &b[j]).sqrt();
            gap = gap.max((da - db).abs());
        }
    }
    gap
}
