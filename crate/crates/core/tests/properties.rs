//! Randomized invariants over kernels, preprocessing, metrics and model files.

use proptest::prelude::*;

use spcrsvd::io::{model_to_string, read_model, ModelFile};
use spcrsvd::kernels::{procrustes_orthogonalize, soft_threshold, thin_svd, Mat, Vector};
use spcrsvd::model::{preprocess, Algorithm, FitConfig};
use spcrsvd::selection::tpr_tnr;
use spcrsvd::solver::fit;

fn min_singular_value(m: &Mat) -> f64 {
    thin_svd(m).unwrap().s.min()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-5.0f64..5.0, rows * cols).prop_map(move |v| Mat::from_vec(rows, cols, v))
}

proptest! {
    #[test]
    fn soft_threshold_shrinks_toward_zero(x in -100.0f64..100.0, lambda in 0.0f64..50.0) {
        let s = soft_threshold(x, lambda);
        prop_assert!(s.abs() <= x.abs());
        prop_assert!(s == 0.0 || s.signum() == x.signum());
        prop_assert_eq!(s == 0.0, x.abs() <= lambda);
        prop_assert!((x - s).abs() <= lambda + 1e-12);
    }

    #[test]
    fn soft_threshold_is_odd_and_nonexpansive(a in -20.0f64..20.0, b in -20.0f64..20.0, lambda in 0.0f64..5.0) {
        prop_assert_eq!(soft_threshold(-a, lambda), -soft_threshold(a, lambda));
        let d = (soft_threshold(a, lambda) - soft_threshold(b, lambda)).abs();
        prop_assert!(d <= (a - b).abs() + 1e-12);
    }

    #[test]
    fn procrustes_output_is_orthonormal(m in matrix(7, 3)) {
        prop_assume!(min_singular_value(&m) > 1e-6);
        let q = procrustes_orthogonalize(&m).unwrap();
        prop_assert!((q.transpose() * &q - Mat::identity(3, 3)).abs().max() < 1e-10);
        // The negated frame is never closer.
        let best = (&q - &m).norm();
        let flipped = -&q;
        prop_assert!(best <= (&flipped - &m).norm() + 1e-12);
    }

    #[test]
    fn support_rates_ignore_scale(
        est in prop::collection::vec(-3.0f64..3.0, 8),
        truth in prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], 8),
        scale in 0.1f64..10.0,
    ) {
        let e = Vector::from_vec(est);
        let t = Vector::from_vec(truth);
        let a = tpr_tnr(&e, &t, 1e-8).unwrap();
        let b = tpr_tnr(&(&e * scale), &(&t * scale), 1e-8 * scale).unwrap();
        prop_assert_eq!(a, b);
        for r in [a.tpr, a.tnr].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn preprocessing_is_idempotent(m in matrix(12, 4), standardize in any::<bool>()) {
        prop_assume!(m.column_iter().all(|c| c.variance() > 1e-3));
        let y = Vector::from_fn(12, |i, _| i as f64);
        let once = preprocess(&m, &y, standardize).unwrap();
        let twice = preprocess(once.x(), &y, standardize).unwrap();
        prop_assert!((once.x() - twice.x()).abs().max() < 1e-10);
        prop_assert!(twice.column_means().abs().max() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn model_file_round_trip_is_bit_exact(
        x in matrix(20, 4),
        noise in prop::collection::vec(-1.0f64..1.0, 20),
        lv in 0.0f64..0.1,
        lb in 0.0f64..0.1,
        ladmm in any::<bool>(),
        standardize in any::<bool>(),
    ) {
        prop_assume!(min_singular_value(&x) > 1e-3);
        prop_assume!(x.column_iter().all(|c| c.variance() > 1e-3));
        let y = Vector::from_fn(20, |i, _| x[(i, 0)] - x[(i, 2)] + noise[i]);
        let d = preprocess(&x, &y, standardize).unwrap();
        let algorithm = if ladmm { Algorithm::Ladmm } else { Algorithm::Admm };
        let cfg = FitConfig { max_iter: 300, ..FitConfig::new(2).with_lambdas(lv, lb).with_algorithm(algorithm) };
        let model = fit(&d, &cfg).unwrap();
        let file = ModelFile {
            model,
            target: "y".into(),
            covariates: (1..=4).map(|j| format!("x{j}")).collect(),
        };
        let text = model_to_string(&file);
        let back = read_model(text.as_bytes()).unwrap();
        prop_assert_eq!(model_to_string(&back), text);
        let a = file.model.predict(&x).unwrap();
        let b = back.model.predict(&x).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
