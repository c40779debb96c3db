#![allow(dead_code)]

pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spcrsvd::kernels::{Mat, Vector};
use spcrsvd::model::{preprocess, Dataset};

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Gaussian design with a dense linear signal plus noise, centered.
pub fn gaussian_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let x = random_mat(rng, n, p);
    let coef = Vector::from_fn(p, |j, _| 1.0 / (j as f64 + 1.0));
    let noise = Vector::from_fn(n, |_, _| 0.3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng));
    let y = &x * coef + noise;
    preprocess(&x, &y, false).unwrap()
}

/// Raw Gaussian design and response `y = Xb + 0.5 ε` with integer-ish `b`.
pub fn raw_problem(seed: u64, n: usize, p: usize) -> (Mat, Vector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_mat(&mut rng, n, p);
    let b = Vector::from_fn(p, |j, _| (j as f64 - 1.5) * 0.8);
    let y = &x * b + Vector::from_fn(n, |_, _| 0.5 * rng.random_range(-1.0..1.0));
    (x, y)
}

/// Solver fixtures as `(seed, n, p, k, λ_V, λ_β)` over [`gaussian_dataset`].
pub fn convergence_fixtures() -> Vec<(u64, usize, usize, usize, f64, f64)> {
    vec![
        (41, 40, 5, 1, 0.01, 0.01),
        (42, 60, 6, 2, 0.02, 0.0),
        (43, 50, 8, 3, 0.0, 0.05),
        (44, 80, 4, 4, 0.0, 0.0),
    ]
}
