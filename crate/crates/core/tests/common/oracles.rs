//! Brute-force references for the block updates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use spcrsvd::admm::AdmmState;
use spcrsvd::kernels::{Mat, Vector};
use spcrsvd::solver::Design;

/// Minimizes `φ` over `[lo, hi]` by a dense grid followed by one local
/// refinement; returns the minimizer and the final grid spacing.
pub fn grid_argmin(phi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut best = a;
    let mut h = 0.0;
    for _ in 0..2 {
        let steps = 2000;
        h = (b - a) / steps as f64;
        best = (0..=steps)
            .map(|i| a + h * i as f64)
            .min_by(|x, y| phi(*x).total_cmp(&phi(*y)))
            .unwrap();
        a = best - 2.0 * h;
        b = best + 2.0 * h;
    }
    (best, h)
}

/// `vec(V₁)` from the explicit `(ββᵀ ⊗ XᵀX/n + (ρ₂/2)I) vec(V₁) = vec(R)`.
pub fn v1_kronecker(s: &AdmmState, design: &Design<'_>, rho2: f64) -> Mat {
    let (p, k) = s.v.shape();
    let bbt = &s.beta * s.beta.transpose();
    let lhs = bbt.kronecker(&design.gram) + Mat::identity(p * k, p * k) * (rho2 / 2.0);
    let rhs = design.xty_centered(s.intercept) * s.beta.transpose() + (&s.v0 - &s.lambda2) * (rho2 / 2.0);
    let vec_r = Vector::from_column_slice(rhs.as_slice());
    let sol = lhs.lu().solve(&vec_r).unwrap();
    Mat::from_column_slice(p, k, sol.as_slice())
}

/// Orthonormal 5 × 2 frames as the first two columns of a product of
/// Givens rotations; coordinate ascent over the angles with shrinking
/// steps after a coarse random start.
pub fn stiefel_search(m: &Mat, rng: &mut ChaCha8Rng) -> f64 {
    let (p, k) = m.shape();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let frame = |angles: &[f64]| {
        let mut q = Mat::identity(p, p);
        for (&(i, j), &t) in pairs.iter().zip(angles) {
            let (c, s) = (t.cos(), t.sin());
            for r in 0..p {
                let (a, b) = (q[(r, i)], q[(r, j)]);
                q[(r, i)] = c * a - s * b;
                q[(r, j)] = s * a + c * b;
            }
        }
        q.columns(0, k).into_owned()
    };
    let score = |angles: &[f64], flips: &[f64]| {
        let mut v = frame(angles);
        for (j, f) in flips.iter().enumerate() {
            v.column_mut(j).scale_mut(*f);
        }
        (v.transpose() * m).trace()
    };
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1 << k) {
        let flips: Vec<f64> = (0..k).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut angles: Vec<f64> = vec![0.0; pairs.len()];
        let mut cur = f64::NEG_INFINITY;
        for _ in 0..400 {
            let cand: Vec<f64> = (0..pairs.len()).map(|_| rng.random_range(-3.2..3.2)).collect();
            let v = score(&cand, &flips);
            if v > cur {
                cur = v;
                angles = cand;
            }
        }
        let mut step = 0.5;
        while step > 1e-7 {
            let mut improved = false;
            for a in 0..angles.len() {
                for dir in [step, -step] {
                    angles[a] += dir;
                    let v = score(&angles, &flips);
                    if v > cur {
                        cur = v;
                        improved = true;
                    } else {
                        angles[a] -= dir;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        best = best.max(cur);
    }
    best
}
