#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensel_core::model::{gen_gaussian_problem, CandidateBasis};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn basis(n: usize, r: usize, seed: u64) -> CandidateBasis {
    gen_gaussian_problem(n, r, seed).unwrap()
}

/// Interior weights, not normalized.
pub fn interior_weights(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.05..0.95)).collect()
}

/// Determinant by cofactor expansion along the first row.
pub fn det_laplace(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * det_laplace(&minor)
            })
            .sum(),
    }
}

/// `Σ_i w_i u_iᵀ u_i`, one outer product at a time.
pub fn naive_fisher(u: &CandidateBasis, w: &[f64]) -> DMatrix<f64> {
    let r = u.r();
    let mut acc = DMatrix::zeros(r, r);
    for (i, &wi) in w.iter().enumerate() {
        let row = u.matrix().row(i);
        for a in 0..r {
            for b in 0..r {
                acc[(a, b)] += wi * row[a] * row[b];
            }
        }
    }
    acc
}

/// Relaxed objective from the explicit determinant.
pub fn objective_oracle(u: &CandidateBasis, w: &[f64], kappa: f64) -> f64 {
    det_laplace(&naive_fisher(u, w)).ln() + kappa * w.iter().map(|x| x.ln() + (1.0 - x).ln()).sum::<f64>()
}

pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

pub fn random_vec(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
}
