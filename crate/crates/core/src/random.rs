//! Seeded generators for test data and generic inputs.
//!
//! Every random choice in the crate goes through a [`ChaCha8Rng`] built from a
//! single `u64` seed so that runs are reproducible across platforms.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numkit::{orthonormalize_columns, Matrix};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a parent seed and a purpose tag.
pub fn substream(seed: u64, tag: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

pub fn normal(rng: &mut SeededRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// GOE-style symmetric matrix; exactly symmetric by construction.
pub fn random_symmetric(rng: &mut SeededRng, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = normal(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn random_diagonal(rng: &mut SeededRng, n: usize) -> Matrix {
    let d: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    Matrix::from_diag(&d)
}

/// Point of the Stiefel manifold: orthonormalized Gaussian `n × k` matrix.
pub fn random_stiefel(rng: &mut SeededRng, n: usize, k: usize) -> Matrix {
    loop {
        let g = random_matrix(rng, n, k);
        if let Ok(q) = orthonormalize_columns(&g) {
            return q;
        }
    }
}

pub fn random_orthogonal(rng: &mut SeededRng, n: usize) -> Matrix {
    random_stiefel(rng, n, n)
}

pub fn random_unit_complex(rng: &mut SeededRng) -> Complex64 {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(1.0, theta)
}

pub fn random_complex_normal(rng: &mut SeededRng) -> Complex64 {
    Complex64::new(normal(rng), normal(rng)) / std::f64::consts::SQRT_2
}

/// Uniform sample in `[-1, 1)`.
pub fn uniform_symmetric(rng: &mut SeededRng) -> f64 {
    rng.random_range(-1.0..1.0)
}
