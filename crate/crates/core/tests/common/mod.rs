#![allow(dead_code)]

pub mod simplex;

use lpd::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `MᵀM + 0.5 I` with uniform entries in [-1, 1).
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.transpose().matmul(&m).add_diag(0.5)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn soft_threshold(b: f64, lambda: f64) -> f64 {
    b.signum() * (b.abs() - lambda).max(0.0)
}

/// Minimum of |β|₁ subject to |Aβ − b|∞ ≤ λ via the simplex oracle.
pub fn l1_oracle(a: &Matrix, b: &[f64], lambda: f64) -> Option<(f64, Vec<f64>)> {
    let p = b.len();
    // y = (β⁺, β⁻) ≥ 0
    let mut rows = Vec::with_capacity(2 * p);
    let mut rhs = Vec::with_capacity(2 * p);
    for k in 0..p {
        let mut up = Vec::with_capacity(2 * p);
        let mut down = Vec::with_capacity(2 * p);
        for j in 0..p {
            up.push(a[(k, j)]);
            down.push(-a[(k, j)]);
        }
        for j in 0..p {
            up.push(-a[(k, j)]);
            down.push(a[(k, j)]);
        }
        rows.push(up);
        rhs.push(lambda + b[k]);
        rows.push(down);
        rhs.push(lambda - b[k]);
    }
    let c = vec![1.0; 2 * p];
    let (obj, y) = simplex::minimize(&c, &rows, &rhs)?;
    let beta = (0..p).map(|j| y[j] - y[p + j]).collect();
    Some((obj, beta))
}
