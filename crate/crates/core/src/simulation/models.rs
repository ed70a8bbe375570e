use rand::Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};

use crate::error::Result;
use crate::linalg::{self, dot, Cholesky, Matrix};
use crate::stats::{DataError, LabeledDataset};

use super::{Distribution, ModelKind, SimulationSpec};

/// Shift added to `−λmin(B)` when building the Model 2 precision matrix.
const MODEL2_SHIFT: f64 = 0.05;
const MODEL2_LINK_PROB: f64 = 0.2;
const MODEL2_LINK: f64 = 0.5;

/// Population parameters of a two-class problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub sigma: Matrix,
    pub omega: Matrix,
    /// `Ω(μ1 − μ2)`
    pub beta_star: Vec<f64>,
    /// `(μ1 − μ2)ᵀΩ(μ1 − μ2)`
    pub delta_p: f64,
    sigma_factor: Matrix,
}

impl GroundTruth {
    pub fn new(mu1: Vec<f64>, mu2: Vec<f64>, sigma: Matrix, omega: Matrix) -> Result<Self> {
        let p = mu1.len();
        if mu2.len() != p || sigma.rows() != p || omega.rows() != p {
            return Err(DataError::DimensionMismatch(format!(
                "means of length {p} and {}, covariance {}x{}, precision {}x{}",
                mu2.len(),
                sigma.rows(),
                sigma.cols(),
                omega.rows(),
                omega.cols()
            ))
            .into());
        }
        let delta = linalg::sub(&mu1, &mu2);
        let beta_star = omega.mul_vec(&delta);
        let delta_p = dot(&delta, &beta_star);
        if !(delta_p > 0.0) {
            return Err(DataError::DegenerateDelta.into());
        }
        let sigma_factor = Cholesky::new(&sigma)?.factor().clone();
        Ok(GroundTruth {
            mu1,
            mu2,
            sigma,
            omega,
            beta_star,
            delta_p,
            sigma_factor,
        })
    }

    pub fn p(&self) -> usize {
        self.mu1.len()
    }

    pub fn delta(&self) -> Vec<f64> {
        linalg::sub(&self.mu1, &self.mu2)
    }

    /// Coordinates where the class means differ.
    pub fn delta_support(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.mu1[j] != self.mu2[j]).collect()
    }

    /// Lower Cholesky factor of `Σ`.
    pub fn sigma_factor(&self) -> &Matrix {
        &self.sigma_factor
    }
}

fn compound_symmetry(p: usize, rho: f64) -> (Matrix, Matrix) {
    let sigma = Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    // (1−ρ)⁻¹ (I − ρ/(1+(p−1)ρ) 11ᵀ)
    let c = rho / (1.0 + (p as f64 - 1.0) * rho);
    let omega = Matrix::from_fn(p, p, |i, j| {
        let base = if i == j { 1.0 } else { 0.0 };
        (base - c) / (1.0 - rho)
    });
    (sigma, omega)
}

fn ar1(p: usize, rho: f64) -> Result<(Matrix, Matrix)> {
    let sigma = Matrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32));
    let omega = linalg::spd_inverse(&sigma)?;
    Ok((sigma, omega))
}

fn sparse_precision(p: usize, s0: usize, rng: &mut impl Rng) -> Result<(Matrix, Matrix)> {
    let mut b = Matrix::identity(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let v = if i < s0 {
                if rng.random_bool(MODEL2_LINK_PROB) {
                    MODEL2_LINK
                } else {
                    0.0
                }
            } else {
                MODEL2_LINK
            };
            b.row_mut(i)[j] = v;
            b.row_mut(j)[i] = v;
        }
    }
    let shift = (-linalg::sym_eigen(&b)?.min_eigenvalue()).max(0.0) + MODEL2_SHIFT;
    let omega = b.add_diag(shift).scale(1.0 / (1.0 + shift));
    let d: Vec<f64> = omega.diag().iter().map(|v| 1.0 / v.sqrt()).collect();
    let omega = Matrix::from_fn(p, p, |i, j| d[i] * omega[(i, j)] * d[j]);
    let sigma = linalg::spd_inverse(&omega)?;
    Ok((sigma, omega))
}

/// Population for `spec`: `μ1 = 0`, `μ2` has ones in the first `s0`
/// coordinates. Only Model 2 consumes randomness.
pub fn build_model(spec: &SimulationSpec, rng: &mut impl Rng) -> Result<GroundTruth> {
    spec.validate()?;
    let p = spec.p;
    let (sigma, omega) = match spec.model {
        ModelKind::CompoundSymmetry => compound_symmetry(p, spec.rho),
        ModelKind::SparsePrecision => sparse_precision(p, spec.s0, rng)?,
        ModelKind::Ar1 => ar1(p, spec.rho)?,
    };
    let mu1 = vec![0.0; p];
    let mu2 = (0..p).map(|j| if j < spec.s0 { 1.0 } else { 0.0 }).collect();
    GroundTruth::new(mu1, mu2, sigma, omega)
}

fn draw(truth: &GroundTruth, mean: &[f64], dist: Distribution, rng: &mut impl Rng, out: &mut [f64]) {
    let p = mean.len();
    let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    let scale = match dist {
        Distribution::Normal => 1.0,
        Distribution::T5 => {
            let w: f64 = ChiSquared::new(5.0).expect("positive dof").sample(rng);
            (5.0 / w).sqrt()
        }
    };
    let l = truth.sigma_factor();
    for i in 0..p {
        out[i] = mean[i] + scale * dot(&l.row(i)[..=i], &z[..=i]);
    }
}

/// `n1` draws from class 1 followed by `n2` draws from class 2.
pub fn sample(truth: &GroundTruth, spec: &SimulationSpec, rng: &mut impl Rng) -> Result<LabeledDataset> {
    let p = truth.p();
    let n = spec.n1 + spec.n2;
    let mut features = Matrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (mean, label) = if i < spec.n1 { (&truth.mu1, 1) } else { (&truth.mu2, 2) };
        draw(truth, mean, spec.distribution, rng, features.row_mut(i));
        labels.push(label);
    }
    Ok(LabeledDataset::new(features, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(model: ModelKind, p: usize, s0: usize) -> SimulationSpec {
        let mut s = SimulationSpec::new(model, p);
        s.s0 = s0;
        s
    }

    #[test]
    fn compound_symmetry_spectrum() {
        let t = build_model(&spec(ModelKind::CompoundSymmetry, 4, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.sigma[(0, 1)], 0.5);
        let e = linalg::sym_eigen(&t.sigma).unwrap();
        assert!((e.min_eigenvalue() - 0.5).abs() < 1e-12);
        assert!(t.sigma.matmul(&t.omega).sub(&Matrix::identity(4)).max_abs() < 1e-12);
    }

    #[test]
    fn ar1_inverse_is_tridiagonal() {
        let t = build_model(&spec(ModelKind::Ar1, 5, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((t.omega[(2, 2)] - 4.5556).abs() < 1e-4);
        assert!((t.omega[(2, 3)] + 2.2222).abs() < 1e-4);
        for i in 0..5usize {
            for j in 0..5 {
                if i.abs_diff(j) > 1 {
                    assert!(t.omega[(i, j)].abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn sparse_precision_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = build_model(&spec(ModelKind::SparsePrecision, 30, 10), &mut rng).unwrap();
        assert!(t.omega.diag().iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert!(linalg::sym_eigen(&t.omega).unwrap().min_eigenvalue() > 0.0);
        assert!(t.sigma.matmul(&t.omega).sub(&Matrix::identity(30)).max_abs() < 1e-6);
        // off-diagonal entries take one of two values: 0 or the scaled link
        let link = t.omega[(10, 11)];
        assert!(link > 0.0);
        for i in 0..30 {
            for j in 0..30 {
                let v = t.omega[(i, j)];
                if i != j {
                    assert!(v == 0.0 || (v - link).abs() < 1e-15, "({i},{j}) = {v}");
                }
                if i != j && i >= 10 && j >= 10 {
                    assert!((v - link).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn truth_rejects_equal_means() {
        let r = GroundTruth::new(vec![0.0], vec![0.0], Matrix::identity(1), Matrix::identity(1));
        assert!(r.is_err());
    }

    #[test]
    fn sample_layout_and_determinism() {
        let s = spec(ModelKind::Ar1, 4, 2);
        let t = build_model(&s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let a = sample(&t, &s, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample(&t, &s, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 400);
        assert_eq!(a.class_count(1), 200);
        assert_eq!(a.labels()[0], 1);
        assert_eq!(a.labels()[399], 2);
    }
}
