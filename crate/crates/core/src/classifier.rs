//! Linear discriminant rules: the LPD rule, its baselines, and the
//! multi-class extension.
//!
//! Every binary rule has the form: assign `z` to class 1 iff
//! `(z − μ̂)ᵀβ̂ ≥ threshold`, so all of them are represented by [`LpdModel`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::l1solver::{self, LpProblem, LpSolution, SolverConfig};
use crate::linalg::{self, dot, Matrix};
use crate::stats::{self, DataError, LabeledDataset, TwoSampleMoments};

/// Ridge added to the pooled covariance before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `sqrt(log p / n)` computed from the training data.
    Auto,
    Fixed(f64),
}

impl Ridge {
    pub fn resolve(self, p: usize, n: usize) -> f64 {
        match self {
            Ridge::Auto => l1solver::default_ridge(p, n),
            Ridge::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Priors {
    #[default]
    Equal,
    /// Known `(π1, π2)`.
    Known(f64, f64),
    /// `π̂k = n_k / n` from the training data.
    Estimated,
}

impl Priors {
    fn threshold(self, n1: usize, n2: usize) -> Result<f64> {
        let (p1, p2) = match self {
            Priors::Equal => return Ok(0.0),
            Priors::Known(a, b) => (a, b),
            Priors::Estimated => (n1 as f64, n2 as f64),
        };
        if !(p1 > 0.0 && p2 > 0.0 && p1.is_finite() && p2.is_finite()) {
            return Err(Error::InvalidArgument(format!("priors must be positive, got ({p1}, {p2})")));
        }
        Ok((p2 / p1).ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpdParams {
    pub lambda: f64,
    pub ridge: Ridge,
    pub priors: Priors,
    pub solver: SolverConfig,
}

impl LpdParams {
    pub fn new(lambda: f64) -> Self {
        LpdParams {
            lambda,
            ridge: Ridge::Auto,
            priors: Priors::Equal,
            solver: SolverConfig::default(),
        }
    }
}

/// A fitted linear rule. Class 1 iff `(z − μ̂)ᵀβ̂ ≥ threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdModel {
    pub beta: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub threshold: f64,
    pub lambda: f64,
    pub ridge_rho: f64,
    /// When set, `beta` addresses `z[kept_indices[j]]` of the original feature vector.
    pub kept_indices: Option<Vec<usize>>,
    pub metadata: BTreeMap<String, String>,
}

impl LpdModel {
    /// A rule with zero threshold and no provenance.
    pub fn linear(beta: Vec<f64>, mu_hat: Vec<f64>) -> Self {
        LpdModel {
            beta,
            mu_hat,
            threshold: 0.0,
            lambda: 0.0,
            ridge_rho: 0.0,
            kept_indices: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Discriminant score `(z − μ̂)ᵀβ̂`.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        match &self.kept_indices {
            None => {
                if z.len() != self.beta.len() {
                    return Err(DataError::DimensionMismatch(format!(
                        "model has {} features, sample has {}",
                        self.beta.len(),
                        z.len()
                    ))
                    .into());
                }
                Ok(z.iter()
                    .zip(&self.mu_hat)
                    .zip(&self.beta)
                    .map(|((zi, mi), bi)| (zi - mi) * bi)
                    .sum())
            }
            Some(kept) => {
                if let Some(&bad) = kept.iter().find(|&&j| j >= z.len()) {
                    return Err(DataError::DimensionMismatch(format!(
                        "model uses feature {bad}, sample has {}",
                        z.len()
                    ))
                    .into());
                }
                Ok(kept
                    .iter()
                    .zip(&self.mu_hat)
                    .zip(&self.beta)
                    .map(|((&j, mi), bi)| (z[j] - mi) * bi)
                    .sum())
            }
        }
    }

    /// Class 1 iff the score is at least the threshold; ties go to class 1.
    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        Ok(self.class_of_score(self.score(z)?))
    }

    pub fn class_of_score(&self, score: f64) -> usize {
        if score >= self.threshold {
            1
        } else {
            2
        }
    }

    pub fn predict_all(&self, data: &Matrix) -> Result<Vec<usize>> {
        (0..data.rows()).map(|i| self.predict(data.row(i))).collect()
    }

    /// Fraction of misclassified samples.
    pub fn error_rate(&self, data: &LabeledDataset) -> Result<f64> {
        let mut wrong = 0usize;
        for i in 0..data.n() {
            if self.predict(data.sample(i))? != data.labels()[i] {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / data.n() as f64)
    }

    fn with_threshold(mut self, data_counts: (usize, usize), priors: Priors) -> Result<Self> {
        self.threshold = priors.threshold(data_counts.0, data_counts.1)?;
        Ok(self)
    }
}

/// Solves the ℓ1 program for precomputed moments.
pub fn fit_lpd_moments(moments: &TwoSampleMoments, params: &LpdParams) -> Result<(LpdModel, LpSolution)> {
    let ridge_rho = params.ridge.resolve(moments.p(), moments.n());
    let problem = LpProblem::new(
        moments.sigma_hat.clone(),
        moments.delta_hat.clone(),
        params.lambda,
        ridge_rho,
    )?;
    let solution = l1solver::solve(&problem, &params.solver)?.require_optimal()?;
    let mut model = LpdModel::linear(solution.beta.clone(), moments.mu_hat.clone());
    model.lambda = params.lambda;
    model.ridge_rho = ridge_rho;
    let model = model.with_threshold((moments.n1, moments.n2), params.priors)?;
    Ok((model, solution))
}

/// LPD rule: `β̂ = argmin |β|₁ s.t. |(Σ̂n + ρI)β − δ̂|∞ ≤ λ`.
pub fn fit_lpd(data: &LabeledDataset, params: &LpdParams) -> Result<LpdModel> {
    let moments = stats::compute_moments(data)?;
    Ok(fit_lpd_moments(&moments, params)?.0)
}

/// Independence (naive Bayes) rule `β̂ = diag(Σ̂n)⁻¹ δ̂`.
pub fn fit_naive_bayes(data: &LabeledDataset) -> Result<LpdModel> {
    let m = stats::compute_moments(data)?;
    let all: Vec<usize> = (0..m.p()).collect();
    naive_bayes_on(&m, &all)
}

fn naive_bayes_on(m: &TwoSampleMoments, support: &[usize]) -> Result<LpdModel> {
    let mut beta = vec![0.0; m.p()];
    for &j in support {
        let v = m.sigma_hat[(j, j)];
        if !(v > 0.0) {
            return Err(DataError::ZeroVariance(j).into());
        }
        beta[j] = m.delta_hat[j] / v;
    }
    Ok(LpdModel::linear(beta, m.mu_hat.clone()))
}

/// LDA with the Moore-Penrose inverse: `β̂ = Σ̂n⁺ δ̂`.
pub fn fit_glda(data: &LabeledDataset, rank_tol: f64) -> Result<LpdModel> {
    let m = stats::compute_moments(data)?;
    let pinv = linalg::pseudo_inverse(&m.sigma_hat, rank_tol)?;
    Ok(LpdModel::linear(pinv.mul_vec(&m.delta_hat), m.mu_hat))
}

/// Independence rule restricted to a known support; zero elsewhere.
pub fn fit_ofair(data: &LabeledDataset, support: &[usize]) -> Result<LpdModel> {
    if support.is_empty() {
        return Err(DataError::EmptySupport.into());
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= data.p()) {
        return Err(DataError::IndexOutOfRange { index: bad, p: data.p() }.into());
    }
    let m = stats::compute_moments(data)?;
    naive_bayes_on(&m, support)
}

/// Fisher's rule with known parameters: `β = Ω(μ1 − μ2)`, `μ = (μ1 + μ2)/2`.
pub fn oracle_fisher(mu1: &[f64], mu2: &[f64], omega: &Matrix) -> Result<LpdModel> {
    if mu1.len() != mu2.len() || omega.rows() != mu1.len() || omega.cols() != mu1.len() {
        return Err(DataError::DimensionMismatch(format!(
            "means of length {} and {}, precision {}x{}",
            mu1.len(),
            mu2.len(),
            omega.rows(),
            omega.cols()
        ))
        .into());
    }
    let delta = linalg::sub(mu1, mu2);
    let mu = mu1.iter().zip(mu2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(LpdModel::linear(omega.mul_vec(&delta), mu))
}

/// Separation of the oracle independence rule and of Fisher's rule:
/// `Υp = δᵀD⁻¹δ / sqrt(δᵀD⁻¹ΣD⁻¹δ)` with `D = diag(Σ)`, and `Δp = δᵀΣ⁻¹δ`.
/// The corresponding error rates are `Φ(−Υp/2)` and `Φ(−√Δp/2)`.
pub fn oracle_independence_gap(sigma: &Matrix, delta: &[f64]) -> Result<(f64, f64)> {
    let d_inv_delta: Vec<f64> = delta
        .iter()
        .zip(sigma.diag())
        .map(|(d, s)| d / s)
        .collect();
    let num = dot(delta, &d_inv_delta);
    let den = sigma.quad_form(&d_inv_delta).sqrt();
    let upsilon = if den > 0.0 { num / den } else { 0.0 };
    let delta_p = dot(delta, &linalg::cholesky_solve(sigma, delta)?);
    Ok((upsilon, delta_p))
}

/// Pairwise rule for classes `k < l`: positive scores favour `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRule {
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassLpdModel {
    pub class_ids: Vec<usize>,
    /// Keyed by `(k, l)` with `k < l`; the `(l, k)` rule is the negation.
    pub pairwise: BTreeMap<(usize, usize), PairwiseRule>,
    pub lambda: f64,
    pub ridge_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiClassPrediction {
    pub class: usize,
    /// No class won every pairwise comparison; the max-min fallback decided.
    pub fallback: bool,
}

impl MultiClassLpdModel {
    /// `(z − μ_kl)ᵀβ_kl`, antisymmetric in `(k, l)`.
    pub fn pair_score(&self, k: usize, l: usize, z: &[f64]) -> f64 {
        let (key, sign) = if k < l { ((k, l), 1.0) } else { ((l, k), -1.0) };
        let rule = &self.pairwise[&key];
        sign * z
            .iter()
            .zip(&rule.mu)
            .zip(&rule.beta)
            .map(|((zi, mi), bi)| (zi - mi) * bi)
            .sum::<f64>()
    }

    /// Class `k` wins when `(z − μ_kl)ᵀβ_kl ≥ 0` for every `l ≠ k` (lowest id
    /// first). If no class wins, the class maximizing its smallest pairwise
    /// score is returned with `fallback = true`.
    pub fn predict(&self, z: &[f64]) -> Result<MultiClassPrediction> {
        let p = self.pairwise.values().next().map_or(0, |r| r.beta.len());
        if z.len() != p {
            return Err(DataError::DimensionMismatch(format!(
                "model has {p} features, sample has {}",
                z.len()
            ))
            .into());
        }
        let mut best: Option<(f64, usize)> = None;
        for &k in &self.class_ids {
            let worst = self
                .class_ids
                .iter()
                .filter(|&&l| l != k)
                .map(|&l| self.pair_score(k, l, z))
                .fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Ok(MultiClassPrediction {
                    class: k,
                    fallback: false,
                });
            }
            if best.is_none_or(|(b, _)| worst > b) {
                best = Some((worst, k));
            }
        }
        let (_, class) = best.expect("at least two classes");
        Ok(MultiClassPrediction {
            class,
            fallback: true,
        })
    }
}

/// Fits one ℓ1 program per class pair against the covariance pooled over all
/// classes.
pub fn fit_multiclass(data: &LabeledDataset, params: &LpdParams) -> Result<MultiClassLpdModel> {
    let pooled = stats::pooled_moments(data, 2)?;
    if pooled.class_ids.len() < 2 {
        let present = pooled.class_ids.first().copied().unwrap_or(1);
        return Err(DataError::ClassMissing(if present == 1 { 2 } else { 1 }).into());
    }
    let ridge_rho = params.ridge.resolve(data.p(), pooled.n());
    let mut pairwise = BTreeMap::new();
    for a in 0..pooled.class_ids.len() {
        for b in (a + 1)..pooled.class_ids.len() {
            let delta = linalg::sub(&pooled.means[a], &pooled.means[b]);
            let mu = pooled.means[a]
                .iter()
                .zip(&pooled.means[b])
                .map(|(x, y)| 0.5 * (x + y))
                .collect();
            let problem = LpProblem::new(pooled.sigma_hat.clone(), delta, params.lambda, ridge_rho)?;
            let sol = l1solver::solve(&problem, &params.solver)?.require_optimal()?;
            pairwise.insert(
                (pooled.class_ids[a], pooled.class_ids[b]),
                PairwiseRule { beta: sol.beta, mu },
            );
        }
    }
    Ok(MultiClassLpdModel {
        class_ids: pooled.class_ids,
        pairwise,
        lambda: params.lambda,
        ridge_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> LabeledDataset {
        let x = Matrix::from_row_major(2, 1, vec![0.0, 2.0]).unwrap();
        let y = Matrix::from_row_major(2, 1, vec![1.0, 3.0]).unwrap();
        LabeledDataset::from_two_samples(&x, &y).unwrap()
    }

    fn random_data(seed: u64, n: usize, p: usize, shift: f64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_fn(n, p, |_, j| rng.random_range(-1.0..1.0) + if j == 0 { shift } else { 0.0 });
        let y = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        LabeledDataset::from_two_samples(&x, &y).unwrap()
    }

    #[test]
    fn scalar_lpd_is_soft_threshold() {
        let model = fit_lpd(&toy(), &LpdParams::new(0.5)).unwrap();
        assert_eq!(model.ridge_rho, 0.0); // log 1 = 0
        assert!((model.beta[0] + 0.5).abs() < 1e-6);
        assert_eq!(model.mu_hat, vec![1.5]);
        assert_eq!(model.threshold, 0.0);
        assert_eq!(model.predict(&[2.5]).unwrap(), 2);
        assert_eq!(model.predict(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn predict_conventions() {
        let m = LpdModel::linear(vec![1.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(m.predict(&[0.5, 100.0]).unwrap(), 1);
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), 1); // tie
        assert_eq!(m.predict(&[-0.5, 0.0]).unwrap(), 2);
        assert!(m.predict(&[1.0]).is_err());
        let m = LpdModel::linear(vec![-0.5], vec![1.5]);
        assert_eq!(m.score(&[2.5]).unwrap(), -0.5);
        assert_eq!(m.predict(&[2.5]).unwrap(), 2);
    }

    #[test]
    fn kept_indices_address_original_features() {
        let mut m = LpdModel::linear(vec![1.0], vec![0.0]);
        m.kept_indices = Some(vec![2]);
        assert_eq!(m.predict(&[-9.0, -9.0, 1.0]).unwrap(), 1);
        assert_eq!(m.predict(&[9.0, 9.0, -1.0]).unwrap(), 2);
        assert!(m.predict(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn priors_shift_threshold() {
        let data = random_data(1, 10, 3, 1.0);
        let mut params = LpdParams::new(0.1);
        params.priors = Priors::Known(0.25, 0.75);
        let m = fit_lpd(&data, &params).unwrap();
        assert!((m.threshold - 3f64.ln()).abs() < 1e-15);
        params.priors = Priors::Estimated;
        assert_eq!(fit_lpd(&data, &params).unwrap().threshold, 0.0);
        params.priors = Priors::Known(0.0, 1.0);
        assert!(fit_lpd(&data, &params).is_err());
    }

    #[test]
    fn naive_bayes_elementwise() {
        let data = random_data(2, 15, 6, 0.7);
        let m = stats::compute_moments(&data).unwrap();
        let nb = fit_naive_bayes(&data).unwrap();
        for j in 0..6 {
            assert!((nb.beta[j] - m.delta_hat[j] / m.sigma_hat[(j, j)]).abs() < 1e-14);
        }
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(fit_ofair(&data, &all).unwrap(), nb);
        let one = fit_ofair(&data, &[0]).unwrap();
        assert!((one.beta[0] - nb.beta[0]).abs() < 1e-15);
        assert!(one.beta[1..].iter().all(|&b| b == 0.0));
        assert!(matches!(fit_ofair(&data, &[]), Err(Error::Data(DataError::EmptySupport))));
        assert!(fit_ofair(&data, &[6]).is_err());
    }

    #[test]
    fn naive_bayes_zero_variance() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let data = LabeledDataset::from_two_samples(&x, &y).unwrap();
        assert!(matches!(
            fit_naive_bayes(&data),
            Err(Error::Data(DataError::ZeroVariance(1)))
        ));
    }

    #[test]
    fn zero_delta_gives_zero_beta() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let data = LabeledDataset::from_two_samples(&x, &x).unwrap();
        assert!(fit_naive_bayes(&data).unwrap().beta.iter().all(|&b| b == 0.0));
        assert!(fit_glda(&data, 1e-10).unwrap().beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn glda_invertible_matches_solve() {
        let data = random_data(3, 30, 4, 1.0);
        let m = stats::compute_moments(&data).unwrap();
        let g = fit_glda(&data, 1e-10).unwrap();
        let direct = linalg::cholesky_solve(&m.sigma_hat, &m.delta_hat).unwrap();
        assert!(linalg::norm_inf(&linalg::sub(&g.beta, &direct)) < 1e-8);
    }

    #[test]
    fn glda_rank_deficient_in_row_space() {
        let data = random_data(4, 3, 10, 1.0); // n = 6 < p
        let m = stats::compute_moments(&data).unwrap();
        let g = fit_glda(&data, 1e-10).unwrap();
        // projection onto range(Σ̂) leaves β̂ unchanged
        let proj = linalg::pseudo_inverse(&m.sigma_hat, 1e-10)
            .unwrap()
            .matmul(&m.sigma_hat);
        let pb = proj.mul_vec(&g.beta);
        assert!(linalg::norm_inf(&linalg::sub(&pb, &g.beta)) < 1e-8 * (1.0 + linalg::norm_inf(&g.beta)));
    }

    #[test]
    fn naive_equals_glda_for_diagonal_covariance() {
        // class-wise symmetric sign patterns give an exactly diagonal pooled covariance
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.5],
            vec![-1.0, 1.0, -0.5],
            vec![1.0, -1.0, -0.5],
            vec![-1.0, -1.0, 0.5],
        ])
        .unwrap();
        let y = x.add(&Matrix::from_fn(4, 3, |_, j| j as f64 + 1.0));
        let data = LabeledDataset::from_two_samples(&x, &y).unwrap();
        let m = stats::compute_moments(&data).unwrap();
        assert!(m.sigma_hat.sub(&Matrix::from_diag(&m.sigma_hat.diag())).max_abs() < 1e-15);
        let nb = fit_naive_bayes(&data).unwrap();
        let gl = fit_glda(&data, 1e-10).unwrap();
        assert!(linalg::norm_inf(&linalg::sub(&nb.beta, &gl.beta)) < 1e-10);
    }

    #[test]
    fn oracle_fisher_cases() {
        let m = oracle_fisher(&[1.0, 2.0], &[0.0, 0.0], &Matrix::identity(2)).unwrap();
        assert_eq!(m.beta, vec![1.0, 2.0]);
        assert_eq!(m.mu_hat, vec![0.5, 1.0]);
        let z = oracle_fisher(&[1.0, 2.0], &[1.0, 2.0], &Matrix::identity(2)).unwrap();
        assert_eq!(z.beta, vec![0.0, 0.0]);
        assert!(oracle_fisher(&[1.0], &[0.0, 0.0], &Matrix::identity(2)).is_err());
        // AR(1) precision for p = 5, rho = 0.8, delta = e1 + e2
        let r: f64 = 0.8;
        let omega = Matrix::from_fn(5, 5, |i: usize, j: usize| {
            let interior = i > 0 && i < 4;
            if i == j {
                if interior { (1.0 + r * r) / (1.0 - r * r) } else { 1.0 / (1.0 - r * r) }
            } else if i.abs_diff(j) == 1usize {
                -r / (1.0 - r * r)
            } else {
                0.0
            }
        });
        let m = oracle_fisher(&[0.0; 5], &[-1.0, -1.0, 0.0, 0.0, 0.0], &omega).unwrap();
        // hand multiplication: row i of Ω dotted with (1, 1, 0, 0, 0)
        let expect = [
            1.0 / 0.36 - 0.8 / 0.36,
            -0.8 / 0.36 + 1.64 / 0.36,
            -0.8 / 0.36,
            0.0,
            0.0,
        ];
        for (b, e) in m.beta.iter().zip(expect) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn independence_gap_identity_case() {
        let delta = [1.0, -2.0, 0.5];
        let (u, d) = oracle_independence_gap(&Matrix::identity(3), &delta).unwrap();
        let norm2 = 1.0 + 4.0 + 0.25;
        assert!((u * u - norm2).abs() < 1e-12);
        assert!((d - norm2).abs() < 1e-12);
    }

    #[test]
    fn multiclass_two_classes_agrees_with_binary() {
        let data = random_data(5, 25, 5, 1.0);
        let params = LpdParams::new(0.15);
        let bin = fit_lpd(&data, &params).unwrap();
        let multi = fit_multiclass(&data, &params).unwrap();
        assert_eq!(multi.class_ids, vec![1, 2]);
        for i in 0..data.n() {
            let p = multi.predict(data.sample(i)).unwrap();
            assert_eq!(p.class, bin.predict(data.sample(i)).unwrap());
            assert!(!p.fallback);
        }
    }

    #[test]
    fn multiclass_degenerate_fallback() {
        // three rules that form a cycle: 1 beats 2, 2 beats 3, 3 beats 1 at z = 0
        let mut pairwise = BTreeMap::new();
        let rule = |b: f64| PairwiseRule { beta: vec![b], mu: vec![-1.0] };
        pairwise.insert((1, 2), rule(1.0)); // score(1,2) = 1
        pairwise.insert((2, 3), rule(1.0)); // score(2,3) = 1
        pairwise.insert((1, 3), rule(-1.0)); // score(1,3) = -1
        let model = MultiClassLpdModel {
            class_ids: vec![1, 2, 3],
            pairwise,
            lambda: 0.0,
            ridge_rho: 0.0,
        };
        let p = model.predict(&[0.0]).unwrap();
        assert!(p.fallback);
        // every class has worst score -1: the lowest id wins the tie
        assert_eq!(p.class, 1);
    }
}
