use std::f64::consts::SQRT_2;

use crate::classifier::LpdModel;
use crate::error::{Error, Result};
use crate::l1solver::support_of;
use crate::stats::DataError;

use super::GroundTruth;

/// Entries of `β*` with magnitude above this count as true nonzeros.
const TRUE_SUPPORT_EPS: f64 = 1e-10;

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Error rate of Fisher's rule with known parameters, `Φ(−√Δp / 2)`.
pub fn oracle_rate(truth: &GroundTruth) -> f64 {
    normal_cdf(-truth.delta_p.sqrt() / 2.0)
}

/// Expected error of a fitted rule on fresh Gaussian data with equal priors.
///
/// With `a = (μ̂ − μ1)ᵀβ̂`, `b = (μ̂ − μ2)ᵀβ̂`, `s = √(β̂ᵀΣβ̂)` and threshold `t`,
/// the rate is `½Φ((t + a)/s) + ½(1 − Φ((t + b)/s))`; for `t = 0` this is
/// `1 − ½Φ(−a/s) − ½Φ(b/s)`.
pub fn conditional_rate(truth: &GroundTruth, model: &LpdModel) -> Result<f64> {
    let p = truth.p();
    let (beta, mu_hat) = match &model.kept_indices {
        None => (model.beta.clone(), model.mu_hat.clone()),
        Some(kept) => {
            let mut beta = vec![0.0; p];
            let mut mu = vec![0.0; p];
            for (k, &j) in kept.iter().enumerate() {
                if j >= p {
                    return Err(DataError::IndexOutOfRange { index: j, p }.into());
                }
                beta[j] = model.beta[k];
                mu[j] = model.mu_hat[k];
            }
            (beta, mu)
        }
    };
    if beta.len() != p {
        return Err(DataError::DimensionMismatch(format!("model has {} features, truth has {p}", beta.len())).into());
    }
    let s = truth.sigma.quad_form(&beta).sqrt();
    if !(s > 0.0) {
        return Err(Error::ZeroBeta);
    }
    let proj = |mu: &[f64]| -> f64 { mu_hat.iter().zip(mu).zip(&beta).map(|((m, x), b)| (m - x) * b).sum() };
    let a = proj(&truth.mu1);
    let b = proj(&truth.mu2);
    let t = model.threshold;
    Ok(0.5 * normal_cdf((t + a) / s) + 0.5 * (1.0 - normal_cdf((t + b) / s)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportMetrics {
    /// Declared nonzeros in `β̂`.
    pub pos: usize,
    /// Declared nonzeros that are nonzero in `β*`.
    pub tpos: usize,
    pub tpr: f64,
    pub fpr: f64,
}

/// Support recovery of `β̂` against `β*`. `β̂` entries count as nonzero above
/// `support_eps · max|β̂|`; rates with an empty denominator are 0.
pub fn support_metrics(beta_hat: &[f64], beta_star: &[f64], support_eps: f64) -> Result<SupportMetrics> {
    if beta_hat.len() != beta_star.len() {
        return Err(DataError::DimensionMismatch(format!(
            "estimate has length {}, truth has {}",
            beta_hat.len(),
            beta_star.len()
        ))
        .into());
    }
    let declared = support_of(beta_hat, support_eps);
    let is_true = |j: usize| beta_star[j].abs() > TRUE_SUPPORT_EPS;
    let n_true = (0..beta_star.len()).filter(|&j| is_true(j)).count();
    let n_false = beta_star.len() - n_true;
    let pos = declared.len();
    let tpos = declared.iter().filter(|&&j| is_true(j)).count();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(SupportMetrics {
        pos,
        tpos,
        tpr: ratio(tpos, n_true),
        fpr: ratio(pos - tpos, n_false),
    })
}
