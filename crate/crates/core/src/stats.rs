//! Labeled datasets, sample moments and feature screening.

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("class {0} has no samples")]
    ClassMissing(usize),
    #[error("class {class} has {count} samples, need at least {needed}")]
    TooFewSamples {
        class: usize,
        count: usize,
        needed: usize,
    },
    #[error("expected a binary dataset with classes 1 and 2, found classes {0:?}")]
    NotBinary(Vec<usize>),
    #[error("every feature was dropped by the filter")]
    AllFeaturesDropped,
    #[error("feature {0} has zero pooled variance")]
    ZeroVariance(usize),
    #[error("support set is empty")]
    EmptySupport,
    #[error("feature index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("mean difference is identically zero")]
    DegenerateDelta,
    #[error("non-finite feature value at sample {row}, feature {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Feature matrix (`n × p`) with one class id per sample. Class ids start at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    /// Original label text for class id `k` at position `k - 1`, when known.
    pub label_names: Vec<String>,
    /// Original feature names (e.g. CSV header), when known.
    pub feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self, DataError> {
        if features.rows() != labels.len() {
            return Err(DataError::DimensionMismatch(format!(
                "{} samples but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l == 0) {
            return Err(DataError::InvalidArgument(format!(
                "class id 0 at sample {pos}; ids start at 1"
            )));
        }
        for i in 0..features.rows() {
            if let Some(j) = features.row(i).iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i, col: j });
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            label_names: Vec::new(),
            feature_names: None,
        })
    }

    /// Stacks class-1 rows `x` over class-2 rows `y`.
    pub fn from_two_samples(x: &Matrix, y: &Matrix) -> Result<Self, DataError> {
        if x.cols() != y.cols() {
            return Err(DataError::DimensionMismatch(format!(
                "class 1 has {} features, class 2 has {}",
                x.cols(),
                y.cols()
            )));
        }
        let mut data = Vec::with_capacity((x.rows() + y.rows()) * x.cols());
        data.extend_from_slice(x.as_slice());
        data.extend_from_slice(y.as_slice());
        let features = Matrix::from_row_major(x.rows() + y.rows(), x.cols(), data)
            .expect("sizes agree by construction");
        let mut labels = vec![1; x.rows()];
        labels.extend(std::iter::repeat_n(2, y.rows()));
        Self::new(features, labels)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Distinct class ids, ascending.
    pub fn class_ids(&self) -> Vec<usize> {
        let mut ids = self.labels.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// Errors unless the only classes are 1 and 2, each with `min_per_class` samples.
    pub fn check_binary(&self, min_per_class: usize) -> Result<(usize, usize), DataError> {
        let ids = self.class_ids();
        if ids.iter().any(|&c| c > 2) {
            return Err(DataError::NotBinary(ids));
        }
        let n1 = self.class_count(1);
        let n2 = self.class_count(2);
        for (class, count) in [(1, n1), (2, n2)] {
            if count == 0 {
                return Err(DataError::ClassMissing(class));
            }
            if count < min_per_class {
                return Err(DataError::TooFewSamples {
                    class,
                    count,
                    needed: min_per_class,
                });
            }
        }
        Ok((n1, n2))
    }

    /// Rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_columns(cols),
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
            feature_names: self
                .feature_names
                .as_ref()
                .map(|names| cols.iter().map(|&j| names[j].clone()).collect()),
        }
    }
}

/// Sample moments of a two-class dataset. Covariances use divisor `n_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleMoments {
    pub mean1: Vec<f64>,
    pub mean2: Vec<f64>,
    /// `mean1 - mean2`
    pub delta_hat: Vec<f64>,
    /// `(mean1 + mean2) / 2`
    pub mu_hat: Vec<f64>,
    /// Pooled covariance `(n1 Σ̂1 + n2 Σ̂2) / (n1 + n2)`.
    pub sigma_hat: Matrix,
    pub n1: usize,
    pub n2: usize,
}

impl TwoSampleMoments {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn p(&self) -> usize {
        self.delta_hat.len()
    }
}

/// Per-class means and the covariance pooled over all classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledMoments {
    pub class_ids: Vec<usize>,
    pub counts: Vec<usize>,
    pub means: Vec<Vec<f64>>,
    pub sigma_hat: Matrix,
}

impl PooledMoments {
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn class_mean(x: &Matrix, rows: &[usize]) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for &i in rows {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    mean
}

// Adds Σ (x_i - mean)(x_i - mean)ᵀ over `rows` into the upper triangle of `acc`.
fn accumulate_scatter(x: &Matrix, rows: &[usize], mean: &[f64], acc: &mut Matrix) {
    let p = x.cols();
    let mut centered = vec![0.0; p];
    for &i in rows {
        for ((c, v), m) in centered.iter_mut().zip(x.row(i)).zip(mean) {
            *c = v - m;
        }
        for a in 0..p {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let acc_row = &mut acc.row_mut(a)[a..];
            for (dst, cb) in acc_row.iter_mut().zip(&centered[a..]) {
                *dst += ca * cb;
            }
        }
    }
}

fn symmetrize_upper(m: &mut Matrix) {
    for i in 0..m.rows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Class means and the covariance pooled over every class present, divisor `n`.
pub fn pooled_moments(data: &LabeledDataset, min_per_class: usize) -> Result<PooledMoments, DataError> {
    let class_ids = data.class_ids();
    let x = data.features();
    let mut sigma = Matrix::zeros(data.p(), data.p());
    let mut means = Vec::with_capacity(class_ids.len());
    let mut counts = Vec::with_capacity(class_ids.len());
    for &k in &class_ids {
        let rows = data.class_indices(k);
        if rows.len() < min_per_class {
            return Err(DataError::TooFewSamples {
                class: k,
                count: rows.len(),
                needed: min_per_class,
            });
        }
        let mean = class_mean(x, &rows);
        accumulate_scatter(x, &rows, &mean, &mut sigma);
        counts.push(rows.len());
        means.push(mean);
    }
    let n: usize = counts.iter().sum();
    let mut sigma = sigma.scale(1.0 / n as f64);
    symmetrize_upper(&mut sigma);
    Ok(PooledMoments {
        class_ids,
        counts,
        means,
        sigma_hat: sigma,
    })
}

/// Two-sample moments of a binary dataset (classes 1 and 2, at least two samples each).
pub fn compute_moments(data: &LabeledDataset) -> Result<TwoSampleMoments, DataError> {
    let (n1, n2) = data.check_binary(2)?;
    let pooled = pooled_moments(data, 2)?;
    let mean1 = pooled.means[0].clone();
    let mean2 = pooled.means[1].clone();
    let delta_hat = mean1.iter().zip(&mean2).map(|(a, b)| a - b).collect();
    let mu_hat = mean1.iter().zip(&mean2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(TwoSampleMoments {
        mean1,
        mean2,
        delta_hat,
        mu_hat,
        sigma_hat: pooled.sigma_hat,
        n1,
        n2,
    })
}

/// Result of a screening step. `kept` maps new feature positions to the
/// input's feature indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Screened {
    pub data: LabeledDataset,
    pub kept: Vec<usize>,
    /// Set when the requested size exceeded `p` and was clamped.
    pub clamped: bool,
}

/// Keeps feature `j` iff `var_min <= scale * s²_j <= var_max`, with `s²_j` the
/// pooled (divisor-n) variance.
pub fn variance_filter(
    data: &LabeledDataset,
    var_min: f64,
    var_max: f64,
    scale: f64,
) -> Result<Screened, DataError> {
    if var_min.is_nan() || var_max.is_nan() || var_min >= var_max {
        return Err(DataError::InvalidArgument(format!(
            "need var_min < var_max, got [{var_min}, {var_max}]"
        )));
    }
    if !(scale > 0.0) {
        return Err(DataError::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let variances = pooled_moments(data, 1)?.sigma_hat.diag();
    let kept: Vec<usize> = variances
        .iter()
        .enumerate()
        .filter(|(_, &v)| {
            let s = scale * v;
            var_min <= s && s <= var_max
        })
        .map(|(j, _)| j)
        .collect();
    if kept.is_empty() {
        return Err(DataError::AllFeaturesDropped);
    }
    Ok(Screened {
        data: data.select_features(&kept),
        kept,
        clamped: false,
    })
}

/// Welch two-sample t statistics `(x̄_j − ȳ_j) / sqrt(s²_1j/n1 + s²_2j/n2)`
/// with divisor-(n_k − 1) class variances. A zero denominator yields 0 when
/// the numerator is also 0, and ±∞ otherwise.
pub fn two_sample_t_statistics(data: &LabeledDataset) -> Result<Vec<f64>, DataError> {
    let (n1, n2) = data.check_binary(2)?;
    let x = data.features();
    let rows1 = data.class_indices(1);
    let rows2 = data.class_indices(2);
    let m1 = class_mean(x, &rows1);
    let m2 = class_mean(x, &rows2);
    let unbiased_var = |rows: &[usize], mean: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; x.cols()];
        for &i in rows {
            for ((acc, xi), m) in v.iter_mut().zip(x.row(i)).zip(mean) {
                let d = xi - m;
                *acc += d * d;
            }
        }
        let denom = (rows.len() - 1) as f64;
        v.iter_mut().for_each(|a| *a /= denom);
        v
    };
    let v1 = unbiased_var(&rows1, &m1);
    let v2 = unbiased_var(&rows2, &m2);
    Ok((0..x.cols())
        .map(|j| {
            let num = m1[j] - m2[j];
            let den = (v1[j] / n1 as f64 + v2[j] / n2 as f64).sqrt();
            if den > 0.0 {
                num / den
            } else if num == 0.0 {
                0.0
            } else {
                num.signum() * f64::INFINITY
            }
        })
        .collect())
}

/// Keeps the `top_k` features with the largest |t|, ties to the lower index.
/// The kept indices are returned in ascending order. `top_k > p` is clamped to
/// `p` and flagged.
pub fn t_statistic_screen(data: &LabeledDataset, top_k: usize) -> Result<Screened, DataError> {
    if top_k == 0 {
        return Err(DataError::InvalidArgument("top_k must be at least 1".into()));
    }
    let t = two_sample_t_statistics(data)?;
    let clamped = top_k > t.len();
    let k = top_k.min(t.len());
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].abs().total_cmp(&t[a].abs()).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..k].to_vec();
    kept.sort_unstable();
    Ok(Screened {
        data: data.select_features(&kept),
        kept,
        clamped,
    })
}
