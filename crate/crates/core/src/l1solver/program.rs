//! Linear-program formulations handed to the interior-point engine.

use crate::linalg::{Cholesky, Matrix};

use super::ipm::{InequalityLp, NormalFactor};

/// Regularization attempts when the normal matrix loses definiteness late
/// in the iteration.
const REG_ATTEMPTS: usize = 8;

fn factor_with_regularization(mut m: Matrix) -> Option<Cholesky> {
    if let Ok(ch) = Cholesky::new(&m) {
        return Some(ch);
    }
    let max_diag = m.diag().iter().fold(0.0f64, |a, d| a.max(d.abs())).max(f64::MIN_POSITIVE);
    let mut reg = 1e-14 * max_diag;
    let mut added = 0.0;
    for _ in 0..REG_ATTEMPTS {
        m = m.add_diag(reg - added);
        added = reg;
        if let Ok(ch) = Cholesky::new(&m) {
            return Some(ch);
        }
        reg *= 100.0;
    }
    None
}

/// The ℓ1 program over `x = (β, u) ∈ R^{2p}`:
///
/// ```text
/// minimize Σ u_j
///   −β_j − u_j ≤ 0
///   +β_j − u_j ≤ 0
///   −a_kᵀβ ≤ λ − b_k
///   +a_kᵀβ ≤ λ + b_k
/// ```
///
/// Constraint rows are stored in that order, four blocks of `p`.
#[derive(Debug, Clone)]
pub struct LpdProgram {
    a: Matrix,
    c: Vec<f64>,
    h: Vec<f64>,
    p: usize,
}

impl LpdProgram {
    pub(crate) fn new(a: Matrix, b: &[f64], lambda: f64) -> Self {
        let p = b.len();
        let mut c = vec![0.0; 2 * p];
        c[p..].iter_mut().for_each(|v| *v = 1.0);
        let mut h = vec![0.0; 4 * p];
        for k in 0..p {
            h[2 * p + k] = lambda - b[k];
            h[3 * p + k] = lambda + b[k];
        }
        LpdProgram { a, c, h, p }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn num_variables(&self) -> usize {
        2 * self.p
    }

    pub fn num_inequalities(&self) -> usize {
        4 * self.p
    }

    /// Matrix appearing in the residual constraints (`A + ρI`).
    pub fn constraint_matrix(&self) -> &Matrix {
        &self.a
    }

    /// Left-hand side minus right-hand side of every inequality at `x`;
    /// `x` is feasible iff all entries are `≤ 0`.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_inequalities()];
        self.apply(x, &mut g);
        g.iter_mut().zip(&self.h).for_each(|(gi, hi)| *gi -= hi);
        g
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        x[self.p..].iter().sum()
    }
}

pub(crate) struct LpdFactor {
    chol: Cholesky,
    w_sum: Vec<f64>,
    w_diff: Vec<f64>,
}

impl NormalFactor for LpdFactor {
    // Block system [[D + A V A, diag(w1 − w2)], [diag(w1 − w2), diag(w1 + w2)]]
    // reduced to the β block by eliminating u.
    fn solve_in_place(&self, rhs: &mut [f64]) {
        let p = self.w_sum.len();
        let (rb, ru) = rhs.split_at_mut(p);
        for j in 0..p {
            rb[j] -= self.w_diff[j] / self.w_sum[j] * ru[j];
        }
        self.chol.solve_in_place(rb);
        for j in 0..p {
            ru[j] = (ru[j] - self.w_diff[j] * rb[j]) / self.w_sum[j];
        }
    }
}

impl InequalityLp for LpdProgram {
    type Factor = LpdFactor;

    fn num_vars(&self) -> usize {
        2 * self.p
    }

    fn num_constraints(&self) -> usize {
        4 * self.p
    }

    fn objective(&self) -> &[f64] {
        &self.c
    }

    fn rhs(&self) -> &[f64] {
        &self.h
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let p = self.p;
        let (beta, u) = x.split_at(p);
        for j in 0..p {
            out[j] = -beta[j] - u[j];
            out[p + j] = beta[j] - u[j];
        }
        for k in 0..p {
            let ab = crate::linalg::dot(self.a.row(k), beta);
            out[2 * p + k] = -ab;
            out[3 * p + k] = ab;
        }
    }

    fn apply_transpose(&self, z: &[f64], out: &mut [f64]) {
        let p = self.p;
        let (z1, rest) = z.split_at(p);
        let (z2, rest) = rest.split_at(p);
        let (z3, z4) = rest.split_at(p);
        let (ob, ou) = out.split_at_mut(p);
        for j in 0..p {
            ob[j] = z2[j] - z1[j];
            ou[j] = -z1[j] - z2[j];
        }
        // A is symmetric, so Aᵀ(z4 − z3) = Σ_k (z4 − z3)_k a_k.
        for k in 0..p {
            let coef = z4[k] - z3[k];
            if coef != 0.0 {
                crate::linalg::axpy(coef, self.a.row(k), ob);
            }
        }
    }

    fn factor_normal(&self, w: &[f64]) -> Option<LpdFactor> {
        let p = self.p;
        let (w1, rest) = w.split_at(p);
        let (w2, rest) = rest.split_at(p);
        let (w3, w4) = rest.split_at(p);
        let w_sum: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a + b).collect();
        let w_diff: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a - b).collect();

        // M = diag(4 w1 w2 / (w1 + w2)) + A diag(w3 + w4) A, upper triangle first.
        let v: Vec<f64> = w3.iter().zip(w4).map(|(a, b)| a + b).collect();
        let mut m = Matrix::zeros(p, p);
        for i in 0..p {
            let a_i = self.a.row(i);
            for k in 0..p {
                let coef = a_i[k] * v[k];
                if coef == 0.0 {
                    continue;
                }
                let a_k = &self.a.row(k)[i..];
                let m_i = &mut m.row_mut(i)[i..];
                for (dst, akj) in m_i.iter_mut().zip(a_k) {
                    *dst += coef * akj;
                }
            }
            m[(i, i)] += 4.0 * w1[i] * w2[i] / w_sum[i];
        }
        for i in 0..p {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        if !m.is_finite() {
            return None;
        }
        let chol = factor_with_regularization(m)?;
        Some(LpdFactor { chol, w_sum, w_diff })
    }
}

/// A generic dense inequality-form LP `min cᵀx s.t. Gx ≤ h`.
#[derive(Debug, Clone)]
pub(crate) struct DenseLp {
    pub g: Matrix,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) struct DenseFactor(Cholesky);

impl NormalFactor for DenseFactor {
    fn solve_in_place(&self, rhs: &mut [f64]) {
        self.0.solve_in_place(rhs);
    }
}

impl InequalityLp for DenseLp {
    type Factor = DenseFactor;

    fn num_vars(&self) -> usize {
        self.g.cols()
    }

    fn num_constraints(&self) -> usize {
        self.g.rows()
    }

    fn objective(&self) -> &[f64] {
        &self.c
    }

    fn rhs(&self) -> &[f64] {
        &self.h
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::linalg::dot(self.g.row(i), x);
        }
    }

    fn apply_transpose(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &zi) in z.iter().enumerate() {
            if zi != 0.0 {
                crate::linalg::axpy(zi, self.g.row(i), out);
            }
        }
    }

    fn factor_normal(&self, w: &[f64]) -> Option<DenseFactor> {
        let n = self.g.cols();
        let mut m = Matrix::zeros(n, n);
        for (i, &wi) in w.iter().enumerate() {
            let row = self.g.row(i);
            for a in 0..n {
                let coef = wi * row[a];
                if coef == 0.0 {
                    continue;
                }
                for b in a..n {
                    m[(a, b)] += coef * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                m[(a, b)] = m[(b, a)];
            }
        }
        if !m.is_finite() {
            return None;
        }
        factor_with_regularization(m).map(DenseFactor)
    }
}
