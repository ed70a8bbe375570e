//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Test-only reference solver for `min cᵀx s.t. Gx ≤ h, x ≥ 0`. It shares no
//! code with the interior-point solver under test.

const EPS: f64 = 1e-11;

struct Tableau {
    // rows: constraints, last row: objective. last column: rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.t[0].len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols();
        let pv = self.t[row][col];
        for k in 0..width {
            self.t[row][k] /= pv;
        }
        for r in 0..self.t.len() {
            if r != row {
                let f = self.t[r][col];
                if f != 0.0 {
                    for k in 0..width {
                        self.t[r][k] -= f * self.t[row][k];
                    }
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations on the objective row, restricted to
    /// columns `< allowed`. Returns false if unbounded.
    fn run(&mut self, allowed: usize) -> bool {
        let m = self.basis.len();
        let obj = m;
        let rhs = self.cols() - 1;
        for _ in 0..100_000 {
            // Bland: lowest index with negative reduced cost
            let Some(col) = (0..allowed).find(|&j| self.t[obj][j] < -EPS) else {
                return true;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..m {
                let a = self.t[r][col];
                if a > EPS {
                    let ratio = self.t[r][rhs] / a;
                    let cand = (ratio, self.basis[r], r);
                    best = match best {
                        None => Some(cand),
                        Some(b) if ratio < b.0 - EPS || (ratio <= b.0 + EPS && cand.1 < b.1) => {
                            Some(cand)
                        }
                        keep => keep,
                    };
                }
            }
            let Some((_, _, row)) = best else {
                return false;
            };
            self.pivot(row, col);
        }
        panic!("simplex did not terminate");
    }
}

/// Returns `(optimal value, x)` or `None` when infeasible or unbounded.
pub fn minimize(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = g.len();
    let n = c.len();
    // columns: x (n), slack (m), artificial (m), rhs
    let width = n + 2 * m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0; m];
    for r in 0..m {
        let sign = if h[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r][j] = sign * g[r][j];
        }
        t[r][n + r] = sign;
        t[r][n + m + r] = 1.0;
        t[r][width - 1] = sign * h[r];
        basis[r] = n + m + r;
    }
    // phase 1 objective: sum of artificials, expressed in non-basic terms
    for r in 0..m {
        for k in 0..width {
            t[m][k] -= t[r][k];
        }
    }
    for r in 0..m {
        t[m][n + m + r] = 0.0;
    }
    let mut tab = Tableau { t, basis };
    tab.run(n + 2 * m);
    if -tab.t[m][width - 1] > 1e-8 {
        return None;
    }
    // drive remaining artificials out of the basis
    for r in 0..m {
        if tab.basis[r] >= n + m {
            if let Some(col) = (0..n + m).find(|&j| tab.t[r][j].abs() > EPS) {
                tab.pivot(r, col);
            }
        }
    }
    // phase 2 objective row
    for k in 0..width {
        tab.t[m][k] = 0.0;
    }
    for j in 0..n {
        tab.t[m][j] = c[j];
    }
    for r in 0..m {
        let col = tab.basis[r];
        let f = tab.t[m][col];
        if f != 0.0 {
            for k in 0..width {
                tab.t[m][k] -= f * tab.t[r][k];
            }
        }
    }
    if !tab.run(n + m) {
        return None;
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.t[r][width - 1];
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Some((value, x))
}
