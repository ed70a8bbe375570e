//! Mehrotra predictor-corrector for inequality-form linear programs
//!
//! ```text
//! minimize cᵀx  subject to  Gx + s = h,  s ≥ 0
//! ```
//!
//! with dual `z ≥ 0`, `Gᵀz + c = 0`. Each Newton step eliminates `s` and `z`
//! and solves the normal equations `Gᵀ W G Δx = r` with `W = diag(z / s)`;
//! how that system is formed and factored is left to the [`InequalityLp`]
//! implementation so structured programs can exploit their block layout.

use crate::linalg::norm_inf;

use super::{SolverConfig, SolverStatus};

/// Fraction of the distance to the boundary taken by each step.
const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-12;
/// Consecutive negligible steps before declaring a stall.
const MAX_STALLED: usize = 5;
/// Iterative refinement passes per Newton solve.
const REFINE_STEPS: usize = 2;

pub(crate) trait InequalityLp {
    type Factor: NormalFactor;

    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn objective(&self) -> &[f64];
    fn rhs(&self) -> &[f64];
    /// `out = G x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Gᵀ z`
    fn apply_transpose(&self, z: &[f64], out: &mut [f64]);
    /// Factors `Gᵀ diag(w) G`. `None` signals a breakdown.
    fn factor_normal(&self, w: &[f64]) -> Option<Self::Factor>;
}

pub(crate) trait NormalFactor {
    fn solve_in_place(&self, rhs: &mut [f64]);
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub status: SolverStatus,
    /// `sᵀz / (1 + |cᵀx|)` at exit.
    pub relative_gap: f64,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
}

struct Workspace {
    gx: Vec<f64>,
    gt: Vec<f64>,
    tmp_m: Vec<f64>,
}

/// Runs the interior-point iteration from primal `x0` and strictly positive dual `z0`.
/// Slacks start at `h − G x0`, floored at a small positive value, so `x0` need
/// not be strictly feasible.
pub(crate) fn mehrotra<P: InequalityLp>(
    lp: &P,
    x0: Vec<f64>,
    z0: Vec<f64>,
    config: &SolverConfig,
) -> IpmOutcome {
    let n = lp.num_vars();
    let m = lp.num_constraints();
    debug_assert_eq!(x0.len(), n);
    debug_assert_eq!(z0.len(), m);
    let c = lp.objective();
    let h = lp.rhs();
    let h_scale = 1.0 + norm_inf(h);
    let c_scale = 1.0 + norm_inf(c);

    let mut ws = Workspace {
        gx: vec![0.0; m],
        gt: vec![0.0; n],
        tmp_m: vec![0.0; m],
    };

    let mut x = x0;
    let mut z = z0;
    lp.apply(&x, &mut ws.gx);
    let floor = 1e-10 * h_scale;
    let mut s: Vec<f64> = h.iter().zip(&ws.gx).map(|(hi, gi)| (hi - gi).max(floor)).collect();

    let mut r_p = vec![0.0; m];
    let mut r_d = vec![0.0; n];
    let mut stalled = 0;
    let mut last_gap = f64::INFINITY;

    for iter in 0..=config.max_iter {
        lp.apply(&x, &mut ws.gx);
        for i in 0..m {
            r_p[i] = ws.gx[i] + s[i] - h[i];
        }
        lp.apply_transpose(&z, &mut r_d);
        for (rd, ci) in r_d.iter_mut().zip(c) {
            *rd += ci;
        }
        let gap: f64 = s.iter().zip(&z).map(|(a, b)| a * b).sum();
        let pobj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rel_gap = gap / (1.0 + pobj.abs());
        last_gap = rel_gap;

        let primal_ok = norm_inf(&r_p) <= config.feas_tol * h_scale;
        let dual_ok = norm_inf(&r_d) <= config.feas_tol * c_scale;
        if primal_ok && dual_ok && rel_gap <= config.gap_tol {
            return IpmOutcome {
                x,
                iterations: iter,
                status: SolverStatus::Optimal,
                relative_gap: rel_gap,
            };
        }
        if iter == config.max_iter {
            break;
        }

        let mu = gap / m as f64;
        let w: Vec<f64> = z.iter().zip(&s).map(|(zi, si)| zi / si).collect();
        let Some(factor) = lp.factor_normal(&w) else {
            return IpmOutcome {
                x,
                iterations: iter,
                status: SolverStatus::NumericalFailure,
                relative_gap: rel_gap,
            };
        };

        // predictor
        let r_c: Vec<f64> = s.iter().zip(&z).map(|(a, b)| a * b).collect();
        let aff = newton_direction(lp, &factor, &s, &w, &r_p, &r_d, &r_c, &mut ws);
        let a_p = max_step(&s, &aff.ds);
        let a_d = max_step(&z, &aff.dz);
        let mu_aff: f64 = (0..m)
            .map(|i| (s[i] + a_p * aff.ds[i]) * (z[i] + a_d * aff.dz[i]))
            .sum::<f64>()
            / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let r_c: Vec<f64> = (0..m)
            .map(|i| s[i] * z[i] + aff.ds[i] * aff.dz[i] - sigma * mu)
            .collect();
        let dir = newton_direction(lp, &factor, &s, &w, &r_p, &r_d, &r_c, &mut ws);
        if !dir.dx.iter().chain(&dir.dz).chain(&dir.ds).all(|v| v.is_finite()) {
            return IpmOutcome {
                x,
                iterations: iter,
                status: SolverStatus::NumericalFailure,
                relative_gap: rel_gap,
            };
        }

        let alpha_p = (STEP_FRACTION * max_step(&s, &dir.ds)).min(1.0);
        let alpha_d = (STEP_FRACTION * max_step(&z, &dir.dz)).min(1.0);
        for (xi, d) in x.iter_mut().zip(&dir.dx) {
            *xi += alpha_p * d;
        }
        for (si, d) in s.iter_mut().zip(&dir.ds) {
            *si += alpha_p * d;
        }
        for (zi, d) in z.iter_mut().zip(&dir.dz) {
            *zi += alpha_d * d;
        }

        if alpha_p < MIN_STEP && alpha_d < MIN_STEP {
            stalled += 1;
            if stalled >= MAX_STALLED {
                return IpmOutcome {
                    x,
                    iterations: iter + 1,
                    status: SolverStatus::NumericalFailure,
                    relative_gap: rel_gap,
                };
            }
        } else {
            stalled = 0;
        }
    }

    IpmOutcome {
        x,
        iterations: config.max_iter,
        status: SolverStatus::IterationLimit,
        relative_gap: last_gap,
    }
}

// Solves the linearized KKT system for the given complementarity residual:
//   Gᵀ dz = −r_d,  G dx + ds = −r_p,  Z ds + S dz = −r_c.
#[allow(clippy::too_many_arguments)]
fn newton_direction<P: InequalityLp>(
    lp: &P,
    factor: &P::Factor,
    s: &[f64],
    w: &[f64],
    r_p: &[f64],
    r_d: &[f64],
    r_c: &[f64],
    ws: &mut Workspace,
) -> Direction {
    let m = s.len();
    for i in 0..m {
        ws.tmp_m[i] = w[i] * r_p[i] - r_c[i] / s[i];
    }
    lp.apply_transpose(&ws.tmp_m, &mut ws.gt);
    let rhs: Vec<f64> = r_d.iter().zip(&ws.gt).map(|(a, b)| -a - b).collect();
    let mut dx = rhs.clone();
    factor.solve_in_place(&mut dx);
    // Late iterations make GᵀWG badly conditioned; refine against the
    // unfactored operator so the dual residual does not drift.
    for _ in 0..REFINE_STEPS {
        lp.apply(&dx, &mut ws.tmp_m);
        for i in 0..m {
            ws.tmp_m[i] *= w[i];
        }
        lp.apply_transpose(&ws.tmp_m, &mut ws.gt);
        let mut corr: Vec<f64> = rhs.iter().zip(&ws.gt).map(|(a, b)| a - b).collect();
        factor.solve_in_place(&mut corr);
        for (d, c) in dx.iter_mut().zip(&corr) {
            *d += c;
        }
    }

    lp.apply(&dx, &mut ws.tmp_m);
    let mut ds = vec![0.0; m];
    let mut dz = vec![0.0; m];
    for i in 0..m {
        let gdx = ws.tmp_m[i];
        dz[i] = w[i] * (gdx + r_p[i]) - r_c[i] / s[i];
        ds[i] = -r_p[i] - gdx;
    }
    Direction { dx, ds, dz }
}

/// Largest `α` (possibly infinite) keeping `v + α dv ≥ 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&vi, &d)| -vi / d)
        .fold(f64::INFINITY, f64::min)
}
