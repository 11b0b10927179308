use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::objective::{barrier, check_interior, fisher, FisherMatrix};
use crate::model::CandidateBasis;

pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    /// Armijo sufficient-increase constant, in `(0, 0.5)`.
    pub armijo_c: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub beta: f64,
    /// Fraction of the distance to the box boundary that may be covered.
    pub margin: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            armijo_c: 0.01,
            beta: 0.5,
            margin: 0.99,
        }
    }
}

/// Largest `t` with `w + t δ` still inside `[0, 1]` (infinite for `δ = 0`).
pub fn max_feasible_step(w: &[f64], delta: &[f64]) -> f64 {
    w.iter()
        .zip(delta)
        .map(|(&wi, &di)| {
            if di > 0.0 {
                (1.0 - wi) / di
            } else if di < 0.0 {
                -wi / di
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// First trial step: the full step when it stays strictly interior,
/// otherwise `margin` times the distance to the boundary.
pub fn initial_step(w: &[f64], delta: &[f64], margin: f64) -> f64 {
    let bound = max_feasible_step(w, delta);
    if bound > 1.0 {
        1.0
    } else {
        margin * bound
    }
}

/// Backtracks from `t0` until `eval(t) >= f0 + c t decrease`. `eval`
/// returns `None` where the objective is undefined.
pub(crate) fn backtrack(
    t0: f64,
    f0: f64,
    decrease: f64,
    params: &LineSearchParams,
    mut eval: impl FnMut(f64) -> Option<f64>,
) -> Result<(f64, f64)> {
    let mut t = t0;
    for _ in 0..=MAX_HALVINGS {
        if let Some(ft) = eval(t) {
            if ft >= f0 + params.armijo_c * t * decrease {
                return Ok((t, ft));
            }
        }
        t *= params.beta;
    }
    Err(Error::LineSearchFailure {
        halvings: MAX_HALVINGS,
    })
}

/// Trial objective along a subspace direction, evaluated in `O(r³ + s)`.
///
/// `f(w + tδ) = log det(W + t ΔW) + κ (B + Σ_{i∈S} b(w_i + tδ_i) - b(w_i))`
/// with `ΔW = U_Sᵀ diag(δ) U_S` and `B` the current barrier sum.
pub(crate) struct SubspaceRay<'a> {
    pub fim: &'a DMatrix<f64>,
    pub dfim: &'a DMatrix<f64>,
    pub w_sub: &'a [f64],
    pub delta: &'a [f64],
    pub barrier_sum: f64,
    pub kappa: f64,
}

impl SubspaceRay<'_> {
    pub fn eval(&self, t: f64) -> Option<f64> {
        let mut trial_barrier = self.barrier_sum;
        for (&wi, &di) in self.w_sub.iter().zip(self.delta) {
            let wt = wi + t * di;
            if !(wt > 0.0 && wt < 1.0) {
                return None;
            }
            if di != 0.0 {
                trial_barrier += barrier(wt) - barrier(wi);
            }
        }
        let trial = FisherMatrix::from_matrix(self.fim + self.dfim * t).ok()?;
        Some(trial.log_det() + self.kappa * trial_barrier)
    }
}

/// Armijo backtracking for a step `δ` (length `n`, summing to zero) from an
/// interior `w`. `slope` is `g_φᵀ δ` in minimization convention, i.e.
/// `-(∇f)ᵀ δ`; the accepted `Δs` satisfies
/// `f(w + Δs δ) >= f(w) + c Δs (-slope)`.
pub fn backtracking_line_search(
    u: &CandidateBasis,
    w: &[f64],
    delta: &[f64],
    kappa: f64,
    f_current: f64,
    slope: f64,
    params: &LineSearchParams,
) -> Result<f64> {
    check_interior(w)?;
    if delta.len() != w.len() {
        return Err(Error::InvalidDimension(format!(
            "direction of length {} for {} weights",
            delta.len(),
            w.len()
        )));
    }
    let support: Vec<usize> = (0..w.len()).filter(|&i| delta[i] != 0.0).collect();
    if support.is_empty() {
        return Ok(1.0);
    }
    let fim = fisher(u, w)?;
    let dfim = {
        let us = u.rows_at(&support);
        let mut scaled = us.clone();
        for (a, &i) in support.iter().enumerate() {
            scaled.row_mut(a).scale_mut(delta[i]);
        }
        us.tr_mul(&scaled)
    };
    let w_sub: Vec<f64> = support.iter().map(|&i| w[i]).collect();
    let d_sub: Vec<f64> = support.iter().map(|&i| delta[i]).collect();
    let ray = SubspaceRay {
        fim: fim.matrix(),
        dfim: &dfim,
        w_sub: &w_sub,
        delta: &d_sub,
        barrier_sum: w.iter().map(|&x| barrier(x)).sum(),
        kappa,
    };
    let t0 = initial_step(w, delta, params.margin);
    backtrack(t0, f_current, -slope, params, |t| ray.eval(t)).map(|(t, _)| t)
}
