//! Convex relaxation solvers.
//!
//! All three methods share one loop: pick the indices to update, form the
//! gradient and negated Hessian on them, take the sum-preserving Newton
//! step, backtrack, and update the Fisher matrix. They differ only in the
//! index set:
//!
//! * [`Method::Full`] updates every weight each step.
//! * [`Method::Rsn`] updates `s` uniformly drawn weights.
//! * [`Method::Crsn`] updates the `round(ρ s)` currently largest weights and
//!   `s - round(ρ s)` uniformly drawn others.
//!
//! Subspace methods stop only after the decrement has stayed below `ε` for
//! `K = ⌈n/s⌉` consecutive steps, since a single small decrement on a random
//! subspace says little about the rest of the weights.

mod line_search;
mod sketch;
mod step;

pub use line_search::{backtracking_line_search, initial_step, max_feasible_step, LineSearchParams, MAX_HALVINGS};
pub use sketch::{sketch_elite, sketch_uniform, SketchIndexSet};
pub use step::{constrained_newton_step, decrement};

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{CandidateBasis, SelectionVector};
use crate::objective::{
    barrier, d_optimality, fisher, gradient_from_whitened, hessian_from_whitened, FisherMatrix, LogDet, WeightVector,
};
use crate::rng;
use line_search::{backtrack, SubspaceRay};
use sketch::top_indices;

/// A failed line search is tolerated as a null step once the predicted
/// increase is below this multiple of machine precision (relative to `|f|`).
const NOISE_FLOOR: f64 = 1e3 * f64::EPSILON;

/// Relative Fisher drift between the incremental and rebuilt matrices that
/// is reported when a scheduled rebuild happens.
const FISHER_DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Full,
    Rsn,
    Crsn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Full, Method::Rsn, Method::Crsn];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Rsn => "rsn",
            Method::Crsn => "crsn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Method::Full),
            "rsn" => Ok(Method::Rsn),
            "crsn" => Ok(Method::Crsn),
            other => Err(Error::InvalidArgument(format!("unknown solver method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kappa: f64,
    /// Decrement tolerance.
    pub epsilon: f64,
    /// Sketch size; `None` means `max(1, n / 10)`.
    pub s: Option<usize>,
    /// Elite fraction for CRSN.
    pub rho: f64,
    pub armijo_c: f64,
    pub backtrack_beta: f64,
    pub feasibility_margin: f64,
    pub max_steps: usize,
    /// Consecutive small decrements required to stop; `None` means 1 for the
    /// full method and `⌈n/s⌉` otherwise.
    pub consecutive_required: Option<usize>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa: 1e-4,
            epsilon: 1e-6,
            s: None,
            rho: 0.5,
            armijo_c: 0.01,
            backtrack_beta: 0.5,
            feasibility_margin: 0.99,
            max_steps: 10_000,
            consecutive_required: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5) {
            return bad(format!("armijo_c must lie in (0, 0.5), got {}", self.armijo_c));
        }
        if !(self.backtrack_beta > 0.0 && self.backtrack_beta < 1.0) {
            return bad(format!("backtrack_beta must lie in (0, 1), got {}", self.backtrack_beta));
        }
        if !(self.feasibility_margin > 0.0 && self.feasibility_margin < 1.0) {
            return bad(format!(
                "feasibility_margin must lie in (0, 1), got {}",
                self.feasibility_margin
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        if self.s == Some(0) {
            return bad("sketch size must be >= 1".into());
        }
        if self.consecutive_required == Some(0) {
            return bad("consecutive_required must be >= 1".into());
        }
        Ok(())
    }

    pub fn line_search(&self) -> LineSearchParams {
        LineSearchParams {
            armijo_c: self.armijo_c,
            beta: self.backtrack_beta,
            margin: self.feasibility_margin,
        }
    }
}

pub fn default_sketch_size(n: usize) -> usize {
    (n / 10).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub step: usize,
    pub f: f64,
    pub decrement: f64,
    /// Solver-loop seconds since the first step started.
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub method: Method,
    pub final_w: WeightVector,
    pub selection: SelectionVector,
    pub f_initial: f64,
    pub f_final: f64,
    pub f_org: LogDet,
    pub steps: usize,
    pub converged: bool,
    /// Sketch size actually used (`n` for the full method).
    pub s: usize,
    pub trace: Vec<TraceEntry>,
    pub elapsed: Duration,
}

/// Indices of the `p` largest weights, ties toward the lower index,
/// returned in ascending order.
pub fn round_top_p(w: &[f64], p: usize) -> Result<SelectionVector> {
    if p > w.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select p={p} of {} candidates",
            w.len()
        )));
    }
    SelectionVector::new(top_indices(w, p), w.len())
}

/// Result of one [`SubspaceNewton::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// The decrement stayed below `ε` for the required number of
    /// consecutive steps; no update was made.
    Converged,
    /// The weights at `indices` (ascending) moved by `step_size` times the
    /// Newton direction; every other weight is untouched.
    Accepted {
        indices: Vec<usize>,
        step_size: f64,
        decrement: f64,
    },
}

/// The solver loop as an explicit state machine. [`solve`] drives it to
/// completion; tests and tracing can step it by hand.
pub struct SubspaceNewton<'a> {
    u: &'a CandidateBasis,
    p: usize,
    cfg: SolverConfig,
    method: Method,
    s: usize,
    refresh: usize,
    required: usize,
    rng: rng::StreamRng,
    w: Vec<f64>,
    fim: FisherMatrix,
    barrier_sum: f64,
    f: f64,
    f_initial: f64,
    below: usize,
    steps: usize,
    converged: bool,
    trace: Vec<TraceEntry>,
    start: Instant,
}

impl<'a> SubspaceNewton<'a> {
    /// Starts from `w = (p/n) 1`. Randomness comes from the stream
    /// `(cfg.seed, method, p)`.
    pub fn new(u: &'a CandidateBasis, p: usize, cfg: &SolverConfig, method: Method) -> Result<Self> {
        cfg.validate()?;
        let start = Instant::now();
        let n = u.n();
        if p == 0 || p >= n {
            return Err(Error::InvalidArgument(format!("solver needs 0 < p < n, got p={p}, n={n}")));
        }
        let s = match method {
            Method::Full => n,
            _ => {
                let s = cfg.s.unwrap_or_else(|| default_sketch_size(n));
                if s > n {
                    log::warn!("sketch size {s} exceeds n={n}; clamping to n");
                }
                s.min(n)
            }
        };
        let refresh = n.div_ceil(s);
        let required = cfg.consecutive_required.unwrap_or(match method {
            Method::Full => 1,
            _ => refresh,
        });
        let w = WeightVector::uniform(n, p)?.as_slice().to_vec();
        let fim = fisher(u, &w)?;
        let barrier_sum: f64 = w.iter().map(|&x| barrier(x)).sum();
        let f = fim.log_det() + cfg.kappa * barrier_sum;
        Ok(Self {
            u,
            p,
            cfg: cfg.clone(),
            method,
            s,
            refresh,
            required,
            rng: rng::stream(cfg.seed, method.tag(), &[p as u64]),
            w,
            fim,
            barrier_sum,
            f,
            f_initial: f,
            below: 0,
            steps: 0,
            converged: false,
            trace: Vec::new(),
            start,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Current relaxed objective `f(w)`.
    pub fn objective(&self) -> f64 {
        self.f
    }

    pub fn fisher(&self) -> &FisherMatrix {
        &self.fim
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Consecutive small decrements needed to stop.
    pub fn required_consecutive(&self) -> usize {
        self.required
    }

    fn next_indices(&mut self) -> Result<Vec<usize>> {
        let n = self.u.n();
        Ok(match self.method {
            Method::Full => (0..n).collect(),
            Method::Rsn => sketch_uniform(n, self.s, &mut self.rng)?.sorted(),
            Method::Crsn => sketch_elite(&self.w, self.s, self.cfg.rho, &mut self.rng)?.sorted(),
        })
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.converged {
            return Ok(StepOutcome::Converged);
        }
        let kappa = self.cfg.kappa;
        let idx = self.next_indices()?;

        let us = self.u.rows_at(&idx);
        let mut vt = us.transpose();
        self.fim.cholesky().solve_lower_mut(&mut vt);
        let g = -gradient_from_whitened(&vt, &self.w, &idx, kappa);
        let h = hessian_from_whitened(&vt, &self.w, &idx, kappa);
        let delta = constrained_newton_step(&g, &h)?;
        let lambda = decrement(&g, &delta);

        if lambda <= self.cfg.epsilon {
            self.below += 1;
            if self.below >= self.required {
                self.converged = true;
                return Ok(StepOutcome::Converged);
            }
        } else {
            self.below = 0;
        }

        let w_sub: Vec<f64> = idx.iter().map(|&i| self.w[i]).collect();
        let dfim = {
            let mut scaled = us.clone();
            for (a, mut row) in scaled.row_iter_mut().enumerate() {
                row *= delta[a];
            }
            us.transpose() * scaled
        };
        let ray = SubspaceRay {
            fim: self.fim.matrix(),
            dfim: &dfim,
            w_sub: &w_sub,
            delta: delta.as_slice(),
            barrier_sum: self.barrier_sum,
            kappa,
        };
        let ls = self.cfg.line_search();
        let t0 = initial_step(&w_sub, delta.as_slice(), ls.margin);
        let t = match backtrack(t0, self.f, lambda * lambda, &ls, |t| ray.eval(t)) {
            Ok((t, _)) => t,
            Err(e) => {
                if lambda <= self.cfg.epsilon || lambda * lambda <= NOISE_FLOOR * self.f.abs().max(1.0) {
                    0.0
                } else {
                    return Err(e);
                }
            }
        };

        self.steps += 1;
        if t > 0.0 {
            for (a, &i) in idx.iter().enumerate() {
                self.w[i] += t * delta[a];
            }
            let updated = self.fim.matrix() + &dfim * t;
            self.fim = if self.steps.is_multiple_of(self.refresh) {
                let rebuilt = fisher(self.u, &self.w)?;
                let drift = (rebuilt.matrix() - &updated).amax() / rebuilt.matrix().amax();
                if drift > FISHER_DRIFT_TOL {
                    log::debug!("Fisher matrix drift {drift:e} at step {}", self.steps);
                }
                rebuilt
            } else {
                match FisherMatrix::from_matrix(updated) {
                    Ok(m) => m,
                    Err(_) => fisher(self.u, &self.w)?,
                }
            };
            self.barrier_sum = self.w.iter().map(|&x| barrier(x)).sum();
            self.f = self.fim.log_det() + kappa * self.barrier_sum;
        }

        self.trace.push(TraceEntry {
            step: self.steps,
            f: self.f,
            decrement: lambda,
            elapsed: self.start.elapsed().as_secs_f64(),
        });
        Ok(StepOutcome::Accepted {
            indices: idx,
            step_size: t,
            decrement: lambda,
        })
    }

    /// Steps until convergence or `max_steps`.
    pub fn run(&mut self) -> Result<()> {
        while !self.converged && self.steps < self.cfg.max_steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<SolverReport> {
        let elapsed = self.start.elapsed();
        let selection = round_top_p(&self.w, self.p)?;
        let f_org = d_optimality(self.u, &selection);
        Ok(SolverReport {
            method: self.method,
            final_w: WeightVector::new(self.w.into())?,
            selection,
            f_initial: self.f_initial,
            f_final: self.f,
            f_org,
            steps: self.trace.len(),
            converged: self.converged,
            s: self.s,
            trace: self.trace,
            elapsed,
        })
    }
}

/// Maximizes the relaxed objective from `w = (p/n) 1` and rounds the result
/// to the `p` largest weights.
pub fn solve(u: &CandidateBasis, p: usize, cfg: &SolverConfig, method: Method) -> Result<SolverReport> {
    let mut state = SubspaceNewton::new(u, p, cfg, method)?;
    state.run()?;
    state.finish()
}
