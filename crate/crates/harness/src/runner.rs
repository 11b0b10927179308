//! Experiment drivers behind the CLI subcommands.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use sensel_core::baselines::{greedy_select, random_select};
use sensel_core::model::{gen_gaussian_problem, pod_basis, read_matrix};
use sensel_core::objective::d_optimality;
use sensel_core::rng::{derive_seed, stream};
use sensel_core::solvers::default_sketch_size;
use sensel_core::{solve, CandidateBasis, Method, SnapshotMatrix, SolverReport};

use crate::config::{Selector, SweepSpec};
use crate::error::{HarnessError, Result};
use crate::records::{error_code, fmt_float, ResultRow, RhoRow, Status};

/// Seed of trial `trial`: drives both the generated instance and the solver
/// streams for that trial.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, "trial", &[trial as u64])
}

/// Candidate bases for each trial: Gaussian draws, or one file shared by all.
pub struct Instances {
    bases: Vec<CandidateBasis>,
}

impl Instances {
    pub fn load(spec: &SweepSpec) -> Result<Self> {
        let bases = match &spec.basis {
            Some(path) => vec![CandidateBasis::new(read_matrix(path)?)?],
            None => (0..spec.trials)
                .map(|t| gen_gaussian_problem(spec.n, spec.r, trial_seed(spec.seed, t)))
                .collect::<std::result::Result<_, _>>()?,
        };
        Ok(Self { bases })
    }

    pub fn from_basis(u: CandidateBasis) -> Self {
        Self { bases: vec![u] }
    }

    pub fn get(&self, trial: usize) -> &CandidateBasis {
        &self.bases[trial.min(self.bases.len() - 1)]
    }
}

fn check_p_values(spec: &SweepSpec, n: usize, methods: &[Selector]) -> Result<()> {
    let solver = methods.iter().any(|m| m.solver().is_some());
    for &p in &spec.p_values {
        if p == 0 || p > n || (solver && p == n) {
            return Err(HarnessError::Usage(format!(
                "p={p} out of range for n={n} (need 0 < p < n)"
            )));
        }
    }
    Ok(())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start worker pool: {e}")))
}

fn millis(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs one cell. Failures are captured in the row, never propagated.
pub fn run_cell(u: &CandidateBasis, method: Selector, p: usize, rho: f64, spec: &SweepSpec, seed: u64) -> ResultRow {
    let (n, r) = (u.n(), u.r());
    let sketch = spec.s.unwrap_or_else(|| default_sketch_size(n)).min(n);
    let mut row = ResultRow {
        method,
        n,
        r,
        p,
        s: 0,
        rho: 0.0,
        kappa: spec.kappa,
        seed,
        f: f64::NAN,
        f_org: f64::NAN,
        steps: 0,
        status: Status::Converged(true),
        wall_ms: f64::NAN,
        step_ms_mean: f64::NAN,
        f_org_minus_greedy: f64::NAN,
    };
    match method.solver() {
        Some(m) => {
            row.s = if m == Method::Full { n } else { sketch };
            if m == Method::Crsn {
                row.rho = rho;
            }
            let cfg = sensel_core::SolverConfig {
                rho,
                ..spec.solver_config(seed)
            };
            match solve(u, p, &cfg, m) {
                Ok(rep) => fill_from_report(&mut row, &rep),
                Err(e) => {
                    log::warn!("{method} p={p} seed={seed}: {e}");
                    row.status = Status::Error(error_code(&e));
                }
            }
        }
        None => {
            let start = Instant::now();
            let picked = match method {
                Selector::Greedy => greedy_select(u, p),
                _ => random_select(n, p, &mut stream(seed, "random", &[p as u64])),
            };
            let wall = millis(start.elapsed());
            match picked {
                Ok(sel) => {
                    row.f_org = d_optimality(u, &sel).value;
                    row.steps = if method == Selector::Greedy { p } else { 0 };
                    row.wall_ms = wall;
                    row.step_ms_mean = wall / row.steps.max(1) as f64;
                }
                Err(e) => row.status = Status::Error(error_code(&e)),
            }
        }
    }
    row
}

fn fill_from_report(row: &mut ResultRow, rep: &SolverReport) {
    row.s = rep.s;
    row.f = rep.f_final;
    row.f_org = rep.f_org.value;
    row.steps = rep.steps;
    row.status = Status::Converged(rep.converged);
    row.wall_ms = millis(rep.elapsed);
    row.step_ms_mean = row.wall_ms / rep.steps.max(1) as f64;
}

/// Fills `f_org_minus_greedy` from the greedy row of the same `(p, trial)`,
/// computing the greedy reference when greedy was not requested.
fn attach_greedy_diff(rows: &mut [ResultRow], cells: &[(Selector, usize, usize)], instances: &Instances) {
    let mut greedy: HashMap<(usize, usize), f64> = HashMap::new();
    for (row, &(m, p, t)) in rows.iter().zip(cells) {
        if m == Selector::Greedy && !row.status.is_error() {
            greedy.insert((p, t), row.f_org);
        }
    }
    for (row, &(_, p, t)) in rows.iter_mut().zip(cells) {
        let g = *greedy.entry((p, t)).or_insert_with(|| {
            greedy_select(instances.get(t), p)
                .map(|sel| d_optimality(instances.get(t), &sel).value)
                .unwrap_or(f64::NAN)
        });
        row.f_org_minus_greedy = row.f_org - g;
    }
}

fn run_cells(
    spec: &SweepSpec,
    instances: &Instances,
    cells: &[(Selector, usize, usize)],
    rho_of: impl Fn(Selector) -> f64 + Sync,
) -> Result<Vec<ResultRow>> {
    let pool = pool(spec.threads)?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, p, t)| {
                let row = run_cell(instances.get(t), m, p, rho_of(m), spec, trial_seed(spec.seed, t));
                log::debug!("{m} p={p} trial={t}: f_org={} steps={}", fmt_float(row.f_org), row.steps);
                row
            })
            .collect()
    });
    Ok(rows)
}

/// Every `(method, p, trial)` cell, in that lexicographic order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let instances = Instances::load(spec)?;
    sweep_on(spec, &instances)
}

pub fn sweep_on(spec: &SweepSpec, instances: &Instances) -> Result<Vec<ResultRow>> {
    let n = instances.get(0).n();
    check_p_values(spec, n, &spec.methods)?;
    let mut methods = spec.methods.clone();
    methods.sort();
    let mut p_values = spec.p_values.clone();
    p_values.sort_unstable();
    p_values.dedup();
    let cells: Vec<_> = methods
        .iter()
        .flat_map(|&m| p_values.iter().flat_map(move |&p| (0..spec.trials).map(move |t| (m, p, t))))
        .collect();
    let mut rows = run_cells(spec, instances, &cells, |_| spec.rho)?;
    attach_greedy_diff(&mut rows, &cells, instances);
    Ok(rows)
}

/// Single solve on trial `spec.trial`, for convergence traces.
pub fn run_trace(spec: &SweepSpec, method: Method) -> Result<SolverReport> {
    spec.validate()?;
    let u = match &spec.basis {
        Some(path) => CandidateBasis::new(read_matrix(path)?)?,
        None => gen_gaussian_problem(spec.n, spec.r, trial_seed(spec.seed, spec.trial))?,
    };
    let p = spec.p_values[0];
    check_p_values(spec, u.n(), &[Selector::Full])?;
    Ok(solve(&u, p, &spec.solver_config(trial_seed(spec.seed, spec.trial)), method)?)
}

/// Trace rows with a leading step-0 row for the initial point.
pub fn trace_rows(rep: &SolverReport) -> Vec<Vec<String>> {
    let first = vec!["0".into(), fmt_float(rep.f_initial), fmt_float(f64::NAN), fmt_float(0.0)];
    std::iter::once(first)
        .chain(rep.trace.iter().map(|e| {
            vec![
                e.step.to_string(),
                fmt_float(e.f),
                fmt_float(e.decrement),
                fmt_float(e.elapsed * 1e3),
            ]
        }))
        .collect()
}

/// Per-ρ means over trials at `p = p_values[0]`. `ρ = 0` runs as rsn.
pub fn run_rho_sweep(spec: &SweepSpec) -> Result<(Vec<RhoRow>, Vec<ResultRow>)> {
    spec.validate()?;
    if spec.rho_values.is_empty() {
        return Err(HarnessError::Usage("rho_values must not be empty".into()));
    }
    let instances = Instances::load(spec)?;
    let n = instances.get(0).n();
    check_p_values(spec, n, &[Selector::Full])?;
    let p = spec.p_values[0];
    let pool = pool(spec.threads)?;
    let cells: Vec<(f64, usize)> = spec
        .rho_values
        .iter()
        .flat_map(|&rho| (0..spec.trials).map(move |t| (rho, t)))
        .collect();
    let rows: Vec<ResultRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(rho, t)| {
                let m = if rho == 0.0 { Selector::Rsn } else { Selector::Crsn };
                run_cell(instances.get(t), m, p, rho, spec, trial_seed(spec.seed, t))
            })
            .collect()
    });
    let summary = spec
        .rho_values
        .iter()
        .zip(rows.chunks(spec.trials))
        .map(|(&rho, chunk)| {
            let ok: Vec<&ResultRow> = chunk.iter().filter(|r| !r.status.is_error()).collect();
            let mean = |f: &dyn Fn(&ResultRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            RhoRow {
                method: chunk[0].method,
                n,
                r: chunk[0].r,
                p,
                s: chunk[0].s,
                rho,
                kappa: spec.kappa,
                trials: spec.trials,
                f_mean: mean(&|r| r.f),
                f_org_mean: mean(&|r| r.f_org),
                steps_mean: mean(&|r| r.steps as f64),
                wall_ms_mean: mean(&|r| r.wall_ms),
                converged_count: ok.iter().filter(|r| r.status == Status::Converged(true)).count(),
            }
        })
        .collect();
    Ok((summary, rows))
}

/// Snapshot file → POD basis of rank `r` → one row per `(method, p)`.
///
/// The random row reports the mean `f_org` over `random_trials` draws.
pub fn run_datadriven(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let path = spec
        .snapshots
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("datadriven needs a snapshot file".into()))?;
    let mut x = SnapshotMatrix::new(read_matrix(path)?)?;
    if spec.center {
        x = x.centered();
    }
    let u = pod_basis(&x, spec.r).map_err(|e| match e {
        sensel_core::Error::InvalidRank { .. } => HarnessError::Input {
            path: path.clone(),
            msg: e.to_string(),
        },
        e => e.into(),
    })?;
    datadriven_on(spec, u)
}

pub fn datadriven_on(spec: &SweepSpec, u: CandidateBasis) -> Result<Vec<ResultRow>> {
    let single = SweepSpec {
        trials: 1,
        methods: spec.methods.iter().copied().filter(|&m| m != Selector::Random).collect(),
        ..spec.clone()
    };
    let instances = Instances::from_basis(u);
    let mut rows = if single.methods.is_empty() {
        Vec::new()
    } else {
        sweep_on(&single, &instances)?
    };
    if spec.methods.contains(&Selector::Random) {
        let u = instances.get(0);
        let seed = trial_seed(spec.seed, 0);
        let mut p_values = spec.p_values.clone();
        p_values.sort_unstable();
        p_values.dedup();
        for p in p_values {
            let mut row = run_cell(u, Selector::Random, p, 0.0, spec, seed);
            row.f_org = random_mean(u, p, spec.random_trials, seed)?;
            row.f_org_minus_greedy = greedy_select(u, p)
                .map(|sel| row.f_org - d_optimality(u, &sel).value)
                .unwrap_or(f64::NAN);
            row.steps = spec.random_trials;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Mean `f_org` of `trials` uniform random selections.
pub fn random_mean(u: &CandidateBasis, p: usize, trials: usize, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..trials {
        let sel = random_select(u.n(), p, &mut stream(seed, "random", &[p as u64, k as u64]))?;
        total += d_optimality(u, &sel).value;
    }
    Ok(total / trials.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            n: 40,
            r: 3,
            p_values: vec![4, 6],
            trials: 2,
            methods: Selector::ALL.to_vec(),
            s: Some(8),
            ..SweepSpec::default()
        }
    }

    #[test]
    fn sweep_row_order_and_greedy_diff() {
        let rows = run_sweep(&small_spec()).unwrap();
        assert_eq!(rows.len(), 5 * 2 * 2);
        let keys: Vec<_> = rows.iter().map(|r| (r.method, r.p, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by_key(|&(m, p, _)| (m, p));
        assert_eq!(keys, sorted);
        for r in rows.iter().filter(|r| r.method == Selector::Greedy) {
            assert_eq!(r.f_org_minus_greedy, 0.0);
        }
        assert!(rows.iter().all(|r| !r.status.is_error()));
    }

    #[test]
    fn invalid_p_is_usage_error() {
        let spec = SweepSpec {
            p_values: vec![40],
            ..small_spec()
        };
        assert_eq!(run_sweep(&spec).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn singular_fixture_reports_sentinel() {
        let u = CandidateBasis::new(DMatrix::identity(3, 3)).unwrap();
        let spec = SweepSpec {
            methods: vec![Selector::Full],
            p_values: vec![2],
            ..SweepSpec::default()
        };
        let rows = sweep_on(&spec, &Instances::from_basis(u)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].f_org, f64::NEG_INFINITY);
        assert_eq!(rows[0].status, Status::Converged(true));
    }

    #[test]
    fn rho_zero_matches_rsn_sweep() {
        let spec = SweepSpec {
            rho_values: vec![0.0],
            methods: vec![Selector::Rsn],
            p_values: vec![5],
            trials: 3,
            ..small_spec()
        };
        let (summary, _) = run_rho_sweep(&spec).unwrap();
        let rows = run_sweep(&spec).unwrap();
        let mean = rows.iter().map(|r| r.f).sum::<f64>() / 3.0;
        assert_eq!(summary[0].method, Selector::Rsn);
        assert_eq!(summary[0].f_mean.to_bits(), mean.to_bits());
    }
}
