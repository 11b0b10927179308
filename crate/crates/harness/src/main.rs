use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sensel_core::model::{gen_gaussian_problem, gen_lowrank_snapshots, write_matrix};
use sensel_core::Method;
use sensel_harness::config::sidecar_path;
use sensel_harness::plot::{plot, PlotKind};
use sensel_harness::records::{write_csv_file, RHO_HEADER, SWEEP_HEADER, TRACE_HEADER};
use sensel_harness::runner::{run_datadriven, run_rho_sweep, run_sweep, run_trace, trace_rows, trial_seed};
use sensel_harness::{HarnessError, ResultRow, Result, Selector, SweepSpec};

/// D-optimal sensor selection experiments.
#[derive(Parser)]
#[command(name = "sensel", version)]
struct Cli {
    /// Global seed; every trial and solver stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` config file (overridden by command-line flags).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (CSV, SVG or matrix depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, p, trial) cell and write one row per cell.
    Sweep(Problem),
    /// Record the per-step convergence trace of one solve.
    Trace {
        #[arg(long)]
        method: Method,
        /// Trial index whose instance and seed are used.
        #[arg(long)]
        trial: Option<String>,
        #[command(flatten)]
        problem: Problem,
    },
    /// Mean converged f and wall time for each ρ (ρ = 0 runs as rsn).
    RhoSweep {
        #[arg(long)]
        rho_values: Option<String>,
        #[command(flatten)]
        problem: Problem,
    },
    /// Snapshot file → POD basis → selection.
    Datadriven {
        #[arg(long)]
        snapshots: Option<String>,
        /// Subtract each row's temporal mean before the POD.
        #[arg(long)]
        center: bool,
        /// Draws averaged for the random baseline.
        #[arg(long)]
        random_trials: Option<String>,
        #[command(flatten)]
        problem: Problem,
    },
    /// Render a CSV as a static SVG chart.
    Plot {
        #[arg(long)]
        kind: String,
        /// Input CSV; repeat to overlay several traces.
        #[arg(long, required = true)]
        csv: Vec<PathBuf>,
    },
    /// Write a problem file.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        r: Option<String>,
        /// Snapshot count (snapshots only).
        #[arg(long, default_value_t = 50)]
        m: usize,
        /// Singular values, comma separated (snapshots only).
        #[arg(long, default_value = "10,8,6,4,2")]
        sigmas: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Gaussian,
    Snapshots,
}

/// Problem and solver flags; each overrides the config key of the same name.
#[derive(Args, Default)]
struct Problem {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    r: Option<String>,
    /// Sensor counts, e.g. `10..30` or `10,20`.
    #[arg(long, alias = "p-values")]
    p: Option<String>,
    /// Sketch size (`auto` = n/10).
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// Comma-separated subset of full,rsn,crsn,greedy,random.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    armijo_c: Option<String>,
    #[arg(long)]
    backtrack_beta: Option<String>,
    #[arg(long)]
    feasibility_margin: Option<String>,
    #[arg(long)]
    max_steps: Option<String>,
    #[arg(long)]
    consecutive_required: Option<String>,
    /// Candidate basis file shared by all trials.
    #[arg(long)]
    basis: Option<String>,
}

impl Problem {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("n", &self.n),
            ("r", &self.r),
            ("p_values", &self.p),
            ("s", &self.s),
            ("rho", &self.rho),
            ("methods", &self.methods),
            ("trials", &self.trials),
            ("kappa", &self.kappa),
            ("epsilon", &self.epsilon),
            ("armijo_c", &self.armijo_c),
            ("backtrack_beta", &self.backtrack_beta),
            ("feasibility_margin", &self.feasibility_margin),
            ("max_steps", &self.max_steps),
            ("consecutive_required", &self.consecutive_required),
            ("basis", &self.basis),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

fn effective_spec(cli: &Cli, extra: &[(&str, &str)]) -> Result<SweepSpec> {
    effective_spec_from(cli, SweepSpec::default(), extra)
}

/// Defaults < config file < command-line flags.
fn effective_spec_from(cli: &Cli, mut spec: SweepSpec, extra: &[(&str, &str)]) -> Result<SweepSpec> {
    if let Some(path) = &cli.config {
        spec.apply_file(path)?;
    }
    let seed = cli.seed.map(|s| s.to_string());
    let threads = cli.threads.map(|t| t.to_string());
    let globals = [("seed", &seed), ("threads", &threads)];
    for (k, v) in globals.iter().filter_map(|(k, v)| v.as_deref().map(|v| (*k, v))) {
        spec.set(k, v)?;
    }
    for (k, v) in extra {
        spec.set(k, v)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_sidecar(out: &Path, command: &str, spec: &SweepSpec, notes: &[(&str, String)]) -> Result<()> {
    let mut text = format!("# sensel {command}\n");
    text.push_str(&spec.to_text());
    for (k, v) in notes {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    let path = sidecar_path(out);
    std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn write_rows(out: &Path, rows: &[ResultRow]) -> Result<usize> {
    write_csv_file(out, &SWEEP_HEADER, rows.iter().map(ResultRow::fields))?;
    Ok(rows.iter().filter(|r| r.status.is_error()).count())
}

/// Returns the number of failed cells.
fn run(cli: &Cli) -> Result<usize> {
    match &cli.command {
        Command::Sweep(problem) => {
            let spec = effective_spec(cli, &problem.pairs())?;
            let out = out_path(cli, "sweep.csv");
            let rows = run_sweep(&spec)?;
            let failed = write_rows(&out, &rows)?;
            write_sidecar(&out, "sweep", &spec, &[])?;
            Ok(failed)
        }
        Command::Trace { method, trial, problem } => {
            let mut pairs = problem.pairs();
            if let Some(t) = trial {
                pairs.push(("trial", t));
            }
            let spec = effective_spec(cli, &pairs)?;
            let out = out_path(cli, "trace.csv");
            let rep = run_trace(&spec, *method)?;
            write_csv_file(&out, &TRACE_HEADER, trace_rows(&rep))?;
            let converged_step = if rep.converged { rep.steps.to_string() } else { "none".into() };
            let notes = [
                ("method", method.to_string()),
                ("trial_seed", trial_seed(spec.seed, spec.trial).to_string()),
                ("converged", rep.converged.to_string()),
                ("converged_step", converged_step),
                ("steps", rep.steps.to_string()),
                ("f_final", rep.f_final.to_string()),
                ("f_org", rep.f_org.value.to_string()),
                ("wall_ms", (rep.elapsed.as_secs_f64() * 1e3).to_string()),
            ];
            write_sidecar(&out, "trace", &spec, &notes)?;
            Ok(0)
        }
        Command::RhoSweep { rho_values, problem } => {
            let mut pairs = problem.pairs();
            if let Some(v) = rho_values {
                pairs.push(("rho_values", v));
            }
            let spec = effective_spec(cli, &pairs)?;
            let out = out_path(cli, "rho.csv");
            let (summary, rows) = run_rho_sweep(&spec)?;
            write_csv_file(&out, &RHO_HEADER, summary.iter().map(|r| r.fields()))?;
            write_sidecar(&out, "rho-sweep", &spec, &[])?;
            Ok(rows.iter().filter(|r| r.status.is_error()).count())
        }
        Command::Datadriven {
            snapshots,
            center,
            random_trials,
            problem,
        } => {
            let mut pairs = problem.pairs();
            if let Some(v) = snapshots {
                pairs.push(("snapshots", v));
            }
            if *center {
                pairs.push(("center", "true"));
            }
            if let Some(v) = random_trials {
                pairs.push(("random_trials", v));
            }
            let base = SweepSpec {
                methods: Selector::ALL.to_vec(),
                ..SweepSpec::default()
            };
            let spec = effective_spec_from(cli, base, &pairs)?;
            let out = out_path(cli, "datadriven.csv");
            let rows = run_datadriven(&spec)?;
            let failed = write_rows(&out, &rows)?;
            write_sidecar(&out, "datadriven", &spec, &[])?;
            Ok(failed)
        }
        Command::Plot { kind, csv } => {
            let kind: PlotKind = kind.parse()?;
            let out = out_path(cli, "plot.svg");
            let svg = plot(kind, csv)?;
            std::fs::write(&out, svg).map_err(|source| HarnessError::Io { path: out, source })?;
            Ok(0)
        }
        Command::Gen { kind, n, r, m, sigmas } => {
            let mut pairs = Vec::new();
            if let Some(n) = n {
                pairs.push(("n", n.as_str()));
            }
            if let Some(r) = r {
                pairs.push(("r", r.as_str()));
            }
            let spec = effective_spec(cli, &pairs)?;
            let out = out_path(cli, "problem.txt");
            let matrix = match kind {
                GenKind::Gaussian => gen_gaussian_problem(spec.n, spec.r, spec.seed)?.into_matrix(),
                GenKind::Snapshots => {
                    let sigmas = sigmas
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| HarnessError::Usage(format!("invalid --sigmas `{sigmas}`")))?;
                    gen_lowrank_snapshots(spec.n, *m, &sigmas, spec.seed)?.matrix().clone()
                }
            };
            write_matrix(&out, &matrix)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("sensel: {failed} cell(s) failed; see the converged column");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("sensel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
