//! Run parameters and the flat `key = value` config format.
//!
//! Keys match the field names of [`SweepSpec`]. Lines starting with `#` are
//! comments. Lists are comma separated; `p_values` also accepts inclusive
//! ranges such as `10..30`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sensel_core::{Method, SolverConfig};

use crate::error::{io_err, HarnessError, Result};

/// Anything a sweep cell can run: a convex solver or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Selector {
    Full,
    Rsn,
    Crsn,
    Greedy,
    Random,
}

impl Selector {
    pub const ALL: [Selector; 5] = [
        Selector::Full,
        Selector::Rsn,
        Selector::Crsn,
        Selector::Greedy,
        Selector::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Full => "full",
            Selector::Rsn => "rsn",
            Selector::Crsn => "crsn",
            Selector::Greedy => "greedy",
            Selector::Random => "random",
        }
    }

    pub fn solver(self) -> Option<Method> {
        match self {
            Selector::Full => Some(Method::Full),
            Selector::Rsn => Some(Method::Rsn),
            Selector::Crsn => Some(Method::Crsn),
            Selector::Greedy | Selector::Random => None,
        }
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Selector {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| HarnessError::Usage(format!("unknown method `{}`", s.trim())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n: usize,
    pub r: usize,
    pub p_values: Vec<usize>,
    /// `None` means `n / 10`.
    pub s: Option<usize>,
    pub rho: f64,
    pub methods: Vec<Selector>,
    pub trials: usize,
    pub seed: u64,
    pub kappa: f64,
    pub epsilon: f64,
    pub armijo_c: f64,
    pub backtrack_beta: f64,
    pub feasibility_margin: f64,
    pub max_steps: usize,
    pub consecutive_required: Option<usize>,
    /// Fixed candidate basis shared by every trial instead of Gaussian draws.
    pub basis: Option<PathBuf>,
    pub threads: usize,
    pub rho_values: Vec<f64>,
    /// Trial index used by `trace`.
    pub trial: usize,
    pub snapshots: Option<PathBuf>,
    pub center: bool,
    pub random_trials: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            n: 1000,
            r: 10,
            p_values: vec![20],
            s: None,
            rho: solver.rho,
            methods: vec![Selector::Full, Selector::Rsn, Selector::Crsn, Selector::Greedy],
            trials: 1,
            seed: 0,
            kappa: solver.kappa,
            epsilon: solver.epsilon,
            armijo_c: solver.armijo_c,
            backtrack_beta: solver.backtrack_beta,
            feasibility_margin: solver.feasibility_margin,
            max_steps: solver.max_steps,
            consecutive_required: None,
            basis: None,
            threads: 1,
            rho_values: vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9],
            trial: 0,
            snapshots: None,
            center: false,
            random_trials: 1000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

/// `10..13,20` → `[10, 11, 12, 13, 20]`.
pub fn parse_p_values(value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = parse("p_values", a)?;
            let b: usize = parse("p_values", b.trim_start_matches('='))?;
            if b < a {
                return Err(HarnessError::Usage(format!("empty range `{part}` in p_values")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse("p_values", part)?);
        }
    }
    Ok(out)
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Usage(format!("invalid value `{value}` for `{key}`"))),
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl SweepSpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "p" | "p_values" => self.p_values = parse_p_values(value)?,
            "s" => self.s = parse_optional(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "methods" | "method" => {
                let mut methods: Vec<Selector> = parse_list(key, value)?;
                methods.sort();
                methods.dedup();
                self.methods = methods;
            }
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "armijo_c" => self.armijo_c = parse(key, value)?,
            "backtrack_beta" => self.backtrack_beta = parse(key, value)?,
            "feasibility_margin" => self.feasibility_margin = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "consecutive_required" => self.consecutive_required = parse_optional(key, value)?,
            "basis" => self.basis = parse_optional(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "rho_values" => self.rho_values = parse_list(key, value)?,
            "trial" => self.trial = parse(key, value)?,
            "snapshots" => self.snapshots = parse_optional(key, value)?,
            "center" => self.center = parse_bool(key, value)?,
            "random_trials" => self.random_trials = parse(key, value)?,
            _ => return Err(HarnessError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Usage(format!(
                    "{}:{}: expected `key = value`",
                    origin.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| HarnessError::Usage(format!("{}:{}: {e}", origin.display(), lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(HarnessError::Usage(m));
        if self.p_values.is_empty() {
            return usage("p_values must not be empty".into());
        }
        if self.trials == 0 {
            return usage("trials must be >= 1".into());
        }
        if self.methods.is_empty() {
            return usage("methods must not be empty".into());
        }
        if self.threads == 0 {
            return usage("threads must be >= 1".into());
        }
        if let Some(bad) = self.rho_values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return usage(format!("rho value {bad} outside [0, 1]"));
        }
        self.solver_config(0).validate().map_err(|e| HarnessError::Usage(e.to_string()))
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            kappa: self.kappa,
            epsilon: self.epsilon,
            s: self.s,
            rho: self.rho,
            armijo_c: self.armijo_c,
            backtrack_beta: self.backtrack_beta,
            feasibility_margin: self.feasibility_margin,
            max_steps: self.max_steps,
            consecutive_required: self.consecutive_required,
            seed,
        }
    }

    /// The effective configuration in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into());
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("n", self.n.to_string());
        kv("r", self.r.to_string());
        kv("p_values", join(&self.p_values));
        kv("s", opt(self.s.map(|s| s.to_string())));
        kv("rho", self.rho.to_string());
        kv("methods", join(&self.methods));
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        kv("kappa", self.kappa.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("armijo_c", self.armijo_c.to_string());
        kv("backtrack_beta", self.backtrack_beta.to_string());
        kv("feasibility_margin", self.feasibility_margin.to_string());
        kv("max_steps", self.max_steps.to_string());
        kv("consecutive_required", opt(self.consecutive_required.map(|k| k.to_string())));
        kv("basis", path(&self.basis));
        kv("threads", self.threads.to_string());
        kv("rho_values", join(&self.rho_values));
        kv("trial", self.trial.to_string());
        kv("snapshots", path(&self.snapshots));
        kv("center", self.center.to_string());
        kv("random_trials", self.random_trials.to_string());
        out
    }
}

/// Path of the provenance file written next to an output.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config");
    out.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_ranges() {
        assert_eq!(parse_p_values("10..13,20").unwrap(), vec![10, 11, 12, 13, 20]);
        assert_eq!(parse_p_values("5").unwrap(), vec![5]);
        assert!(parse_p_values("5..3").is_err());
        assert!(parse_p_values("x").is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let mut spec = SweepSpec::default();
        spec.apply_text("# comment\nn = 50\nmethods = rsn, full\ns = 7\nbasis = none\n", Path::new("c")).unwrap();
        assert_eq!(spec.n, 50);
        assert_eq!(spec.methods, vec![Selector::Full, Selector::Rsn]);
        assert_eq!(spec.s, Some(7));
        let mut again = SweepSpec::default();
        again.apply_text(&spec.to_text(), Path::new("c")).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn bad_keys_and_values() {
        let mut spec = SweepSpec::default();
        assert!(spec.set("nope", "1").is_err());
        assert!(spec.set("n", "-3").is_err());
        assert!(spec.set("methods", "full,magic").is_err());
        assert!(spec.apply_text("n 5", Path::new("c")).is_err());
        spec.set("rho_values", "0,1.5").unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.config"));
    }
}
