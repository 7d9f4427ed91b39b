//! Phase-experiment configuration and its flat `key = value` text form.

use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::{Domain, Mode, SolverConfig};

/// Largest sparsity of the desk-scale grid.
pub const DESK_K_MAX: usize = 16;
/// Largest sparsity of the full grid.
pub const FULL_K_MAX: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    /// Comb sparsities; each `k` runs at `n = k^2`.
    pub k_values: Vec<usize>,
    /// Smallest measurement count of every row.
    pub m_min: usize,
    /// Rows span `m_min ..= m_max_factor * k`.
    pub m_max_factor: usize,
    pub trials: usize,
    pub methods: Vec<Mode>,
    /// Frequency weights swept for the joint method.
    pub lambdas: Vec<f64>,
    pub master_seed: u64,
    /// A trial succeeds when the relative error is at most this.
    pub success_tol: f64,
    pub domain: Domain,
    pub solver: SolverConfig,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Writes measured wall time to the CSV instead of 0.
    pub record_timing: bool,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            k_values: even_range(DESK_K_MAX),
            m_min: 1,
            m_max_factor: 3,
            trials: 50,
            methods: vec![Mode::Jbp, Mode::BpTime],
            lambdas: vec![1.0],
            master_seed: 0,
            success_tol: 1e-4,
            domain: Domain::Real,
            solver: SolverConfig {
                max_iters: 5000,
                ..SolverConfig::default()
            },
            threads: 0,
            record_timing: false,
        }
    }
}

fn even_range(max: usize) -> Vec<usize> {
    (2..=max).step_by(2).collect()
}

impl PhaseConfig {
    /// Default configuration over `k = 2, 4, ..., 32`.
    pub fn full() -> Self {
        Self {
            k_values: even_range(FULL_K_MAX),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::invalid("k_values must not be empty"));
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k < 2 || k % 2 != 0) {
            return Err(Error::invalid(format!("k = {k} must be even and at least 2")));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.m_min == 0 || self.m_max_factor == 0 {
            return Err(Error::invalid("m_min and m_max_factor must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must not be empty"));
        }
        if self.methods.contains(&Mode::Jbp) && self.lambdas.is_empty() {
            return Err(Error::invalid("the joint method needs at least one lambda"));
        }
        if let Some(l) = self.lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("lambda = {l} must be positive")));
        }
        if !(self.success_tol > 0.0 && self.success_tol.is_finite()) {
            return Err(Error::invalid("success_tol must be positive"));
        }
        self.solver.validate()
    }

    /// Inclusive measurement range of the row for sparsity `k`.
    pub fn m_range(&self, k: usize) -> (usize, usize) {
        (self.m_min, (self.m_max_factor * k).max(self.m_min))
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// unspecified keys keep their defaults. `full = true` switches the
    /// default sparsities to the full range unless `k_values` is given.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut explicit_k = false;
        let mut full = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Parse(format!("line {}: invalid {what} `{value}`", lineno + 1));
            let num = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
            let int = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
            let flag = |what: &str| value.parse::<bool>().map_err(|_| bad(what));
            match key {
                "k_values" => {
                    cfg.k_values = split_list(value, |s| s.parse::<usize>().ok()).ok_or_else(|| bad(key))?;
                    explicit_k = true;
                }
                "full" => full = flag(key)?,
                "m_min" => cfg.m_min = int(key)?,
                "m_max_factor" => cfg.m_max_factor = int(key)?,
                "trials" => cfg.trials = int(key)?,
                "methods" => {
                    cfg.methods = split_list(value, |s| s.parse::<Mode>().ok()).ok_or_else(|| bad(key))?;
                }
                "lambdas" | "lambda" => {
                    cfg.lambdas = split_list(value, |s| s.parse::<f64>().ok()).ok_or_else(|| bad(key))?;
                }
                "master_seed" | "seed" => cfg.master_seed = value.parse().map_err(|_| bad(key))?,
                "success_tol" => cfg.success_tol = num(key)?,
                "domain" => cfg.domain = value.parse()?,
                "rho" => cfg.solver.rho = num(key)?,
                "max_iters" => cfg.solver.max_iters = int(key)?,
                "eps_primal" => cfg.solver.eps_primal = num(key)?,
                "eps_dual" => cfg.solver.eps_dual = num(key)?,
                "over_relaxation" => cfg.solver.over_relaxation = num(key)?,
                "adaptive_rho" => cfg.solver.adaptive_rho = flag(key)?,
                "threads" => cfg.threads = int(key)?,
                "record_timing" => cfg.record_timing = flag(key)?,
                other => {
                    return Err(Error::Parse(format!("line {}: unknown key `{other}`", lineno + 1)))
                }
            }
        }
        if full && !explicit_k {
            cfg.k_values = even_range(FULL_K_MAX);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Text form accepted by [`PhaseConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "k_values = {}\nm_min = {}\nm_max_factor = {}\ntrials = {}\nmethods = {}\nlambdas = {}\n\
             master_seed = {}\nsuccess_tol = {:e}\ndomain = {}\nrho = {}\nmax_iters = {}\n\
             eps_primal = {:e}\neps_dual = {:e}\nover_relaxation = {}\nadaptive_rho = {}\n\
             threads = {}\nrecord_timing = {}\n",
            join(self.k_values.iter().map(|k| k.to_string()).collect()),
            self.m_min,
            self.m_max_factor,
            self.trials,
            join(self.methods.iter().map(|m| m.to_string()).collect()),
            join(self.lambdas.iter().map(|l| l.to_string()).collect()),
            self.master_seed,
            self.success_tol,
            self.domain,
            self.solver.rho,
            self.solver.max_iters,
            self.solver.eps_primal,
            self.solver.eps_dual,
            self.solver.over_relaxation,
            self.solver.adaptive_rho,
            self.threads,
            self.record_timing,
        )
    }
}

fn split_list<T>(value: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let cfg = PhaseConfig::default();
        assert_eq!(cfg.k_values, vec![2, 4, 6, 8, 10, 12, 14, 16]);
        assert_eq!(cfg.m_range(8), (1, 24));
        assert_eq!(cfg.trials, 50);
        assert_eq!(cfg.success_tol, 1e-4);
        cfg.validate().unwrap();
        assert_eq!(*PhaseConfig::full().k_values.last().unwrap(), 32);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = PhaseConfig::parse(
            "# reduced grid\nk_values = 4, 8\ntrials=10\nmethods = jbp,bp\nlambdas = 0.5,1\n\
             master_seed = 42  # trailing comment\ndomain = complex\nmax_iters = 100\n\n",
        )
        .unwrap();
        assert_eq!(cfg.k_values, vec![4, 8]);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.methods, vec![Mode::Jbp, Mode::BpTime]);
        assert_eq!(cfg.lambdas, vec![0.5, 1.0]);
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.domain, Domain::Complex);
        assert_eq!(cfg.solver.max_iters, 100);
    }

    #[test]
    fn full_flag() {
        let cfg = PhaseConfig::parse("full = true").unwrap();
        assert_eq!(cfg.k_values.len(), 16);
        let cfg = PhaseConfig::parse("full = true\nk_values = 4").unwrap();
        assert_eq!(cfg.k_values, vec![4]);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = PhaseConfig::default();
        cfg.k_values = vec![2, 6];
        cfg.lambdas = vec![0.25, 2.0];
        cfg.master_seed = u64::MAX;
        cfg.record_timing = true;
        assert_eq!(PhaseConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "k_values = 3",
            "k_values = 0",
            "trials = 0",
            "lambdas = -1",
            "colour = blue",
            "trials",
            "methods = lasso",
            "domain = quaternion",
            "max_iters = 0",
        ] {
            assert!(PhaseConfig::parse(text).is_err(), "{text}");
        }
    }
}
