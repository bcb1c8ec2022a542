//! Experiment configuration: line-oriented `key = value` files with dotted
//! keys. Blank lines and `#` comments are ignored, unknown keys are errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::ModelParams;
use crate::iteration::{CriticalOdeSettings, J_MAX_GUARD};
use crate::profile::DataProfile;
use crate::solver::{RadialGrid, RefinementPlan, SolverSettings, DEFAULT_CFL};
use crate::verify::CHECK_NAMES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    Subcritical,
    Critical,
    OdeCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    List(Vec<f64>),
    /// `count` log-spaced values from `max` down to `min`.
    LogSpaced { min: f64, max: f64, count: usize },
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::List(v) => v.clone(),
            Sweep::LogSpaced { min, max, count } => {
                if *count == 1 {
                    return vec![*max];
                }
                let (a, b) = (max.ln(), min.ln());
                (0..*count)
                    .map(|k| (a + (b - a) * k as f64 / (*count - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

/// Grid request: an explicit `(r_max, nr)` pair or a spacing with the reach
/// derived from `R + t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub dr: f64,
    pub r_max: Option<f64>,
    pub nr: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSpec {
    pub t_max: f64,
    pub cfl: f64,
    pub snapshot_dt: Option<f64>,
    pub max_levels: usize,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerSpec {
    pub j_max: usize,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub f_amplitude: f64,
    pub g_amplitude: f64,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub sweep: Sweep,
    /// Unset means "whatever the subcommand runs".
    pub case: Option<Case>,
    pub checks: Vec<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub ode: CriticalOdeSettings,
    pub ledger: LedgerSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::new(1, 2.0, 0.0, 2.0, 0.5, 1.0),
            f_amplitude: 1.0,
            g_amplitude: 1.0,
            grid: GridSpec {
                dr: 0.05,
                r_max: None,
                nr: None,
            },
            solver: SolverSpec {
                t_max: 200.0,
                cfl: DEFAULT_CFL,
                snapshot_dt: None,
                max_levels: 4,
                rel_tol: 0.01,
            },
            sweep: Sweep::List(vec![0.8, 0.6, 0.45, 0.34, 0.25]),
            case: None,
            checks: CHECK_NAMES.iter().map(|s| s.to_string()).collect(),
            output_dir: None,
            seed: 0,
            ode: CriticalOdeSettings::default(),
            ledger: LedgerSpec {
                j_max: 30,
                c1: 1.0,
                t0: 1.0,
            },
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("key `{key}`: cannot read `{value}` as {what}"))
}

fn real(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v, "a finite number"))
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn list(v: &str) -> Vec<&str> {
    v.trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

impl ExperimentConfig {
    /// Error unless the configured case (if any) is `want`.
    pub fn require_case(&self, want: Case) -> Result<()> {
        match self.case {
            Some(c) if c != want => Err(Error::Config(format!(
                "key `case`: this command needs {want:?}, config says {c:?}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let (mut eps_min, mut eps_max, mut eps_count) = (None, None, None);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let (key, v) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("key `{key}` given twice")));
            }
            match key {
                "model.n" => cfg.model.n = count(key, v)?,
                "model.mu1" => cfg.model.mu1 = real(key, v)?,
                "model.mu2sq" => cfg.model.mu2sq = real(key, v)?,
                "model.p" => cfg.model.p = real(key, v)?,
                "model.eps" => cfg.model.eps = real(key, v)?,
                "model.R" => cfg.model.radius = real(key, v)?,
                "model.f_amplitude" => cfg.f_amplitude = real(key, v)?,
                "model.g_amplitude" => cfg.g_amplitude = real(key, v)?,
                "grid.dr" => cfg.grid.dr = real(key, v)?,
                "grid.r_max" => cfg.grid.r_max = Some(real(key, v)?),
                "grid.nr" => cfg.grid.nr = Some(count(key, v)?),
                "solver.t_max" => cfg.solver.t_max = real(key, v)?,
                "solver.cfl" => cfg.solver.cfl = real(key, v)?,
                "solver.snapshot_dt" => cfg.solver.snapshot_dt = Some(real(key, v)?),
                "solver.max_levels" => cfg.solver.max_levels = count(key, v)?,
                "solver.rel_tol" => cfg.solver.rel_tol = real(key, v)?,
                "sweep.eps" => {
                    cfg.sweep = Sweep::List(list(v).iter().map(|s| real(key, s)).collect::<Result<_>>()?)
                }
                "sweep.eps_min" => eps_min = Some(real(key, v)?),
                "sweep.eps_max" => eps_max = Some(real(key, v)?),
                "sweep.count" => eps_count = Some(count(key, v)?),
                "case" => {
                    cfg.case = Some(match v {
                        "subcritical" => Case::Subcritical,
                        "critical" => Case::Critical,
                        "ode-critical" => Case::OdeCritical,
                        _ => return Err(bad(key, v, "one of subcritical, critical, ode-critical")),
                    })
                }
                "checks" => cfg.checks = list(v).iter().map(|s| s.to_string()).collect(),
                "output_dir" => cfg.output_dir = Some(PathBuf::from(v)),
                "seed" => cfg.seed = v.parse().map_err(|_| bad(key, v, "an unsigned integer"))?,
                "ode.C" => cfg.ode.c = real(key, v)?,
                "ode.c0" => cfg.ode.c0 = real(key, v)?,
                "ledger.j_max" => cfg.ledger.j_max = count(key, v)?,
                "ledger.C1" => cfg.ledger.c1 = real(key, v)?,
                "ledger.T0" => cfg.ledger.t0 = real(key, v)?,
                _ => return Err(Error::Config(format!("unknown key `{key}`"))),
            }
        }
        match (eps_min, eps_max, eps_count) {
            (None, None, None) => {}
            (Some(min), Some(max), Some(count)) => {
                if seen.contains("sweep.eps") {
                    return Err(Error::Config(
                        "key `sweep.eps` conflicts with `sweep.eps_min/eps_max/count`".into(),
                    ));
                }
                cfg.sweep = Sweep::LogSpaced { min, max, count };
            }
            _ => {
                return Err(Error::Config(
                    "keys `sweep.eps_min`, `sweep.eps_max`, `sweep.count` go together".into(),
                ))
            }
        }
        cfg.model.profile =
            DataProfile::bumps(cfg.f_amplitude, cfg.g_amplitude, cfg.model.radius);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks only; the model tuple itself is validated by the
    /// commands that use it, so a bad `δ` surfaces as a domain error there.
    pub fn validate(&self) -> Result<()> {
        let eps = self.sweep.values();
        if let Sweep::LogSpaced { min, max, count } = self.sweep {
            if !(min > 0.0 && max > min) || count == 0 {
                return Err(Error::Config(format!(
                    "key `sweep.eps_min`: need 0 < eps_min < eps_max and count >= 1, got ({min}, {max}, {count})"
                )));
            }
        }
        if eps.is_empty() {
            return Err(Error::Config("key `sweep.eps`: empty list".into()));
        }
        for (i, e) in eps.iter().enumerate() {
            if !(*e > 0.0) {
                return Err(Error::Config(format!("key `sweep.eps`: value {e} must be positive")));
            }
            if eps[..i].contains(e) {
                return Err(Error::Config(format!("key `sweep.eps`: value {e} repeated")));
            }
        }
        if let Some(c) = self.checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
            return Err(Error::Config(format!(
                "key `checks`: unknown check `{c}` (known: {})",
                CHECK_NAMES.join(", ")
            )));
        }
        if !(self.grid.dr > 0.0) {
            return Err(Error::Config("key `grid.dr` must be positive".into()));
        }
        if self.grid.r_max.is_some() != self.grid.nr.is_some() {
            return Err(Error::Config("keys `grid.r_max` and `grid.nr` go together".into()));
        }
        if !(self.solver.t_max > 0.0) || !(self.solver.cfl > 0.0 && self.solver.cfl <= 1.0) {
            return Err(Error::Config(
                "keys `solver.t_max` > 0 and 0 < `solver.cfl` <= 1 required".into(),
            ));
        }
        if self.ledger.j_max > J_MAX_GUARD {
            return Err(Error::Config(format!(
                "key `ledger.j_max`: {} exceeds {J_MAX_GUARD}",
                self.ledger.j_max
            )));
        }
        Ok(())
    }

    /// Grid for a single solve; explicit `(r_max, nr)` wins over `dr`.
    pub fn radial_grid(&self) -> Result<RadialGrid> {
        match (self.grid.r_max, self.grid.nr) {
            (Some(r_max), Some(nr)) => RadialGrid::new(r_max, nr),
            _ => RadialGrid::with_spacing(self.grid.dr, self.model.radius + self.solver.t_max),
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let mut s = SolverSettings::new(self.solver.t_max);
        s.cfl = self.solver.cfl;
        s.snapshot_dt = self.solver.snapshot_dt;
        s
    }

    pub fn refinement(&self) -> RefinementPlan {
        RefinementPlan {
            spacing: self.radial_grid().map(|g| g.dr()).unwrap_or(self.grid.dr),
            max_levels: self.solver.max_levels,
            rel_tol: self.solver.rel_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# lifespan run\nmodel.n = 3\nmodel.mu1 = 2.5  # damping\nsweep.eps = [0.5, 0.25]\ncase = critical\n",
        )
        .unwrap();
        assert_eq!(cfg.model.n, 3);
        assert_eq!(cfg.model.mu1, 2.5);
        assert_eq!(cfg.sweep.values(), vec![0.5, 0.25]);
        assert_eq!(cfg.case, Some(Case::Critical));
    }

    #[test]
    fn unknown_and_bad_keys_are_named() {
        let e = ExperimentConfig::parse("model.q = 1").unwrap_err().to_string();
        assert!(e.contains("model.q"), "{e}");
        let e = ExperimentConfig::parse("model.p = two").unwrap_err().to_string();
        assert!(e.contains("model.p"), "{e}");
        let e = ExperimentConfig::parse("sweep.eps = 0.5, 0.5, 0.1").unwrap_err().to_string();
        assert!(e.contains("sweep.eps"), "{e}");
        let e = ExperimentConfig::parse("checks = exponents, nope").unwrap_err().to_string();
        assert!(e.contains("nope"), "{e}");
        assert!(ExperimentConfig::parse("model.n = 1\nmodel.n = 2").is_err());
    }

    #[test]
    fn log_spaced_sweep() {
        let cfg =
            ExperimentConfig::parse("sweep.eps_min = 0.1\nsweep.eps_max = 1\nsweep.count = 3").unwrap();
        let v = cfg.sweep.values();
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 0.1f64.sqrt()).abs() < 1e-12);
        assert!((v[2] - 0.1).abs() < 1e-12);
    }
}
