use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::{json, Value};
use thiserror::Error;

use strausslab::config::{Case, ExperimentConfig};
use strausslab::exponents::{classify, gamma, strauss, subcritical_rate};
use strausslab::functionals::evaluate;
use strausslab::iteration::{
    build_ledger, critical_ode_sweep as ode_sweep, fit_scaling, subcritical_blowup_time, FitMode,
    ScalingFit,
};
use strausslab::solver::{extrapolate_blowup, lifespan_sweep as pde_sweep, solve_until_blowup};
use strausslab::testfuncs::SubcriticalTestFn;
use strausslab::verify::run_checks;

/// Trajectory points kept per run in JSON exports.
const TRAJECTORY_POINTS: usize = 200;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] strausslab::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(strausslab::Error::Config(_)) => 2,
            CliError::Check(_) => 3,
            _ => 4,
        }
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub json: bool,
}

impl Context {
    pub fn new(
        config: Option<&Path>,
        out: Option<PathBuf>,
        p_strauss: bool,
        json: bool,
    ) -> Result<Self, CliError> {
        let mut cfg = match config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if p_strauss {
            let r = cfg.model.strauss_dimension();
            cfg.model.p = strauss(r).map_err(|e| CliError::Config(format!("--pS: {e}")))?;
            info!("p set to p_S({r}) = {}", cfg.model.p);
        }
        let out = out.or_else(|| cfg.output_dir.clone());
        Ok(Self { cfg, out, json })
    }

    fn file(&self, name: &str) -> Result<Option<BufWriter<File>>, CliError> {
        let Some(dir) = &self.out else {
            return Ok(None);
        };
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        info!("writing {}", path.display());
        Ok(Some(BufWriter::new(File::create(path)?)))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<(), CliError> {
        if let Some(mut w) = self.file(name)? {
            serde_json::to_writer_pretty(&mut w, value)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        if let Some(mut w) = self.file(name)? {
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }

    fn print(&self, value: &Value, table: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value).unwrap_or_default());
        } else {
            print!("{}", table());
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}

fn fit_json(fit: &Result<ScalingFit, String>, theory: f64) -> Value {
    match fit {
        Ok(f) => json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "theoretical_slope": theory,
            "relative_deviation": (f.slope - theory).abs() / theory.abs(),
        }),
        Err(msg) => json!({ "refused": msg, "theoretical_slope": theory }),
    }
}

fn fit_points(points: &[(f64, f64)], mode: FitMode) -> Result<ScalingFit, String> {
    if points.len() < 3 {
        return Err(format!(
            "fit refused: need at least 3 runs that blew up, got {}",
            points.len()
        ));
    }
    fit_scaling(points, mode).map_err(|e| e.to_string())
}

pub fn exponents(ctx: &Context) -> Result<(), CliError> {
    let report = classify(&ctx.cfg.model)?;
    let value = to_json(&report)?;
    ctx.write_json("exponents.json", &value)?;
    ctx.print(&value, || {
        let f = &report.hypothesis_flags;
        let mut s = String::new();
        let _ = writeln!(s, "delta       {}", report.delta);
        let _ = writeln!(s, "pS          {}", report.p_s);
        let _ = writeln!(s, "pF_shifted  {}", report.pf_shifted);
        let _ = writeln!(s, "gamma       {}", report.gamma);
        let _ = writeln!(s, "r1, r2      {}, {}", report.r1, report.r2);
        let _ = writeln!(s, "beta_p      {}", report.beta_p);
        let _ = writeln!(s, "regime      {}", report.regime);
        let _ = writeln!(
            s,
            "flags       thm1_ok={} thm2_ok={} beta_p_admissible={} beta_p_geq={}",
            f.thm1_ok, f.thm2_ok, f.beta_p_admissible, f.beta_p_geq
        );
        s
    });
    Ok(())
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let report = run_checks(&ctx.cfg);
    let value = to_json(&report)?;
    ctx.write_json("verify.json", &value)?;
    ctx.print(&value, || {
        let mut s = String::new();
        for (name, c) in &report.0 {
            let status = if c.pass { "PASS" } else if c.degenerate { "SKIP" } else { "FAIL" };
            let metric = c.metric.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into());
            let _ = write!(s, "{status}  {name:<14} {metric}");
            if let Some(e) = &c.error {
                let _ = write!(s, "  ({e})");
            }
            s.push('\n');
        }
        s
    });
    if report.all_pass() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .0
            .iter()
            .filter(|(_, c)| !c.pass && !c.degenerate)
            .map(|(k, _)| k.as_str())
            .collect();
        Err(CliError::Check(format!("checks failed: {}", failed.join(", "))))
    }
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let grid = cfg.radial_grid()?;
    let mut settings = cfg.solver_settings();
    if settings.snapshot_dt.is_none() {
        settings.snapshot_dt = Some((cfg.solver.t_max / 200.0).max(settings.base_dt(&grid)));
    }
    if !grid.covers(cfg.model.radius, settings.t_max) {
        warn!("outer boundary is inside the light cone before t_max");
    }
    let trace = solve_until_blowup(&cfg.model, &grid, &settings)?;
    let tf = SubcriticalTestFn::from_params(&cfg.model).ok();
    let series = evaluate(&trace, tf.as_ref(), &[])?;
    let t_est = extrapolate_blowup(&trace.crossings, cfg.model.p).ok();

    if let Some(mut w) = ctx.file("snapshots.csv")? {
        trace.write_snapshots_csv(&mut w)?;
    }
    let rows: Vec<Vec<String>> = (0..series.times.len())
        .map(|k| {
            vec![
                series.times[k].to_string(),
                series.g[k].to_string(),
                series.lp[k].to_string(),
                series.f.as_ref().map(|f| f[k].to_string()).unwrap_or_default(),
                series.sup[k].to_string(),
            ]
        })
        .collect();
    let header: Vec<String> = ["t", "G", "Lp", "F", "sup"].map(String::from).to_vec();
    ctx.write_csv("functionals.csv", &header, &rows)?;
    let value = json!({ "trace": to_json(&trace)?, "T_est": t_est });
    ctx.write_json("solve.json", &value)?;
    ctx.print(&value, || {
        let mut s = format!(
            "outcome {:?} at t = {} after {} steps (dr {}, dt {})\n",
            trace.outcome,
            trace.t_end,
            trace.steps,
            grid.dr(),
            trace.dt_base
        );
        for (m, t) in &trace.crossings {
            let _ = writeln!(s, "  sup|u| >= {m:e} at t = {t}");
        }
        if let Some(t) = t_est {
            let _ = writeln!(s, "extrapolated blow-up time {t}");
        }
        s
    });
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn lifespan_sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    cfg.require_case(Case::Subcritical)?;
    let report = classify(&cfg.model)?;
    if !report.hypothesis_flags.thm1_ok {
        warn!("model is outside the sub-critical range (regime {})", report.regime);
    }
    let eps = cfg.sweep.values();
    let settings = cfg.solver_settings();
    let results = pde_sweep(&cfg.model, &eps, &settings, &cfg.refinement());

    let mut header: Vec<String> = ["eps", "T_est", "converged", "dt", "status"].map(String::from).to_vec();
    header.extend(settings.thresholds.iter().map(|m| format!("T_{m:e}")));
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut errors = 0;
    for (e, res) in eps.iter().zip(&results) {
        let row = match res {
            Ok(est) => {
                points.push((*e, est.t_est));
                let mut row = vec![
                    e.to_string(),
                    est.t_est.to_string(),
                    est.converged.to_string(),
                    est.dt_used.to_string(),
                    "ok".into(),
                ];
                row.extend(settings.thresholds.iter().map(|m| {
                    fmt_opt(est.t_at_threshold.iter().find(|(mm, _)| mm == m).map(|(_, t)| *t))
                }));
                row
            }
            Err(err) => {
                let status = match err {
                    strausslab::Error::NoBlowUp { .. } => "no-blowup",
                    _ => {
                        errors += 1;
                        "error"
                    }
                };
                warn!("eps = {e}: {err}");
                let mut row = vec![e.to_string(), String::new(), "false".into(), String::new(), status.into()];
                row.extend(settings.thresholds.iter().map(|_| String::new()));
                row
            }
        };
        rows.push(row);
    }
    ctx.write_csv("lifespan_sweep.csv", &header, &rows)?;

    let theory = subcritical_rate(&cfg.model);
    let fit = fit_points(&points, FitMode::Subcritical);
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    let all_converged = results.iter().all(|r| r.as_ref().is_ok_and(|e| e.converged));
    // A shallower slope than the bound means T grows no faster than allowed.
    let consistent = fit.as_ref().ok().map(|f| f.slope >= theory);
    let mut summary = fit_json(&fit, theory);
    summary["monotone"] = json!(monotone);
    summary["all_converged"] = json!(all_converged);
    summary["consistent_with_upper_bound"] = json!(consistent);
    summary["gamma"] = json!(gamma(cfg.model.p, cfg.model.strauss_dimension()));
    ctx.write_json("lifespan_fit.json", &summary)?;
    let value = json!({ "rows": rows, "header": header, "fit": summary });
    ctx.print(&value, || {
        let mut s = header.join(",") + "\n";
        for r in &rows {
            s += &(r.join(",") + "\n");
        }
        match &fit {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "slope {:.4} (theory {:.4}), r^2 {:.4}, monotone {monotone}, consistent {}",
                    f.slope,
                    theory,
                    f.r_squared,
                    consistent.unwrap_or(false)
                );
            }
            Err(msg) => {
                let _ = writeln!(s, "{msg}");
            }
        }
        s
    });
    if errors == eps.len() {
        return Err(CliError::Runtime("every sweep entry failed".into()));
    }
    Ok(())
}

pub fn critical_ode_sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    cfg.require_case(Case::OdeCritical)?;
    let p = cfg.model.p;
    let eps = cfg.sweep.values();
    let results = ode_sweep(p, &eps, &cfg.ode);

    let header: Vec<String> = ["eps", "tau_star", "t_star", "steps", "status"].map(String::from).to_vec();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for (e, res) in eps.iter().zip(&results) {
        match res {
            Ok(run) => {
                points.push((*e, run.tau_star));
                rows.push(vec![
                    e.to_string(),
                    run.tau_star.to_string(),
                    format!("{:e}", run.t_star),
                    run.steps.to_string(),
                    "ok".into(),
                ]);
                let mut short = run.clone();
                short.trajectory = run.downsampled(run.trajectory.len().div_ceil(TRAJECTORY_POINTS));
                runs.push(to_json(&short)?);
            }
            Err(err) => {
                warn!("eps = {e}: {err}");
                let status = if matches!(err, strausslab::Error::NoBlowUp { .. }) { "no-blowup" } else { "error" };
                rows.push(vec![e.to_string(), String::new(), String::new(), String::new(), status.into()]);
            }
        }
    }
    ctx.write_csv("critical_ode_sweep.csv", &header, &rows)?;
    let theory = -p * (p - 1.0);
    let fit = fit_points(&points, FitMode::Subcritical);
    let summary = fit_json(&fit, theory);
    ctx.write_json("critical_ode.json", &json!({ "fit": summary, "runs": runs }))?;
    let value = json!({ "rows": rows, "header": header, "fit": summary });
    ctx.print(&value, || {
        let mut s = header.join(",") + "\n";
        for r in &rows {
            s += &(r.join(",") + "\n");
        }
        match &fit {
            Ok(f) => {
                let _ = writeln!(s, "slope {:.4} (theory {theory:.4}), r^2 {:.4}", f.slope, f.r_squared);
            }
            Err(msg) => {
                let _ = writeln!(s, "{msg}");
            }
        }
        s
    });
    if points.is_empty() {
        return Err(CliError::Runtime("no run blew up".into()));
    }
    Ok(())
}

pub fn ledger(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let l = build_ledger(&cfg.model, cfg.ledger.c1, cfg.ledger.j_max)?;
    let mut rows = Vec::new();
    for j in 1..=l.a.len() {
        let (a, b, lower) = l.closed_forms(j)?;
        rows.push(vec![
            j.to_string(),
            l.a[j - 1].to_string(),
            l.b[j - 1].to_string(),
            l.log_d[j - 1].to_string(),
            a.to_string(),
            b.to_string(),
            lower.to_string(),
        ]);
    }
    let header: Vec<String> =
        ["j", "a", "b", "log_D", "a_closed", "b_closed", "log_D_lower"].map(String::from).to_vec();
    ctx.write_csv("ledger.csv", &header, &rows)?;
    let blowup = subcritical_blowup_time(&l, cfg.ledger.t0);
    let value = json!({
        "ledger": to_json(&l)?,
        "blowup": match &blowup {
            Ok(b) => to_json(b)?,
            Err(e) => json!({ "unavailable": e.to_string() }),
        },
    });
    ctx.write_json("ledger.json", &value)?;
    ctx.print(&value, || {
        let mut s = format!(
            "r2 {}  alpha {}  beta {}  C0 {:e}  C2 {:e}  C3 {:e}  Sp {}\n",
            l.r2, l.alpha, l.beta_led, l.c0, l.c2, l.c3, l.sp_inf
        );
        s += &(header.join(",") + "\n");
        for r in &rows {
            s += &(r.join(",") + "\n");
        }
        match &blowup {
            Ok(b) => {
                let _ = writeln!(s, "blow-up time {} (bound C4 eps^rate = {})", b.time, b.bound);
            }
            Err(e) => {
                let _ = writeln!(s, "no blow-up time: {e}");
            }
        }
        s
    });
    Ok(())
}
