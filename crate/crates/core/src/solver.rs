//! Radial leapfrog solver for
//! `u_tt − Δu + μ₁/(1+t)u_t + μ₂²/(1+t)²u = |u|^p`, with blow-up detection
//! on a threshold ladder and extrapolated lifespans.

use std::io::Write;

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exponents::{classify, ModelParams};
use crate::numerics::linear_fit;

/// Default threshold ladder for `sup|u|`.
pub const THRESHOLDS: [f64; 4] = [1e3, 1e4, 1e5, 1e6];
pub const DEFAULT_CFL: f64 = 0.5;

/// Uniform radial grid `r_i = i·dr`, `i = 0..=nr`, Dirichlet at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub nr: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, nr: usize) -> Result<Self> {
        if !(r_max > 0.0) || nr < 2 {
            return domain(format!("grid needs r_max > 0 and nr >= 2, got ({r_max}, {nr})"));
        }
        Ok(Self { r_max, nr })
    }

    /// Smallest grid with spacing `dr` satisfying `r_max ≥ reach + 2dr`.
    pub fn with_spacing(dr: f64, reach: f64) -> Result<Self> {
        if !(dr > 0.0) || !(reach > 0.0) {
            return domain(format!("grid needs dr > 0 and reach > 0, got ({dr}, {reach})"));
        }
        let nr = (reach / dr - 1e-9).ceil() as usize + 2;
        Self::new(nr as f64 * dr, nr)
    }

    /// Single node, for the spatially homogeneous ODE mode.
    pub fn point() -> Self {
        Self { r_max: 0.0, nr: 0 }
    }

    pub fn dr(&self) -> f64 {
        if self.nr == 0 {
            0.0
        } else {
            self.r_max / self.nr as f64
        }
    }

    pub fn nodes(&self) -> usize {
        self.nr + 1
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr()
    }

    /// Whether waves starting in `B_R` stay off the outer boundary until `t_max`.
    pub fn covers(&self, radius: f64, t_max: f64) -> bool {
        self.r_max >= radius + t_max + 2.0 * self.dr() - 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialMode {
    Radial,
    /// Laplacian dropped; a single node carries `u(t)`.
    ZeroDim,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSettings {
    pub cfl: f64,
    pub t_max: f64,
    /// Snapshot spacing; rounded to a whole number of base steps.
    pub snapshot_dt: Option<f64>,
    pub nonlinear: bool,
    pub mode: SpatialMode,
    pub thresholds: Vec<f64>,
    /// `sup|u|` above which the step follows the local blow-up time scale.
    pub adapt_above: f64,
    pub adapt_factor: f64,
}

impl SolverSettings {
    pub fn new(t_max: f64) -> Self {
        Self {
            cfl: DEFAULT_CFL,
            t_max,
            snapshot_dt: None,
            nonlinear: true,
            mode: SpatialMode::Radial,
            thresholds: THRESHOLDS.to_vec(),
            adapt_above: 1e3,
            adapt_factor: 0.1,
        }
    }

    pub fn zero_dim(t_max: f64, dt: f64) -> Self {
        Self {
            mode: SpatialMode::ZeroDim,
            cfl: dt,
            ..Self::new(t_max)
        }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_snapshots(mut self, dt: f64) -> Self {
        self.snapshot_dt = Some(dt);
        self
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Self {
        self.thresholds = thresholds;
        self
    }

    /// Base time step: `cfl·dr` on a grid, `cfl` itself in ODE mode.
    pub fn base_dt(&self, grid: &RadialGrid) -> f64 {
        match self.mode {
            SpatialMode::Radial => self.cfl * grid.dr(),
            SpatialMode::ZeroDim => self.cfl,
        }
    }
}

/// Two consecutive time levels of the discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
    /// Step that led from `u_prev` to `u_curr`.
    pub dt: f64,
    pub steps: usize,
    /// Nodes beyond this index are still exactly zero.
    active: usize,
    scratch: Vec<f64>,
}

fn source(u: f64, p: f64, on: bool) -> f64 {
    if on {
        u.abs().powf(p)
    } else {
        0.0
    }
}

/// `u″ + (n−1)/r·u′` with the axis row `n·2(u₁ − u₀)/dr²`; zero past `active`.
fn radial_laplacian(u: &[f64], n: usize, dr: f64, active: usize, out: &mut [f64]) {
    let last = u.len() - 1;
    let inv = 1.0 / (dr * dr);
    let k = (n as f64 - 1.0) / (2.0 * dr);
    out.iter_mut().for_each(|v| *v = 0.0);
    if last == 0 {
        return;
    }
    out[0] = n as f64 * 2.0 * (u[1] - u[0]) * inv;
    for i in 1..active.min(last) {
        let r = i as f64 * dr;
        out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv + k / r * (u[i + 1] - u[i - 1]);
    }
}

impl WaveState {
    /// Data at `t = 0` and the Taylor-expanded first level at `t = dt`.
    pub fn initial(
        params: &ModelParams,
        grid: &RadialGrid,
        settings: &SolverSettings,
        dt: f64,
    ) -> Self {
        let nodes = grid.nodes();
        let eps = params.eps;
        let dr = grid.dr();
        let mut u0: Vec<f64> = (0..nodes).map(|i| eps * params.profile.f.eval(grid.r(i))).collect();
        let v0: Vec<f64> = (0..nodes).map(|i| eps * params.profile.g.eval(grid.r(i))).collect();
        if nodes > 1 {
            u0[nodes - 1] = 0.0;
        }
        let support = params.profile.support();
        let active = if nodes == 1 {
            1
        } else {
            ((support / dr).ceil() as usize + 2).min(nodes - 1)
        };
        let mut lap = vec![0.0; nodes];
        if settings.mode == SpatialMode::Radial {
            radial_laplacian(&u0, params.n, dr, active, &mut lap);
        }
        let u1: Vec<f64> = (0..nodes)
            .map(|i| {
                if nodes > 1 && i == nodes - 1 {
                    return 0.0;
                }
                let acc = lap[i] - params.mu1 * v0[i] - params.mu2sq * u0[i]
                    + source(u0[i], params.p, settings.nonlinear);
                u0[i] + dt * v0[i] + 0.5 * dt * dt * acc
            })
            .collect();
        Self {
            t: dt,
            u_prev: u0,
            u_curr: u1,
            dt,
            steps: 1,
            active: (active + 1).min(nodes.saturating_sub(1).max(1)),
            scratch: lap,
        }
    }

    pub fn sup(&self) -> f64 {
        self.u_curr.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `r_i` with `|u_i| > rel·max|u|`.
    pub fn support_radius(&self, grid: &RadialGrid, rel: f64) -> f64 {
        let cut = rel * self.sup();
        self.u_curr
            .iter()
            .rposition(|v| v.abs() > cut)
            .map(|i| grid.r(i))
            .unwrap_or(0.0)
    }
}

/// One leapfrog step of size `dt_next` from `state.t`.
///
/// The damping term is averaged over the two neighbouring levels, which
/// keeps the update explicit; unequal consecutive steps use the matching
/// three-point formulas.
pub fn step(
    state: &mut WaveState,
    params: &ModelParams,
    grid: &RadialGrid,
    settings: &SolverSettings,
    dt_next: f64,
) -> Result<f64> {
    let nodes = state.u_curr.len();
    let dr = grid.dr();
    let s = 1.0 + state.t;
    let m = params.mu1 / s;
    let mass = params.mu2sq / (s * s);
    let (hm, hp) = (state.dt, dt_next);
    let lap = &mut state.scratch;
    if settings.mode == SpatialMode::Radial {
        radial_laplacian(&state.u_curr, params.n, dr, state.active, lap);
    }
    let ratio = hp / hm;
    let lead = ratio - 0.5 * m * hp;
    let force = 0.5 * hp * (hp + hm);
    let denom = 1.0 + 0.5 * m * hp;
    let limit = if nodes == 1 { 1 } else { state.active.min(nodes - 1) };
    let mut sup: f64 = 0.0;
    let mut finite = true;
    for i in 0..limit {
        let u = state.u_curr[i];
        let l = lap[i] - mass * u + source(u, params.p, settings.nonlinear);
        let next = u + ((u - state.u_prev[i]) * lead + l * force) / denom;
        finite &= next.is_finite();
        sup = sup.max(next.abs());
        // u_prev becomes the new level in place
        state.u_prev[i] = next;
    }
    std::mem::swap(&mut state.u_prev, &mut state.u_curr);
    state.t += hp;
    state.dt = hp;
    state.steps += 1;
    if nodes > 1 {
        state.active = (state.active + 1).min(nodes - 1);
    }
    if !finite {
        return Err(Error::NonFinite { t: state.t });
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    BlowUp,
    TimedOut,
}

/// Everything recorded by a single solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub params: ModelParams,
    pub grid: RadialGrid,
    pub settings: SolverSettings,
    pub dt_base: f64,
    /// Spacing of the recorded snapshots (a whole number of base steps).
    pub snapshot_dt: Option<f64>,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<Vec<f64>>,
    /// `(M, first time sup|u| ≥ M)` for each crossed threshold.
    pub crossings: Vec<(f64, f64)>,
    pub outcome: Outcome,
    pub t_end: f64,
    pub steps: usize,
    pub max_support_excess: f64,
}

impl SolveTrace {
    /// Snapshot dump with header `t,r,u`.
    pub fn write_snapshots_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r,u")?;
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            for (i, u) in snap.iter().enumerate() {
                writeln!(w, "{t},{},{u}", self.grid.r(i))?;
            }
        }
        Ok(())
    }

    pub fn sup_at(&self, k: usize) -> f64 {
        self.snapshots[k].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Linear interpolation of the crossing time in `y = sup^{−(p−1)/2}`,
/// which is linear in `t` near an ODE-type blow-up.
fn crossing_time(t0: f64, t1: f64, s0: f64, s1: f64, m: f64, p: f64) -> f64 {
    let k = -(p - 1.0) / 2.0;
    let (y0, y1, ym) = (s0.powf(k), s1.powf(k), m.powf(k));
    if !(y0 > y1) {
        return t1;
    }
    t0 + (t1 - t0) * ((y0 - ym) / (y0 - y1)).clamp(0.0, 1.0)
}

pub fn solve_until_blowup(
    params: &ModelParams,
    grid: &RadialGrid,
    settings: &SolverSettings,
) -> Result<SolveTrace> {
    params.validate()?;
    if settings.thresholds.is_empty() {
        return domain("threshold ladder is empty");
    }
    if settings.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("threshold ladder must be strictly increasing");
    }
    let grid = match settings.mode {
        SpatialMode::ZeroDim => RadialGrid::point(),
        SpatialMode::Radial => *grid,
    };
    if settings.mode == SpatialMode::Radial && !grid.covers(params.radius, settings.t_max) {
        return domain(format!(
            "grid r_max = {} must be at least R + t_max + 2 dr = {}",
            grid.r_max,
            params.radius + settings.t_max + 2.0 * grid.dr()
        ));
    }
    let dt = settings.base_dt(&grid);
    if !(dt > 0.0) {
        return domain(format!("base time step {dt} must be positive"));
    }
    let mut state = WaveState::initial(params, &grid, settings, dt);
    let sup0 = state.u_prev.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if sup0 >= settings.thresholds[0] {
        return domain(format!(
            "initial amplitude {sup0} already exceeds the first threshold {}",
            settings.thresholds[0]
        ));
    }

    let stride = settings
        .snapshot_dt
        .map(|s| ((s / dt).round() as usize).max(1));
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut recording = stride.is_some();
    if recording {
        times.push(0.0);
        snapshots.push(state.u_prev.clone());
    }
    let record = |state: &WaveState, times: &mut Vec<f64>, snaps: &mut Vec<Vec<f64>>| {
        times.push(state.steps as f64 * dt);
        snaps.push(state.u_curr.clone());
    };
    if let Some(1) = stride {
        record(&state, &mut times, &mut snapshots);
    }

    let p = params.p;
    let mut crossings = Vec::new();
    let mut next_threshold = 0;
    let mut sup_prev = sup0;
    let mut sup = state.sup();
    let mut t_prev = 0.0;
    let support0 = params.profile.support();
    let mut max_excess = f64::NEG_INFINITY;
    let outcome = loop {
        while next_threshold < settings.thresholds.len() && sup >= settings.thresholds[next_threshold]
        {
            let m = settings.thresholds[next_threshold];
            crossings.push((m, crossing_time(t_prev, state.t, sup_prev, sup, m, p)));
            next_threshold += 1;
        }
        if next_threshold == settings.thresholds.len() {
            break Outcome::BlowUp;
        }
        if state.t >= settings.t_max - 1e-12 {
            break Outcome::TimedOut;
        }
        let mut h = dt;
        if sup > settings.adapt_above {
            h = h.min(settings.adapt_factor * sup.powf(-(p - 1.0) / 2.0));
            recording = false;
        }
        h = h.min(settings.t_max - state.t).max(f64::EPSILON * state.t);
        t_prev = state.t;
        sup_prev = sup;
        match step(&mut state, params, &grid, settings, h) {
            Ok(s) => sup = s,
            Err(Error::NonFinite { .. }) => {
                // overflow inside one step: everything left is crossed at the last good time
                for &m in &settings.thresholds[next_threshold..] {
                    crossings.push((m, t_prev));
                }
                state.t = t_prev;
                break Outcome::BlowUp;
            }
            Err(e) => return Err(e),
        }
        if let Some(k) = stride {
            if recording && state.steps.is_multiple_of(k) {
                record(&state, &mut times, &mut snapshots);
                if settings.mode == SpatialMode::Radial {
                    let excess = state.support_radius(&grid, 1e-14) - (state.t + support0);
                    max_excess = max_excess.max(excess);
                }
            }
        }
    };
    debug!(
        "solve eps = {} ended at t = {} after {} steps ({:?})",
        params.eps, state.t, state.steps, outcome
    );
    Ok(SolveTrace {
        params: *params,
        grid,
        settings: settings.clone(),
        dt_base: dt,
        snapshot_dt: stride.map(|k| k as f64 * dt),
        times,
        snapshots,
        crossings,
        outcome,
        t_end: state.t,
        steps: state.steps,
        max_support_excess: max_excess,
    })
}

/// Extrapolated blow-up time from one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEstimate {
    pub dr: f64,
    pub dt: f64,
    pub t_est: f64,
    pub t_at_threshold: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanEstimate {
    #[serde(rename = "T_est")]
    pub t_est: f64,
    #[serde(rename = "T_at_threshold")]
    pub t_at_threshold: Vec<(f64, f64)>,
    pub dt_used: f64,
    pub converged: bool,
    pub params: ModelParams,
    pub levels: Vec<LevelEstimate>,
}

/// Fits `T(M) = T_est − c·M^{−(p−1)/2}` and returns `T_est`.
pub fn extrapolate_blowup(crossings: &[(f64, f64)], p: f64) -> Result<f64> {
    if crossings.len() < 2 {
        return domain("need at least two threshold crossings to extrapolate");
    }
    let x: Vec<f64> = crossings.iter().map(|(m, _)| m.powf(-(p - 1.0) / 2.0)).collect();
    let y: Vec<f64> = crossings.iter().map(|(_, t)| *t).collect();
    let (_, intercept, _) = linear_fit(&x, &y);
    Ok(intercept)
}

/// How a lifespan estimate refines its grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementPlan {
    /// Base spacing (`dr` for radial runs, `dt` in ODE mode).
    pub spacing: f64,
    pub max_levels: usize,
    pub rel_tol: f64,
}

impl RefinementPlan {
    pub fn new(spacing: f64) -> Self {
        Self {
            spacing,
            max_levels: 4,
            rel_tol: 0.01,
        }
    }
}

fn one_level(params: &ModelParams, settings: &SolverSettings, spacing: f64) -> Result<LevelEstimate> {
    let (grid, run) = match settings.mode {
        SpatialMode::Radial => (
            RadialGrid::with_spacing(spacing, params.radius + settings.t_max)?,
            settings.clone(),
        ),
        SpatialMode::ZeroDim => (
            RadialGrid::point(),
            SolverSettings {
                cfl: spacing,
                ..settings.clone()
            },
        ),
    };
    let trace = solve_until_blowup(params, &grid, &run)?;
    if trace.outcome == Outcome::TimedOut {
        return Err(Error::NoBlowUp { t_max: settings.t_max });
    }
    let t_est = extrapolate_blowup(&trace.crossings, params.p)?;
    Ok(LevelEstimate {
        dr: grid.dr(),
        dt: trace.dt_base,
        t_est,
        t_at_threshold: trace.crossings,
    })
}

/// Threshold-ladder lifespan with spacing halved until two consecutive
/// levels agree to `plan.rel_tol`.
pub fn estimate_lifespan(
    params: &ModelParams,
    settings: &SolverSettings,
    plan: &RefinementPlan,
) -> Result<LifespanEstimate> {
    if settings.mode == SpatialMode::Radial {
        let report = classify(params)?;
        if !report.hypothesis_flags.thm1_ok && !report.hypothesis_flags.thm2_ok {
            warn!(
                "lifespan requested outside both theorem hypotheses (regime {})",
                report.regime
            );
        }
    }
    let mut levels: Vec<LevelEstimate> = Vec::new();
    let mut spacing = plan.spacing;
    let mut converged = false;
    for _ in 0..plan.max_levels.max(2) {
        let level = one_level(params, settings, spacing)?;
        if let Some(prev) = levels.last() {
            if (level.t_est - prev.t_est).abs() <= plan.rel_tol * level.t_est.abs() {
                converged = true;
            }
        }
        levels.push(level);
        if converged {
            break;
        }
        spacing /= 2.0;
    }
    let last = levels.last().expect("at least one level");
    Ok(LifespanEstimate {
        t_est: last.t_est,
        t_at_threshold: last.t_at_threshold.clone(),
        dt_used: last.dt,
        converged,
        params: *params,
        levels,
    })
}

/// Lifespans for each `ε`, computed in parallel and returned in input order.
pub fn lifespan_sweep(
    params: &ModelParams,
    eps: &[f64],
    settings: &SolverSettings,
    plan: &RefinementPlan,
) -> Vec<Result<LifespanEstimate>> {
    eps.par_iter()
        .map(|&e| estimate_lifespan(&params.with_eps(e), settings, plan))
        .collect()
}
