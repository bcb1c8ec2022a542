//! Iteration ledgers for the sub-critical blow-up argument, the critical
//! comparison ODE, and log-log scaling fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exponents::{beta_q, characteristic_roots, gamma, strauss, ModelParams};
use crate::numerics::{ball_volume, linear_fit};

/// Largest ledger length; beyond it `p^j` leaves double range for moderate `p`.
pub const J_MAX_GUARD: usize = 200;

/// Sequences `a_j`, `b_j`, `D_j` and the constants of the slicing argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLedger {
    pub n: usize,
    pub mu1: f64,
    pub mu2sq: f64,
    pub p: f64,
    pub eps: f64,
    pub radius: f64,
    pub r2: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    /// Undefined (NaN) when `γ(p, n+μ₁) ≤ 0`.
    #[serde(rename = "C4")]
    pub c4: f64,
    pub alpha: f64,
    pub beta_led: f64,
    #[serde(rename = "Sp_inf")]
    pub sp_inf: f64,
    pub gamma: f64,
    /// `a_1, …, a_{j_max}`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `log D_1, …, log D_{j_max}`.
    pub log_d: Vec<f64>,
}

pub fn build_ledger(params: &ModelParams, c1: f64, j_max: usize) -> Result<IterationLedger> {
    if j_max > J_MAX_GUARD {
        return Err(Error::OverflowGuard(j_max));
    }
    if j_max == 0 {
        return domain("j_max must be at least 1");
    }
    if !(c1 > 0.0) {
        return domain(format!("C1 = {c1} must be positive"));
    }
    params.validate()?;
    let (_, r2) = characteristic_roots(params.mu1, params.mu2sq)?;
    let n = params.n as f64;
    let (p, mu1, eps) = (params.p, params.mu1, params.eps);

    let c0 = ball_volume(params.n).powf(1.0 - p) * params.radius.powf(-n * (p - 1.0));
    let c2 = c1 / ((n + r2 + 1.0) * (n + r2 + 2.0));
    let alpha = r2 + 1.0 + (n + mu1 - 1.0) * p / 2.0 + n + (r2 + 1.0) / (p - 1.0);
    let beta_led = n + r2 + 2.0 + (r2 + 3.0) / (p - 1.0);
    let c3 = c0 / (beta_led * beta_led);
    let sp_inf = 2.0 * p * p.ln() / (p - 1.0).powi(2) - p * c3.ln() / (p - 1.0);
    let g = gamma(p, n + mu1);
    let c4 = if g > 0.0 {
        ((sp_inf + alpha * 2f64.ln() + 1.0 - c2.ln()) * 2.0 * (p - 1.0) / g).exp()
    } else {
        f64::NAN
    };

    let mut a = vec![r2 + 1.0 + (n + mu1 - 1.0) * p / 2.0];
    let mut b = vec![n + r2 + 2.0];
    let mut log_d = vec![c2.ln() + p * eps.ln()];
    for j in 1..j_max {
        let (aj, bj, dj) = (a[j - 1], b[j - 1], log_d[j - 1]);
        let pb = r2 + p * bj;
        a.push(r2 + 1.0 + n * (p - 1.0) + p * aj);
        b.push(r2 + 3.0 + p * bj);
        log_d.push(c0.ln() + p * dj - ((pb + 2.0) * (pb + 3.0)).ln());
    }
    Ok(IterationLedger {
        n: params.n,
        mu1,
        mu2sq: params.mu2sq,
        p,
        eps,
        radius: params.radius,
        r2,
        c0,
        c1,
        c2,
        c3,
        c4,
        alpha,
        beta_led,
        sp_inf,
        gamma: g,
        a,
        b,
        log_d,
    })
}

impl IterationLedger {
    pub fn log_d1(&self) -> f64 {
        self.log_d[0]
    }

    /// `(a_j, b_j, log of the lower bound p^{j−1}(log D₁ − S_p(∞)))`.
    pub fn closed_forms(&self, j: usize) -> Result<(f64, f64, f64)> {
        if j == 0 {
            return domain("ledger index starts at 1");
        }
        let p = self.p;
        let n = self.n as f64;
        let pj = p.powi(j as i32 - 1);
        let a = self.alpha * pj - (n + (self.r2 + 1.0) / (p - 1.0));
        let b = self.beta_led * pj - (self.r2 + 3.0) / (p - 1.0);
        Ok((a, b, pj * (self.log_d1() - self.sp_inf)))
    }

    /// Exact solution of `log D_{j+1} = log C₃ + p log D_j − 2j log p`.
    pub fn weak_recursion_closed_form(&self, j: usize) -> f64 {
        let p = self.p;
        let pj1 = p.powi(j as i32 - 1);
        let pj = p.powi(j as i32);
        pj1 * self.log_d1() - 2.0 * p.ln() / (p - 1.0) * ((pj - 1.0) / (p - 1.0) - j as f64)
            + self.c3.ln() * (pj1 - 1.0) / (p - 1.0)
    }

    /// First index from which the `p^{j−1}(log D₁ − S_p(∞))` bound is
    /// guaranteed for the weak recursion.
    pub fn lower_bound_start(&self) -> usize {
        let p = self.p;
        let j0 = (p * self.c3.ln() / (2.0 * p.ln()) - 1.0 / (p - 1.0)).floor() + 1.0;
        j0.max(1.0) as usize
    }

    /// `J(t) = log D₁ − S_p(∞) − α log(1+t) + β log(t − T₀)`.
    pub fn j_functional(&self, t: f64, t0: f64) -> f64 {
        self.log_d1() - self.sp_inf - self.alpha * (1.0 + t).ln() + self.beta_led * (t - t0).ln()
    }

    /// Sign conditions on the exponents used when integrating the iteration.
    pub fn sign_conditions_hold(&self) -> Result<bool> {
        let (r1, r2) = characteristic_roots(self.mu1, self.mu2sq)?;
        let n = self.n as f64;
        let head = r1 - r2 - 1.0 - (n + self.mu1 - 1.0) * self.p / 2.0 <= 0.0;
        let tail = self
            .a
            .iter()
            .all(|aj| r1 - r2 - 1.0 - n * (self.p - 1.0) - self.p * aj <= 0.0);
        Ok(head && tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubcriticalBlowup {
    /// `max{T₀ + (e^{S+α log 2+1}/(C₂ε^p))^{2(p−1)/γ}, 2T₀ + 1}`.
    pub time: f64,
    /// `C₄ ε^{−2p(p−1)/γ}`.
    pub bound: f64,
    pub beta_minus_alpha: f64,
    /// `γ/(2(p−1))`.
    pub gamma_ratio: f64,
    /// `J` evaluated at `time`.
    pub j_at_time: f64,
}

pub fn subcritical_blowup_time(ledger: &IterationLedger, t0: f64) -> Result<SubcriticalBlowup> {
    let g = ledger.gamma;
    if !(g > 0.0) {
        return domain(format!("gamma(p, n + mu1) = {g} must be positive"));
    }
    if !(t0 >= 0.0) {
        return domain(format!("T0 = {t0} must be nonnegative"));
    }
    let p = ledger.p;
    let k = 2.0 * (p - 1.0) / g;
    let log_num = ledger.sp_inf + ledger.alpha * 2f64.ln() + 1.0;
    let first = t0 + ((log_num - ledger.log_d1()) * k).exp();
    let time = first.max(2.0 * t0 + 1.0);
    Ok(SubcriticalBlowup {
        time,
        bound: ledger.c4 * ledger.eps.powf(-2.0 * p * (p - 1.0) / g),
        beta_minus_alpha: ledger.beta_led - ledger.alpha,
        gamma_ratio: g / (2.0 * (p - 1.0)),
        j_at_time: ledger.j_functional(time, t0),
    })
}

/// `((n + 1 − β_p)(p − 1)/p, 1 + 1/p)` at `p = p_S(n + μ₁)`.
pub fn critical_exponent_identity(n: usize, mu1: f64) -> Result<(f64, f64)> {
    let p = strauss(n as f64 + mu1)?;
    let lhs = (n as f64 + 1.0 - beta_q(n, mu1, p)) * (p - 1.0) / p;
    Ok((lhs, 1.0 + 1.0 / p))
}

/// Settings of the comparison ODE `J″ = −2J′ + Cτ^{1−p}J^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalOdeSettings {
    #[serde(rename = "C")]
    pub c: f64,
    pub c0: f64,
    /// Freeze the `τ^{1−p}` coefficient at `τ₀`.
    pub frozen: bool,
    /// Keep `J′ ≥ c₀ε^p` by dropping negative accelerations on that boundary.
    pub projected: bool,
    pub blowup_level: f64,
    pub step_tol: f64,
    pub tau_cap: f64,
}

impl Default for CriticalOdeSettings {
    fn default() -> Self {
        Self {
            c: 1.0,
            c0: 1.0,
            frozen: false,
            projected: true,
            blowup_level: 1e12,
            step_tol: 1e-6,
            tau_cap: 1e8,
        }
    }
}

pub const TAU0: f64 = std::f64::consts::LN_2 * 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalOdeRun {
    pub p: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub c0: f64,
    pub eps: f64,
    pub tau0: f64,
    /// Accepted `(τ, J, J′)` triples.
    pub trajectory: Vec<(f64, f64, f64)>,
    pub tau_star: f64,
    /// `exp(τ*) − 2`, the lifespan in the original time.
    pub t_star: f64,
    pub steps: usize,
    /// Lower bounds `J ≥ c₀ε^pτ`, `J′ ≥ c₀ε^p` at every accepted step.
    pub invariants_ok: bool,
}

impl CriticalOdeRun {
    /// Every `k`-th trajectory point plus the last one.
    pub fn downsampled(&self, k: usize) -> Vec<(f64, f64, f64)> {
        let k = k.max(1);
        let mut out: Vec<_> = self.trajectory.iter().step_by(k).copied().collect();
        if let Some(last) = self.trajectory.last() {
            if out.last() != Some(last) {
                out.push(*last);
            }
        }
        out
    }
}

/// Blow-up time from two points of a trajectory with `J ~ (T−τ)^{−2/(p−1)}`.
pub fn extrapolate_tau(a: (f64, f64), b: (f64, f64), p: f64) -> f64 {
    let k = -(p - 1.0) / 2.0;
    let (ya, yb) = (a.1.powf(k), b.1.powf(k));
    if !(ya > yb) {
        return b.0;
    }
    b.0 + yb * (b.0 - a.0) / (ya - yb)
}

pub fn critical_ode_integrate(
    p: f64,
    eps: f64,
    settings: &CriticalOdeSettings,
) -> Result<CriticalOdeRun> {
    let c = settings.c;
    let c0 = settings.c0;
    if !(p > 1.0) || !(c > 0.0) || !(c0 > 0.0) || !(eps > 0.0) {
        return domain(format!(
            "critical ODE needs p > 1, C > 0, c0 > 0, eps > 0; got ({p}, {c}, {c0}, {eps})"
        ));
    }
    let floor = c0 * eps.powf(p);
    let accel = |tau: f64, j: f64, dj: f64| {
        let coef = if settings.frozen { TAU0 } else { tau };
        let a = -2.0 * dj + c * coef.powf(1.0 - p) * j.max(0.0).powf(p);
        if settings.projected && dj <= floor && a < 0.0 {
            0.0
        } else {
            a
        }
    };
    let rk4 = |tau: f64, j: f64, dj: f64, h: f64| {
        let k1 = (dj, accel(tau, j, dj));
        let k2 = (dj + 0.5 * h * k1.1, accel(tau + 0.5 * h, j + 0.5 * h * k1.0, dj + 0.5 * h * k1.1));
        let k3 = (dj + 0.5 * h * k2.1, accel(tau + 0.5 * h, j + 0.5 * h * k2.0, dj + 0.5 * h * k2.1));
        let k4 = (dj + h * k3.1, accel(tau + h, j + h * k3.0, dj + h * k3.1));
        (
            j + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            dj + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    };

    let mut tau = TAU0;
    let mut j = floor * TAU0;
    let mut dj = floor;
    let mut h: f64 = 1e-3;
    let mut trajectory = vec![(tau, j, dj)];
    let mut invariants_ok = true;
    let mut steps = 0usize;
    loop {
        if tau > settings.tau_cap {
            return Err(Error::NoBlowUp { t_max: settings.tau_cap });
        }
        let a = accel(tau, j, dj).abs();
        if a * h * h > settings.step_tol * j {
            h *= 0.5;
            continue;
        }
        let (mut jn, mut djn) = rk4(tau, j, dj, h);
        if !jn.is_finite() || !djn.is_finite() {
            h *= 0.5;
            continue;
        }
        let tn = tau + h;
        if settings.projected {
            djn = djn.max(floor);
            jn = jn.max(floor * tn);
        }
        tau = tn;
        j = jn;
        dj = djn;
        steps += 1;
        invariants_ok &= j >= floor * tau * (1.0 - 1e-12) && dj >= floor * (1.0 - 1e-12);
        trajectory.push((tau, j, dj));
        if j > settings.blowup_level {
            break;
        }
        if accel(tau, j, dj).abs() * h * h < 0.25 * settings.step_tol * j {
            h = (2.0 * h).min(0.05 * tau);
        }
    }
    let m = trajectory.len();
    let (a, b) = (trajectory[m - 2], trajectory[m - 1]);
    let tau_star = extrapolate_tau((a.0, a.1), (b.0, b.1), p);
    Ok(CriticalOdeRun {
        p,
        c,
        c0,
        eps,
        tau0: TAU0,
        trajectory,
        tau_star,
        t_star: tau_star.exp() - 2.0,
        steps,
        invariants_ok,
    })
}

/// Comparison-ODE blow-up times for each `ε`, in input order.
pub fn critical_ode_sweep(
    p: f64,
    eps: &[f64],
    settings: &CriticalOdeSettings,
) -> Vec<Result<CriticalOdeRun>> {
    eps.par_iter()
        .map(|&e| critical_ode_integrate(p, e, settings))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// `log T` against `log ε`.
    Subcritical,
    /// `log log T` against `log ε`.
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_scaling(points: &[(f64, f64)], mode: FitMode) -> Result<ScalingFit> {
    if points.len() < 3 {
        return domain(format!("scaling fit needs at least 3 points, got {}", points.len()));
    }
    for (i, &(e, t)) in points.iter().enumerate() {
        if !(e > 0.0) || !(t > 0.0) {
            return domain(format!("fit point ({e}, {t}) must have eps > 0 and T > 0"));
        }
        if mode == FitMode::Critical && !(t > 1.0) {
            return domain(format!("critical fit needs T > 1, got {t}"));
        }
        if points[..i].iter().any(|&(o, _)| o == e) {
            return domain(format!("duplicate eps = {e} in fit"));
        }
    }
    let x: Vec<f64> = points.iter().map(|(e, _)| e.ln()).collect();
    let y: Vec<f64> = points
        .iter()
        .map(|(_, t)| match mode {
            FitMode::Subcritical => t.ln(),
            FitMode::Critical => t.ln().ln(),
        })
        .collect();
    let (slope, intercept, r_squared) = linear_fit(&x, &y);
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
    })
}
