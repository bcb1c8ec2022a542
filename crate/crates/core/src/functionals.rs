//! Spatial averages of solver traces and the identities and inequalities
//! they satisfy.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::exponents::{characteristic_roots, ModelParams};
use crate::numerics::{cumulative_corrected, cumulative_trapezoid, radial_weights, richardson3};
use crate::solver::{SolveTrace, SpatialMode};
use crate::testfuncs::{phi_fn, CriticalTestFn, SubcriticalTestFn};

/// Relative slack of every inequality check.
pub const SLACK: f64 = 1e-10;
/// Nodes kept beyond the light cone `t + R` when integrating.
pub const CONE_MARGIN_NODES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSeries {
    pub beta: f64,
    pub gb: Vec<f64>,
    pub hb: Vec<f64>,
    pub jb: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalSeries {
    pub times: Vec<f64>,
    /// `∫u dx`.
    pub g: Vec<f64>,
    /// `∫|u|^p dx`.
    pub lp: Vec<f64>,
    /// `∫uψ dx` when a product test function was supplied.
    pub f: Option<Vec<f64>>,
    pub sup: Vec<f64>,
    pub betas: Vec<BetaSeries>,
}

impl FunctionalSeries {
    /// Combine series from spacings `2Δr` and `Δr` as `(4·fine − coarse)/3`,
    /// cancelling the leading `O(Δr²)` error. Samples must share times; the
    /// result is cut to the common prefix and keeps the fine `sup`.
    pub fn richardson(coarse: &Self, fine: &Self) -> Result<Self> {
        let m = coarse.times.len().min(fine.times.len());
        if m == 0 {
            return domain("richardson needs nonempty series");
        }
        if coarse.betas.len() != fine.betas.len() || coarse.f.is_some() != fine.f.is_some() {
            return domain("richardson needs series built from the same test functions");
        }
        if let Some(k) = (0..m).find(|&k| (coarse.times[k] - fine.times[k]).abs() > 1e-9) {
            return domain(format!(
                "sample times differ at index {k}: {} vs {}",
                coarse.times[k], fine.times[k]
            ));
        }
        let mix = |c: &[f64], f: &[f64]| -> Vec<f64> {
            c[..m].iter().zip(&f[..m]).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
        };
        let times = fine.times[..m].to_vec();
        let betas = coarse
            .betas
            .iter()
            .zip(&fine.betas)
            .map(|(c, f)| {
                let gb = mix(&c.gb, &f.gb);
                let hb = h_from_g(&times, &gb);
                let jb = j_from_h(&times, &hb);
                BetaSeries {
                    beta: f.beta,
                    gb,
                    hb,
                    jb,
                }
            })
            .collect();
        Ok(Self {
            g: mix(&coarse.g, &fine.g),
            lp: mix(&coarse.lp, &fine.lp),
            f: match (&coarse.f, &fine.f) {
                (Some(c), Some(f)) => Some(mix(c, f)),
                _ => None,
            },
            sup: fine.sup[..m].to_vec(),
            times,
            betas,
        })
    }
}

fn nonlinearity(u: f64, p: f64, on: bool) -> f64 {
    if on {
        u.abs().powf(p)
    } else {
        0.0
    }
}

/// Index one past the last node inside `r ≤ t + R + margin` (and `r < bound`).
fn cone_end(trace: &SolveTrace, t: f64, bound: f64) -> usize {
    let dr = trace.grid.dr();
    let reach = t + trace.params.profile.support() + CONE_MARGIN_NODES as f64 * dr;
    let nodes = trace.grid.nodes();
    let mut end = ((reach / dr).floor() as usize + 1).min(nodes);
    while end > 0 && trace.grid.r(end - 1) >= bound {
        end -= 1;
    }
    end
}

/// `H(t) = ∫₀^t (t−s)(1+s)G(s) ds` by direct trapezoid at every sample.
pub fn h_from_g(times: &[f64], g: &[f64]) -> Vec<f64> {
    (0..times.len())
        .map(|k| {
            let t = times[k];
            let y: Vec<f64> = (0..=k).map(|j| (t - times[j]) * (1.0 + times[j]) * g[j]).collect();
            *cumulative_trapezoid(&times[..=k], &y).last().unwrap()
        })
        .collect()
}

/// `J(t) = ∫₀^t (2+s)^{−3} H(s) ds`.
pub fn j_from_h(times: &[f64], h: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = times.iter().zip(h).map(|(t, v)| v / (2.0 + t).powi(3)).collect();
    cumulative_trapezoid(times, &y)
}

fn radial_trace(trace: &SolveTrace) -> Result<()> {
    if trace.settings.mode != SpatialMode::Radial {
        return domain("functionals need a radial trace");
    }
    if trace.snapshots.is_empty() {
        return domain("trace has no snapshots");
    }
    Ok(())
}

/// Spatial functionals of every snapshot plus the weighted families `G_β`, `H_β`, `J_β`.
pub fn evaluate(
    trace: &SolveTrace,
    sub: Option<&SubcriticalTestFn>,
    crit: &[CriticalTestFn],
) -> Result<FunctionalSeries> {
    radial_trace(trace)?;
    let params = &trace.params;
    let n = params.n;
    let dr = trace.grid.dr();
    let nodes = trace.grid.nodes();
    let w = radial_weights(n, dr, nodes);
    let on = trace.settings.nonlinear;
    let p = params.p;
    let phi: Option<Vec<f64>> = match sub {
        Some(tf) => Some(
            (0..nodes)
                .map(|i| phi_fn(trace.grid.r(i), tf.n))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };

    let mut g = Vec::with_capacity(trace.times.len());
    let mut lp = Vec::with_capacity(trace.times.len());
    let mut f = phi.as_ref().map(|_| Vec::with_capacity(trace.times.len()));
    let mut sup = Vec::with_capacity(trace.times.len());
    for (k, &t) in trace.times.iter().enumerate() {
        let u = &trace.snapshots[k];
        g.push(u.iter().zip(&w).map(|(u, w)| u * w).sum());
        lp.push(u.iter().zip(&w).map(|(u, w)| nonlinearity(*u, p, true) * w).sum());
        sup.push(trace.sup_at(k));
        if let (Some(phi), Some(f), Some(tf)) = (&phi, f.as_mut(), sub) {
            let end = cone_end(trace, t, f64::INFINITY);
            let s: f64 = (0..end).map(|i| w[i] * u[i] * phi[i]).sum();
            f.push(tf.lambda(t)? * s);
        }
    }

    let mut betas = Vec::with_capacity(crit.len());
    for c in crit {
        let mut gb = Vec::with_capacity(trace.times.len());
        for (k, &t) in trace.times.iter().enumerate() {
            let u = &trace.snapshots[k];
            let end = cone_end(trace, t, 1.0 + t);
            let mut acc = 0.0;
            for i in 0..end {
                let nl = nonlinearity(u[i], p, on);
                if nl != 0.0 {
                    acc += w[i] * nl * c.phi_beta(t, trace.grid.r(i))?;
                }
            }
            gb.push(acc);
        }
        let hb = h_from_g(&trace.times, &gb);
        let jb = j_from_h(&trace.times, &hb);
        betas.push(BetaSeries {
            beta: c.beta,
            gb,
            hb,
            jb,
        });
    }
    Ok(FunctionalSeries {
        times: trace.times.clone(),
        g,
        lp,
        f,
        sup,
        betas,
    })
}

/// Richardson-extrapolated first and second derivatives at sample `k`
/// from centered differences with steps `Δ, 2Δ, 4Δ`; `None` near the ends.
pub fn sample_derivatives(y: &[f64], k: usize, delta: f64) -> Option<(f64, f64)> {
    if k < 4 || k + 4 >= y.len() {
        return None;
    }
    let d1 = |m: usize| (y[k + m] - y[k - m]) / (2.0 * m as f64 * delta);
    let d2 = |m: usize| (y[k + m] - 2.0 * y[k] + y[k - m]) / (m as f64 * delta).powi(2);
    // coarsest step first
    Some((
        richardson3(d1(4), d1(2), d1(1)),
        richardson3(d2(4), d2(2), d2(1)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `‖residual‖₂ / ‖Σ|terms|‖₂` over the checked samples.
    pub rel_l2: f64,
    pub max_abs: f64,
}

/// Residual of `G″ + μ₁/(1+t)G′ + μ₂²/(1+t)²G = ∫N(u)dx` at interior samples
/// with `sup|u| < sup_cap`.
pub fn check_g_dynamics(
    series: &FunctionalSeries,
    trace: &SolveTrace,
    sup_cap: f64,
) -> Result<ResidualReport> {
    let delta = trace
        .snapshot_dt
        .ok_or_else(|| crate::Error::Domain("trace has no snapshot spacing".into()))?;
    let params = &trace.params;
    let on = trace.settings.nonlinear;
    let mut times = Vec::new();
    let mut residuals = Vec::new();
    let (mut num, mut den, mut max_abs) = (0.0, 0.0, 0.0f64);
    for k in 0..series.times.len() {
        if series.sup[k] >= sup_cap {
            break;
        }
        let Some((g1, g2)) = sample_derivatives(&series.g, k, delta) else {
            continue;
        };
        let s = 1.0 + series.times[k];
        let src = if on { series.lp[k] } else { 0.0 };
        let terms = [g2, params.mu1 / s * g1, params.mu2sq / (s * s) * series.g[k], -src];
        let res: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        num += res * res;
        den += scale * scale;
        max_abs = max_abs.max(res.abs());
        times.push(series.times[k]);
        residuals.push(res);
    }
    if times.is_empty() {
        return domain("no interior samples to check");
    }
    let rel_l2 = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    Ok(ResidualReport {
        times,
        residuals,
        rel_l2,
        max_abs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalitySample {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Both sides vanish; the check says nothing.
    pub degenerate: bool,
}

fn degenerate(lhs: f64, rhs: f64, scale: f64) -> bool {
    lhs.abs() <= f64::MIN_POSITIVE.max(SLACK * scale) && rhs.abs() <= f64::MIN_POSITIVE.max(SLACK * scale)
}

/// `G′(t) + r₁/(1+t)G(t) > (1+t)^{−r₂−1}∫₀^t(1+s)^{r₂+1}∫|u|^p dx ds` at
/// interior samples.
pub fn check_key_inequality(
    series: &FunctionalSeries,
    trace: &SolveTrace,
) -> Result<Vec<InequalitySample>> {
    let params = &trace.params;
    let delta = trace
        .snapshot_dt
        .ok_or_else(|| crate::Error::Domain("trace has no snapshot spacing".into()))?;
    let (r1, r2) = characteristic_roots(params.mu1, params.mu2sq)?;
    let on = trace.settings.nonlinear;
    let weighted: Vec<f64> = series
        .times
        .iter()
        .zip(&series.lp)
        .map(|(t, l)| (1.0 + t).powf(r2 + 1.0) * if on { *l } else { 0.0 })
        .collect();
    let integral = cumulative_corrected(&series.times, &weighted);
    let scale = series.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::new();
    for k in 0..series.times.len() {
        let Some((g1, _)) = sample_derivatives(&series.g, k, delta) else {
            continue;
        };
        let s = 1.0 + series.times[k];
        let lhs = g1 + r1 / s * series.g[k];
        let rhs = s.powf(-r2 - 1.0) * integral[k];
        let deg = degenerate(lhs, rhs, scale);
        let holds = !deg && lhs > rhs - SLACK * lhs.abs().max(rhs.abs());
        out.push(InequalitySample {
            t: series.times[k],
            lhs,
            rhs,
            holds,
            degenerate: deg,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrioriReport {
    /// Best constant in `∫|u|^p ≥ C₁ε^p(1+t)^{n−1−(n+μ₁−1)p/2}` on `[T₀, end]`.
    pub c1_fit: f64,
    pub decay_power: f64,
    /// `F(t) ≥ 0` at every sample.
    pub f_nonnegative: bool,
    /// Discrete Hölder split `Lp·(∫ψ^{p′})^{p−1} ≥ |F|^p` at every sample.
    pub holder_ok: bool,
    pub ok: bool,
    pub degenerate: bool,
    pub samples: usize,
}

/// Lower bound on `∫|u|^p` with its two ingredients.
pub fn check_priori_bound(
    trace: &SolveTrace,
    tf: &SubcriticalTestFn,
    t0: f64,
) -> Result<PrioriReport> {
    radial_trace(trace)?;
    let params = &trace.params;
    let n = params.n;
    let p = params.p;
    let q = p / (p - 1.0);
    let nodes = trace.grid.nodes();
    let w = radial_weights(n, trace.grid.dr(), nodes);
    let phi: Vec<f64> = (0..nodes)
        .map(|i| phi_fn(trace.grid.r(i), n))
        .collect::<Result<_>>()?;
    let decay_power = n as f64 - 1.0 - (n as f64 + params.mu1 - 1.0) * p / 2.0;
    let mut c1_fit = f64::INFINITY;
    let (mut f_nonneg, mut holder_ok) = (true, true);
    let mut all_zero = true;
    let mut samples = 0;
    for (k, &t) in trace.times.iter().enumerate() {
        let u = &trace.snapshots[k];
        let end = cone_end(trace, t, f64::INFINITY);
        let lam = tf.lambda(t)?;
        let (mut lp, mut f, mut den) = (0.0, 0.0, 0.0);
        for i in 0..end {
            let psi = lam * phi[i];
            lp += w[i] * u[i].abs().powf(p);
            f += w[i] * u[i] * psi;
            den += w[i] * psi.powf(q);
        }
        if f != 0.0 || lp != 0.0 {
            all_zero = false;
        }
        let fscale = den.powf(1.0 / q) * lp.powf(1.0 / p);
        if f < -SLACK * fscale {
            f_nonneg = false;
        }
        let lhs = lp * den.powf(p - 1.0);
        let rhs = f.abs().powf(p);
        if lhs < rhs * (1.0 - SLACK) {
            holder_ok = false;
        }
        if t >= t0 {
            samples += 1;
            let full: f64 = u.iter().zip(&w).map(|(u, w)| u.abs().powf(p) * w).sum();
            let c = full / (params.eps.powf(p) * (1.0 + t).powf(decay_power));
            c1_fit = c1_fit.min(c);
        }
    }
    if samples == 0 {
        return domain(format!("no samples beyond T0 = {t0}"));
    }
    Ok(PrioriReport {
        c1_fit,
        decay_power,
        f_nonnegative: f_nonneg,
        holder_ok,
        ok: !all_zero && c1_fit > 0.0 && f_nonneg && holder_ok,
        degenerate: all_zero,
        samples,
    })
}

/// `(1+t)²J_β(t) ≤ ½∫₀^t (t−s)²G_β(s) ds` at every sample.
pub fn check_jbeta_lemma(times: &[f64], gb: &[f64], jb: &[f64]) -> Vec<InequalitySample> {
    (0..times.len())
        .map(|k| {
            let t = times[k];
            let y: Vec<f64> = (0..=k).map(|j| (t - times[j]).powi(2) * gb[j]).collect();
            let rhs = 0.5 * cumulative_trapezoid(&times[..=k], &y).last().unwrap();
            let lhs = (1.0 + t).powi(2) * jb[k];
            let deg = lhs == 0.0 && rhs == 0.0;
            InequalitySample {
                t,
                lhs,
                rhs,
                holds: lhs <= rhs + SLACK * lhs.abs().max(rhs.abs()) || deg,
                degenerate: deg,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub beta: f64,
    pub e0: f64,
    pub e1: f64,
    pub times: Vec<f64>,
    /// `|lhs − rhs|` divided by the largest of the five terms.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Both sides of
/// `εE₀ + εE₁t + ∫₀^t(t−s)G_β = ∫uΦ_β dx + ∫₀^t(1+s)^{−β}∫uψ̃_β dx ds`.
pub fn check_fundamental_identity(
    trace: &SolveTrace,
    crit: &CriticalTestFn,
) -> Result<IdentityReport> {
    radial_trace(trace)?;
    let params: &ModelParams = &trace.params;
    let support = params.profile.support();
    if !(support < 1.0) {
        return domain(format!("data support R = {support} must be below 1"));
    }
    let (e0, e1) = crit.data_energies(&params.profile)?;
    let eps = params.eps;
    let n = params.n;
    let nodes = trace.grid.nodes();
    let w = radial_weights(n, trace.grid.dr(), nodes);
    let on = trace.settings.nonlinear;
    let p = params.p;
    let times = &trace.times;
    let m = times.len();
    let (mut gb, mut u_phi, mut u_tilde) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for (k, &t) in times.iter().enumerate() {
        let u = &trace.snapshots[k];
        let s = 1.0 + t;
        let end = cone_end(trace, t, s);
        for i in 0..end {
            if u[i] == 0.0 {
                continue;
            }
            let r = trace.grid.r(i);
            let phi = crit.phi_beta(t, r)?;
            gb[k] += w[i] * nonlinearity(u[i], p, on) * phi;
            u_phi[k] += w[i] * u[i] * phi;
            u_tilde[k] += w[i] * u[i] * crit.psi_tilde((r / s).powi(2))?;
        }
        u_tilde[k] *= s.powf(-crit.beta);
    }
    let tilde_int = cumulative_trapezoid(times, &u_tilde);
    let mut residuals = Vec::with_capacity(m);
    for k in 0..m {
        let t = times[k];
        let y: Vec<f64> = (0..=k).map(|j| (t - times[j]) * gb[j]).collect();
        let memory = *cumulative_trapezoid(&times[..=k], &y).last().unwrap();
        let terms = [eps * e0, eps * e1 * t, memory, u_phi[k], tilde_int[k]];
        let lhs = terms[0] + terms[1] + terms[2];
        let rhs = terms[3] + terms[4];
        let scale = terms.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        residuals.push(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale });
    }
    let max_residual = residuals.iter().fold(0.0f64, |a, v| a.max(*v));
    Ok(IdentityReport {
        beta: crit.beta,
        e0,
        e1,
        times: times.clone(),
        residuals,
        max_residual,
    })
}
