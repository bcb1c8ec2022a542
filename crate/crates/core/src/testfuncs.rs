//! Test functions for the sub-critical and critical blow-up arguments.
//!
//! The sub-critical pair is `ψ(t, x) = λ(t)φ(x)` with a Bessel-K time
//! profile and the exponential-type `Δφ = φ` eigenfunction. The critical
//! family is the self-similar `Φ_β(t, x) = (1+t)^{1−β} ψ_β(|x|²/(1+t)²)` with
//! a Gauss hypergeometric profile.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::exponents::{delta, ModelParams};
use crate::numerics::{
    central_first, central_second, radial_integral, richardson3, sphere_area,
};
use crate::profile::DataProfile;
use crate::specfun::{bessel_i, bessel_k, HypParams};

/// Base step of the Richardson-extrapolated residuals.
pub const FD_STEP: f64 = 0.1;

/// Richardson-extrapolated central second difference at step `h`.
fn second_derivative<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    richardson3(
        central_second(f, x, h),
        central_second(f, x, h / 2.0),
        central_second(f, x, h / 4.0),
    )
}

fn first_derivative<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    richardson3(
        central_first(f, x, h),
        central_first(f, x, h / 2.0),
        central_first(f, x, h / 4.0),
    )
}

/// How derivatives inside a residual are approximated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Differencing {
    /// Plain centered differences at the given step.
    Plain(f64),
    /// Richardson extrapolation over `h`, `h/2`, `h/4` from the given base step.
    Extrapolated(f64),
}

impl Differencing {
    fn d1<F: Fn(f64) -> f64>(self, f: &F, x: f64) -> f64 {
        match self {
            Differencing::Plain(h) => central_first(f, x, h),
            Differencing::Extrapolated(h) => first_derivative(f, x, h),
        }
    }

    fn d2<F: Fn(f64) -> f64>(self, f: &F, x: f64) -> f64 {
        match self {
            Differencing::Plain(h) => central_second(f, x, h),
            Differencing::Extrapolated(h) => second_derivative(f, x, h),
        }
    }

    fn step(self) -> f64 {
        match self {
            Differencing::Plain(h) | Differencing::Extrapolated(h) => h,
        }
    }
}

/// Normalized residual of `(1+t)²λ″ − μ₁(1+t)λ′ + (μ₁ + μ₂² − (1+t)²)λ = 0`
/// for an arbitrary candidate `λ`.
pub fn lambda_ode_residual_of<F: Fn(f64) -> f64>(
    lambda: F,
    t: f64,
    mu1: f64,
    mu2sq: f64,
    diff: Differencing,
) -> f64 {
    let s = 1.0 + t;
    let l = lambda(t);
    let l1 = diff.d1(&lambda, t);
    let l2 = diff.d2(&lambda, t);
    let res = s * s * l2 - mu1 * s * l1 + (mu1 + mu2sq - s * s) * l;
    (res / (s * s * l)).abs()
}

/// The product test function `λ(t)φ(x)` used when `1 < p < p_S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubcriticalTestFn {
    pub n: usize,
    pub mu1: f64,
    pub mu2sq: f64,
    pub delta: f64,
}

impl SubcriticalTestFn {
    pub fn new(n: usize, mu1: f64, mu2sq: f64) -> Result<Self> {
        let d = delta(mu1, mu2sq);
        if d < 0.0 {
            return domain(format!("delta = {d} < 0"));
        }
        if n == 0 {
            return domain("n must be at least 1");
        }
        Ok(Self {
            n,
            mu1,
            mu2sq,
            delta: d,
        })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        Self::new(params.n, params.mu1, params.mu2sq)
    }

    /// Bessel order `√δ/2`.
    pub fn order(&self) -> f64 {
        self.delta.sqrt() / 2.0
    }

    /// `r₁ = (μ₁ − 1 − √δ)/2`.
    pub fn r1(&self) -> f64 {
        (self.mu1 - 1.0 - self.delta.sqrt()) / 2.0
    }

    /// `λ(t) = (1+t)^{(μ₁+1)/2} K_{√δ/2}(1+t)`.
    pub fn lambda(&self, t: f64) -> Result<f64> {
        lambda_fn(t, self.mu1, self.delta)
    }

    pub fn lambda_prime(&self, t: f64) -> Result<f64> {
        lambda_prime(t, self.mu1, self.delta)
    }

    pub fn lambda_ode_residual(&self, t: f64) -> Result<f64> {
        self.lambda_ode_residual_with(t, Differencing::Extrapolated(FD_STEP))
    }

    pub fn lambda_ode_residual_with(&self, t: f64, diff: Differencing) -> Result<f64> {
        if !(1.0 + t - diff.step() > 0.0) {
            return domain(format!("t = {t} too close to -1 for step {}", diff.step()));
        }
        // surface quadrature failures before differencing
        self.lambda(t)?;
        let f = |s: f64| self.lambda(s).unwrap_or(f64::NAN);
        Ok(lambda_ode_residual_of(f, t, self.mu1, self.mu2sq, diff))
    }

    pub fn phi(&self, r: f64) -> Result<f64> {
        phi_fn(r, self.n)
    }

    pub fn psi(&self, t: f64, r: f64) -> Result<f64> {
        Ok(self.lambda(t)? * self.phi(r)?)
    }

    pub fn phi_radial_laplace_residual(&self, r: f64) -> Result<f64> {
        phi_radial_laplace_residual(r, self.n)
    }

    /// `∫ (gλ(0) + (μ₁λ(0) − λ′(0))f) φ dx`; requires the sign condition
    /// `f ≥ 0`, `g + r₁f ≥ 0`.
    pub fn c_fg(&self, data: &DataProfile) -> Result<f64> {
        let support = data.support();
        let r1 = self.r1();
        let scale = (0..=SIGN_SAMPLES)
            .map(|i| {
                let r = support * i as f64 / SIGN_SAMPLES as f64;
                data.f.eval(r).abs() + data.g.eval(r).abs()
            })
            .fold(0.0, f64::max);
        for i in 0..=SIGN_SAMPLES {
            let r = support * i as f64 / SIGN_SAMPLES as f64;
            let (f, g) = (data.f.eval(r), data.g.eval(r));
            if f < 0.0 || g + r1 * f < -1e-12 * scale {
                return domain(format!(
                    "data violate f >= 0, g + r1 f >= 0 at r = {r} (f = {f}, g = {g}, r1 = {r1})"
                ));
            }
        }
        if support == 0.0 {
            return Ok(0.0);
        }
        let l0 = self.lambda(0.0)?;
        let cf = self.mu1 * l0 - self.lambda_prime(0.0)?;
        let integrand = |r: f64| {
            (data.g.eval(r) * l0 + cf * data.f.eval(r)) * phi_fn(r, self.n).unwrap_or(f64::NAN)
        };
        radial_integral(self.n, support, integrand)
    }
}

const SIGN_SAMPLES: usize = 2000;

pub fn lambda_fn(t: f64, mu1: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return domain(format!("delta = {delta} < 0"));
    }
    let s = 1.0 + t;
    Ok(s.powf((mu1 + 1.0) / 2.0) * bessel_k(delta.sqrt() / 2.0, s)?)
}

/// Closed-form `λ′(t)` from the Bessel derivative identity.
pub fn lambda_prime(t: f64, mu1: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return domain(format!("delta = {delta} < 0"));
    }
    let s = 1.0 + t;
    let nu = delta.sqrt() / 2.0;
    Ok((mu1 + 1.0 + delta.sqrt()) / 2.0 * s.powf((mu1 - 1.0) / 2.0) * bessel_k(nu, s)?
        - s.powf((mu1 + 1.0) / 2.0) * bessel_k(nu + 1.0, s)?)
}

/// Radial profile of `∫_{S^{n−1}} e^{x·ω} dω`, which satisfies `Δφ = φ`.
pub fn phi_fn(r: f64, n: usize) -> Result<f64> {
    if !(r >= 0.0) {
        return domain(format!("phi needs r >= 0, got {r}"));
    }
    if n == 1 {
        return Ok(r.exp() + (-r).exp());
    }
    if r == 0.0 {
        return Ok(sphere_area(n));
    }
    let h = n as f64 / 2.0;
    Ok((2.0 * std::f64::consts::PI).powf(h) * r.powf(1.0 - h) * bessel_i(h - 1.0, r)?)
}

pub fn phi_radial_laplace_residual(r: f64, n: usize) -> Result<f64> {
    phi_radial_laplace_residual_with(r, n, Differencing::Extrapolated((FD_STEP).min(r / 2.0)))
}

pub fn phi_radial_laplace_residual_with(r: f64, n: usize, diff: Differencing) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("Laplace residual needs r > 0, got {r}"));
    }
    let phi = phi_fn(r, n)?;
    // even extension keeps the stencil valid near the axis
    let f = |s: f64| phi_fn(s.abs(), n).unwrap_or(f64::NAN);
    let lap = diff.d2(&f, r) + (n as f64 - 1.0) / r * diff.d1(&f, r);
    Ok(((lap - phi) / phi).abs())
}

/// Calibrated bound `∫_{|x| ≤ t+R} ψ^{p′} dx ≤ C(1+t)^{…} e^{p′(t+R)} K^{p′}(1+t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiNormBound {
    pub tf: SubcriticalTestFn,
    pub p: f64,
    pub radius: f64,
    /// Constant fixed so that the bound is tight at `t = 1`.
    pub constant: f64,
}

impl PsiNormBound {
    pub const CALIBRATION_TIME: f64 = 1.0;

    pub fn calibrate(tf: SubcriticalTestFn, p: f64, radius: f64) -> Result<Self> {
        if !(p > 1.0) || !(radius > 0.0) {
            return domain("psi norm bound needs p > 1 and R > 0");
        }
        let mut out = Self {
            tf,
            p,
            radius,
            constant: 1.0,
        };
        let t = Self::CALIBRATION_TIME;
        out.constant = out.lhs(t)? / out.shape(t)?;
        Ok(out)
    }

    fn conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `∫_{|x| ≤ t+R} ψ(t,x)^{p′} dx` by radial quadrature.
    pub fn lhs(&self, t: f64) -> Result<f64> {
        let q = self.conj();
        let lam = self.tf.lambda(t)?;
        let n = self.tf.n;
        let inner = radial_integral(n, t + self.radius, |r| {
            phi_fn(r, n).unwrap_or(f64::NAN).powf(q)
        })?;
        Ok(lam.powf(q) * inner)
    }

    fn shape(&self, t: f64) -> Result<f64> {
        let q = self.conj();
        let n = self.tf.n as f64;
        let s = 1.0 + t;
        let power = n - 1.0 + ((self.tf.mu1 + 1.0) / 2.0 - (n - 1.0) / 2.0) * q;
        let k = bessel_k(self.tf.order(), s)?;
        Ok((power * s.ln() + q * (t + self.radius) + q * k.ln()).exp())
    }

    pub fn rhs(&self, t: f64) -> Result<f64> {
        Ok(self.constant * self.shape(t)?)
    }

    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.lhs(t)?, self.rhs(t)?))
    }
}

/// `(lhs, rhs)` of the `L^{p′}` bound on `ψ`, calibrated at `t = 1`.
pub fn psi_lp_norm_bound(t: f64, tf: SubcriticalTestFn, p: f64, radius: f64) -> Result<(f64, f64)> {
    PsiNormBound::calibrate(tf, p, radius)?.eval(t)
}

/// The self-similar family `Φ_β` used when `p = p_S(n + μ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalTestFn {
    pub n: usize,
    pub mu1: f64,
    pub mu2sq: f64,
    pub delta: f64,
    pub beta: f64,
    pub hyp: HypParams,
}

/// Open interval `((√δ − μ₁ + 1)/2, (n − μ₁ + 1)/2)` of admissible weights.
pub fn admissible_interval(n: usize, mu1: f64, mu2sq: f64) -> Result<(f64, f64)> {
    let d = delta(mu1, mu2sq);
    if d < 0.0 {
        return domain(format!("delta = {d} < 0"));
    }
    Ok(((d.sqrt() - mu1 + 1.0) / 2.0, (n as f64 - mu1 + 1.0) / 2.0))
}

impl CriticalTestFn {
    /// Checked constructor: needs `δ < n²` and `β` strictly inside the
    /// admissible interval.
    pub fn new(n: usize, mu1: f64, mu2sq: f64, beta: f64) -> Result<Self> {
        let d = delta(mu1, mu2sq);
        let nn = (n as f64).powi(2);
        if !(d < nn) {
            return domain(format!("delta = {d} must be below n^2 = {nn}"));
        }
        let (lo, hi) = admissible_interval(n, mu1, mu2sq)?;
        if !(beta > lo && beta < hi) {
            return domain(format!("beta = {beta} outside ({lo}, {hi})"));
        }
        Self::unrestricted(n, mu1, mu2sq, beta)
    }

    /// Any real `β`; the adjoint equation holds for all of them, only the
    /// asymptotic bounds need admissibility.
    pub fn unrestricted(n: usize, mu1: f64, mu2sq: f64, beta: f64) -> Result<Self> {
        let hyp = HypParams::from_beta(beta, n, mu1, mu2sq)?;
        Ok(Self {
            n,
            mu1,
            mu2sq,
            delta: delta(mu1, mu2sq),
            beta,
            hyp,
        })
    }

    pub fn psi(&self, z: f64) -> Result<f64> {
        self.hyp.eval(z)
    }

    pub fn psi_prime(&self, z: f64) -> Result<f64> {
        self.hyp.eval_prime(z)
    }

    /// `(2β + μ₁ − 2)ψ_β(z) + 4zψ′_β(z)`.
    pub fn psi_tilde(&self, z: f64) -> Result<f64> {
        let head = (2.0 * self.beta + self.mu1 - 2.0) * self.psi(z)?;
        if z == 0.0 {
            return Ok(head);
        }
        Ok(head + 4.0 * z * self.psi_prime(z)?)
    }

    pub fn phi_beta(&self, t: f64, r: f64) -> Result<f64> {
        let s = 1.0 + t;
        if !(r.abs() < s) {
            return domain(format!("(t, r) = ({t}, {r}) outside r < 1 + t"));
        }
        Ok(s.powf(1.0 - self.beta) * self.psi((r / s).powi(2))?)
    }

    /// Normalized residual of `∂²_tΦ − ΔΦ − ∂_t(μ₁Φ/(1+t)) + μ₂²Φ/(1+t)²`.
    pub fn adjoint_residual(&self, t: f64, r: f64) -> Result<f64> {
        let h = FD_STEP.min(0.1 * (1.0 + t - r.abs()));
        self.adjoint_residual_with(t, r, Differencing::Extrapolated(h))
    }

    pub fn adjoint_residual_with(&self, t: f64, r: f64, diff: Differencing) -> Result<f64> {
        let h = diff.step();
        let s = 1.0 + t;
        if !(r.abs() + 2.0 * h < s - h) || !(r >= 0.0) {
            return domain(format!("(t, r) = ({t}, {r}) too close to the cone for step {h}"));
        }
        let phi = self.phi_beta(t, r)?;
        let in_t = |tt: f64| self.phi_beta(tt, r).unwrap_or(f64::NAN);
        let in_r = |rr: f64| self.phi_beta(t, rr).unwrap_or(f64::NAN);
        let phi_tt = diff.d2(&in_t, t);
        let phi_t = diff.d1(&in_t, t);
        let phi_rr = diff.d2(&in_r, r);
        let lap = if r == 0.0 {
            self.n as f64 * phi_rr
        } else {
            phi_rr + (self.n as f64 - 1.0) / r * diff.d1(&in_r, r)
        };
        let damp = self.mu1 * (phi_t / s - phi / (s * s));
        let res = phi_tt - lap - damp + self.mu2sq * phi / (s * s);
        Ok((res / (phi / (s * s))).abs())
    }

    /// Normalized residual of the hypergeometric equation satisfied by `ψ_β`.
    pub fn hyp_ode_residual(&self, z: f64) -> Result<f64> {
        self.hyp_ode_residual_with(z, Differencing::Extrapolated(0.02))
    }

    pub fn hyp_ode_residual_with(&self, z: f64, diff: Differencing) -> Result<f64> {
        let h = diff.step();
        if !(z + h < 1.0) || !(z - h > -1.0) {
            return domain(format!("z = {z} too close to the unit circle for step {h}"));
        }
        let psi = self.psi(z)?;
        let f = |x: f64| self.psi(x).unwrap_or(f64::NAN);
        let d1 = diff.d1(&f, z);
        let d2 = diff.d2(&f, z);
        let c = self.n as f64 / 2.0;
        let s = self.beta + 0.5 + self.mu1 / 2.0;
        let q = (self.beta * (self.beta + self.mu1 - 1.0) + self.mu2sq) / 4.0;
        let terms = [z * (1.0 - z) * d2, (c - s * z) * d1, -q * psi];
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        Ok((terms.iter().sum::<f64>() / scale).abs())
    }

    /// `(E₀, E₁)`: the weighted masses of the data against `ψ_β(|x|²)`.
    pub fn data_energies(&self, data: &DataProfile) -> Result<(f64, f64)> {
        let support = data.support();
        if !(support < 1.0) {
            return domain(format!("data support R = {support} must be below 1"));
        }
        if self.beta < 1.0 - self.mu1 - 1e-12 {
            return domain(format!("beta = {} below 1 - mu1", self.beta));
        }
        if support == 0.0 {
            return Ok((0.0, 0.0));
        }
        let n = self.n;
        let w = self.beta - 1.0 + self.mu1;
        let e0 = radial_integral(n, support, |r| {
            data.f.eval(r) * self.psi(r * r).unwrap_or(f64::NAN)
        })?;
        let e1 = radial_integral(n, support, |r| {
            let z = r * r;
            let psi = self.psi(z).unwrap_or(f64::NAN);
            let dpsi = self.psi_prime(z).unwrap_or(f64::NAN);
            data.g.eval(r) * psi + data.f.eval(r) * (w * psi + 2.0 * z * dpsi)
        })?;
        Ok((e0, e1))
    }
}
