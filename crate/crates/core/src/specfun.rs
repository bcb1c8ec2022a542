//! Modified Bessel functions, the Gauss hypergeometric series and the
//! Pochhammer symbol, all in double precision.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{gamma, GaussLegendre};

/// Rising factorial `(m)_k`.
pub fn pochhammer(m: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (m + j as f64))
}

const K_REL_TOL: f64 = 1e-12;
const K_START_PANELS: usize = 4;
const K_MAX_PANELS: usize = 1 << 14;

/// `e^t K_ν(t)`; keeps the integrand O(1) for large `t`.
fn bessel_k_scaled(nu: f64, t: f64) -> Result<f64> {
    let z_max = (1.0 + 40.0 / t + 20.0 * nu.abs() / t).acosh();
    // cosh z - 1 = 2 sinh²(z/2) avoids cancellation near the peak
    let integrand = |z: f64| {
        let s = (0.5 * z).sinh();
        (-2.0 * t * s * s).exp() * (nu * z).cosh()
    };
    let rule = GaussLegendre::g16();
    let mut panels = K_START_PANELS;
    let mut prev = rule.integrate(integrand, 0.0, z_max, panels);
    while panels < K_MAX_PANELS {
        panels *= 2;
        let next = rule.integrate(integrand, 0.0, z_max, panels);
        if (next - prev).abs() <= K_REL_TOL * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy(format!(
        "K_{nu}({t}) quadrature did not settle with {panels} panels"
    )))
}

/// Modified Bessel function of the second kind, `∫₀^∞ e^{−t cosh z} cosh(νz) dz`.
pub fn bessel_k(nu: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("K_nu needs t > 0, got {t}"));
    }
    Ok(bessel_k_scaled(nu, t)? * (-t).exp())
}

/// `K_ν′(t) = −K_{ν+1}(t) + (ν/t)K_ν(t)`.
pub fn bessel_k_prime(nu: f64, t: f64) -> Result<f64> {
    Ok(-bessel_k(nu + 1.0, t)? + nu / t * bessel_k(nu, t)?)
}

/// Modified Bessel function of the first kind from its ascending series.
pub fn bessel_i(nu: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !(nu >= 0.0) {
        return domain(format!("I_nu needs t >= 0 and nu >= 0, got nu = {nu}, t = {t}"));
    }
    if t == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    let half = 0.5 * t;
    let q = half * half;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for k in 0..2000 {
        let k = k as f64;
        term *= q / ((k + 1.0) * (k + 1.0 + nu));
        sum += term;
        if term < 1e-17 * sum {
            return Ok(sum);
        }
    }
    Err(Error::Accuracy(format!("I_{nu}({t}) series did not converge")))
}

/// Maximum number of terms summed by [`hyp2f1`].
pub const HYP_TERM_CAP: usize = 1_000_000;

/// Gauss hypergeometric function `₂F₁(a, b; c; z)` by direct summation.
///
/// Accepts `|z| < 1`; the negative side is only used by centered
/// differences around the origin.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return domain(format!("2F1 series needs |z| < 1, got {z}"));
    }
    if c <= 0.0 && c == c.floor() {
        return domain(format!("2F1 needs c not a nonpositive integer, got {c}"));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut quiet = 0;
    for k in 0..HYP_TERM_CAP {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        if term == 0.0 {
            return Ok(sum);
        }
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            quiet += 1;
            if quiet == 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Accuracy(format!(
        "2F1({a}, {b}; {c}; {z}) hit the {HYP_TERM_CAP}-term cap"
    )))
}

/// `d/dz ₂F₁(a, b; c; z) = (ab/c)·₂F₁(a+1, b+1; c+1; z)`.
pub fn hyp2f1_prime(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    Ok(a * b / c * hyp2f1(a + 1.0, b + 1.0, c + 1.0, z)?)
}

/// Parameters `(a, b, c)` of the hypergeometric profile attached to a weight `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HypParams {
    /// `a, b = β/2 + (μ₁−1)/4 ± √δ/4`, `c = n/2`.
    pub fn from_beta(beta: f64, n: usize, mu1: f64, mu2sq: f64) -> Result<Self> {
        let d = crate::exponents::delta(mu1, mu2sq);
        if d < 0.0 {
            return domain(format!("delta = {d} < 0"));
        }
        if n == 0 {
            return domain("n must be at least 1");
        }
        let base = beta / 2.0 + (mu1 - 1.0) / 4.0;
        let s = d.sqrt() / 4.0;
        Ok(Self {
            a: base + s,
            b: base - s,
            c: n as f64 / 2.0,
        })
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        hyp2f1(self.a, self.b, self.c, z)
    }

    pub fn eval_prime(&self, z: f64) -> Result<f64> {
        hyp2f1_prime(self.a, self.b, self.c, z)
    }
}
