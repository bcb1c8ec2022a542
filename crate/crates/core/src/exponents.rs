//! Exponents, characteristic roots and admissibility conditions.
//!
//! Everything in this module is a pure function of the model tuple; no
//! quadrature or series is involved.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{domain, Result};
use crate::profile::DataProfile;

/// Tolerance used when deciding whether `p` sits on the Strauss exponent.
pub const CRITICAL_TOL: f64 = 1e-9;

/// The problem tuple `(n, μ₁, μ₂², p, ε, R, data)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub mu1: f64,
    pub mu2sq: f64,
    pub p: f64,
    pub eps: f64,
    /// Support radius `R` of the data.
    pub radius: f64,
    pub profile: DataProfile,
}

impl ModelParams {
    /// Parameters with unit quartic bumps for both `f` and `g`.
    pub fn new(n: usize, mu1: f64, mu2sq: f64, p: f64, eps: f64, radius: f64) -> Self {
        Self {
            n,
            mu1,
            mu2sq,
            p,
            eps,
            radius,
            profile: DataProfile::bumps(1.0, 1.0, radius),
        }
    }

    pub fn with_profile(mut self, profile: DataProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return domain("n must be at least 1");
        }
        if !(self.mu1 >= 0.0) {
            return domain(format!("mu1 = {} must be nonnegative", self.mu1));
        }
        if !(self.mu2sq >= 0.0) {
            return domain(format!("mu2sq = {} must be nonnegative", self.mu2sq));
        }
        if !(self.p > 1.0) {
            return domain(format!("p = {} must exceed 1", self.p));
        }
        if !(self.eps > 0.0) {
            return domain(format!("eps = {} must be positive", self.eps));
        }
        if !(self.radius > 0.0) {
            return domain(format!("R = {} must be positive", self.radius));
        }
        if self.profile.support() > self.radius * (1.0 + 1e-12) {
            return domain("data profile support exceeds R");
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        delta(self.mu1, self.mu2sq)
    }

    /// Effective dimension `n + μ₁` entering the Strauss exponent.
    pub fn strauss_dimension(&self) -> f64 {
        self.n as f64 + self.mu1
    }
}

/// `δ = (μ₁ − 1)² − 4μ₂²`.
pub fn delta(mu1: f64, mu2sq: f64) -> f64 {
    (mu1 - 1.0).powi(2) - 4.0 * mu2sq
}

/// `γ(p, r) = 2 + (r + 1)p − (r − 1)p²`.
pub fn gamma(p: f64, r: f64) -> f64 {
    2.0 + (r + 1.0) * p - (r - 1.0) * p * p
}

/// Strauss exponent: the positive root of `γ(·, r)`, defined for `r > 1`.
pub fn strauss(r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return domain(format!("Strauss exponent needs r > 1, got {r}"));
    }
    let disc = (r + 1.0).powi(2) + 8.0 * (r - 1.0);
    Ok(((r + 1.0) + disc.sqrt()) / (2.0 * (r - 1.0)))
}

/// Fujita exponent `1 + 2/n` for a real (possibly shifted) dimension.
pub fn fujita(n_eff: f64) -> Result<f64> {
    if !(n_eff > 0.0) {
        return domain(format!("Fujita exponent needs a positive dimension, got {n_eff}"));
    }
    Ok(1.0 + 2.0 / n_eff)
}

/// `μ* = (n² + n + 2)/(n + 2)`, the damping at which `p_F(n) = p_S(n + μ*)`.
pub fn mu_star(n: usize) -> f64 {
    let n = n as f64;
    (n * n + n + 2.0) / (n + 2.0)
}

/// Roots `r₁ ≤ r₂` of `r² − (μ₁ − 1)r + μ₂² = 0`.
pub fn characteristic_roots(mu1: f64, mu2sq: f64) -> Result<(f64, f64)> {
    let d = delta(mu1, mu2sq);
    if d < 0.0 {
        return domain(format!("delta = {d} < 0: characteristic roots are complex"));
    }
    let s = d.sqrt();
    Ok(((mu1 - 1.0 - s) / 2.0, (mu1 - 1.0 + s) / 2.0))
}

/// `β_q = (n − μ₁ + 1)/2 − 1/q`.
pub fn beta_q(n: usize, mu1: f64, q: f64) -> f64 {
    (n as f64 - mu1 + 1.0) / 2.0 - 1.0 / q
}

/// Regime label for a parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ParabolicLike,
    WaveLikeSubcritical,
    WaveLikeCritical,
    SupercriticalUntreated,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::ParabolicLike => "parabolic-like",
            Regime::WaveLikeSubcritical => "wave-like-subcritical",
            Regime::WaveLikeCritical => "wave-like-critical",
            Regime::SupercriticalUntreated => "supercritical-untreated",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    /// `δ ≥ 0` and `1 < p < p_S(n + μ₁)`.
    pub thm1_ok: bool,
    /// `0 ≤ δ < n²`, `p = p_S(n + μ₁)` and `p > 2/(n − √δ)`.
    pub thm2_ok: bool,
    /// `β_p > (√δ − μ₁ + 1)/2`.
    pub beta_p_admissible: bool,
    /// `β_p ≥ 1 − μ₁`.
    pub beta_p_geq: bool,
}

fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub delta: f64,
    /// `p_S(n + μ₁)`; `+∞` when `n + μ₁ ≤ 1`.
    #[serde(rename = "pS", serialize_with = "ser_extended")]
    pub p_s: f64,
    /// `p_F(n + r₁)`; `+∞` when the shifted dimension vanishes.
    #[serde(rename = "pF_shifted", serialize_with = "ser_extended")]
    pub pf_shifted: f64,
    pub gamma: f64,
    pub r1: f64,
    pub r2: f64,
    pub beta_p: f64,
    pub regime: Regime,
    pub hypothesis_flags: HypothesisFlags,
}

/// `p_S(n + μ₁)`, or `+∞` when the effective dimension does not exceed 1.
pub fn strauss_or_infinity(r: f64) -> f64 {
    strauss(r).unwrap_or(f64::INFINITY)
}

pub fn classify(params: &ModelParams) -> Result<ExponentReport> {
    params.validate()?;
    let d = params.delta();
    let (r1, r2) = characteristic_roots(params.mu1, params.mu2sq)?;
    let n = params.n as f64;
    let p = params.p;
    let sd = d.sqrt();
    let r_eff = params.strauss_dimension();
    let p_s = strauss_or_infinity(r_eff);
    let pf_shifted = fujita(n + r1).unwrap_or(f64::INFINITY);
    let g = gamma(p, r_eff);
    let beta_p = beta_q(params.n, params.mu1, p);

    let subcritical = p > 1.0 && p < p_s;
    let on_strauss = p_s.is_finite() && (p - p_s).abs() <= CRITICAL_TOL;
    let above_technical = n > sd && p > 2.0 / (n - sd);
    let critical = d < n * n && on_strauss && above_technical;

    let regime = if d >= (n + 1.0).powi(2) {
        Regime::ParabolicLike
    } else if subcritical {
        Regime::WaveLikeSubcritical
    } else if critical {
        Regime::WaveLikeCritical
    } else {
        Regime::SupercriticalUntreated
    };

    Ok(ExponentReport {
        delta: d,
        p_s,
        pf_shifted,
        gamma: g,
        r1,
        r2,
        beta_p,
        regime,
        hypothesis_flags: HypothesisFlags {
            thm1_ok: subcritical,
            thm2_ok: critical,
            beta_p_admissible: beta_p > (sd - params.mu1 + 1.0) / 2.0,
            beta_p_geq: beta_p >= 1.0 - params.mu1,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifespanCase {
    Subcritical,
    Critical,
}

/// Upper lifespan bound `Cε^{−2p(p−1)/γ}` (sub-critical) or `exp(Cε^{−p(p−1)})` (critical).
pub fn lifespan_bound(params: &ModelParams, c: f64, case: LifespanCase) -> Result<f64> {
    if !(c > 0.0) {
        return domain(format!("constant C = {c} must be positive"));
    }
    let report = classify(params)?;
    let p = params.p;
    match case {
        LifespanCase::Subcritical => {
            if !report.hypothesis_flags.thm1_ok {
                return domain("sub-critical bound needs delta >= 0 and 1 < p < p_S(n + mu1)");
            }
            Ok(c * params.eps.powf(-2.0 * p * (p - 1.0) / report.gamma))
        }
        LifespanCase::Critical => {
            if !report.hypothesis_flags.thm2_ok {
                return domain(
                    "critical bound needs 0 <= delta < n^2, p = p_S(n + mu1) and p > 2/(n - sqrt(delta))",
                );
            }
            Ok((c * params.eps.powf(-p * (p - 1.0))).exp())
        }
    }
}

/// Exponent of `ε` in the sub-critical bound, `−2p(p−1)/γ(p, n+μ₁)`.
pub fn subcritical_rate(params: &ModelParams) -> f64 {
    let p = params.p;
    -2.0 * p * (p - 1.0) / gamma(p, params.strauss_dimension())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delta_examples() {
        assert_eq!(delta(1.0, 0.0), 0.0);
        assert_eq!(delta(0.0, 0.0), 1.0);
        assert_eq!(delta(3.0, 0.0), 4.0);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(2.0, 4.0), 0.0);
        for r in [0.3, 2.0, 7.5] {
            assert!((gamma(1.0, r) - 4.0).abs() < 1e-14);
        }
        assert!(gamma(1.0 + 2f64.sqrt(), 3.0).abs() < 1e-12);
    }

    #[test]
    fn strauss_examples() {
        assert!((strauss(3.0).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-14);
        assert!((strauss(4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(strauss(1.0).is_err());
        assert!(strauss(0.5).is_err());
    }

    #[test]
    fn fujita_and_mu_star() {
        assert_eq!(fujita(1.0).unwrap(), 3.0);
        assert_eq!(fujita(2.0).unwrap(), 2.0);
        assert_eq!(fujita(4.0).unwrap(), 1.5);
        assert!(fujita(0.0).is_err());
        assert_eq!(mu_star(2), 2.0);
        assert!((mu_star(1) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(strauss(2.0 + mu_star(2)).unwrap(), fujita(2.0).unwrap());
    }

    #[test]
    fn roots_examples() {
        assert_eq!(characteristic_roots(3.0, 0.0).unwrap(), (0.0, 2.0));
        assert_eq!(characteristic_roots(1.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(characteristic_roots(0.0, 0.0).unwrap(), (-1.0, 0.0));
        assert!(characteristic_roots(1.0, 0.5).is_err());
    }

    #[test]
    fn beta_q_examples() {
        assert_eq!(beta_q(3, 0.0, 2.0), 1.5);
        assert_eq!(beta_q(1, 1.0, 2.0), 0.0);
        assert!((beta_q(2, 0.5, 1e15) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn classify_examples() {
        let r = classify(&ModelParams::new(1, 2.0, 0.0, 2.0, 0.1, 1.0)).unwrap();
        assert_eq!(r.regime, Regime::WaveLikeSubcritical);
        assert_eq!(r.delta, 1.0);
        assert!((r.p_s - (1.0 + 2f64.sqrt())).abs() < 1e-14);
        assert!(r.hypothesis_flags.thm1_ok);
        assert_eq!(r.gamma, 2.0);

        let r = classify(&ModelParams::new(3, 0.0, 0.0, 3.0, 0.1, 1.0)).unwrap();
        assert_ne!(r.regime, Regime::ParabolicLike);
        assert_eq!(r.regime, Regime::SupercriticalUntreated);

        let r = classify(&ModelParams::new(1, 6.0, 0.0, 2.0, 0.1, 1.0)).unwrap();
        assert_eq!(r.delta, 25.0);
        assert_eq!(r.regime, Regime::ParabolicLike);
    }

    #[test]
    fn classify_critical_and_flags() {
        // n = 3, mu1 = 1: delta = 0, p_S(4) = 2
        let r = classify(&ModelParams::new(3, 1.0, 0.0, 2.0, 0.1, 0.5)).unwrap();
        assert_eq!(r.regime, Regime::WaveLikeCritical);
        assert!(r.hypothesis_flags.thm2_ok);
        assert!(r.hypothesis_flags.beta_p_admissible);
        assert!(r.hypothesis_flags.beta_p_geq);
        // within tolerance
        let r = classify(&ModelParams::new(3, 1.0, 0.0, 2.0 + 5e-10, 0.1, 0.5)).unwrap();
        assert_eq!(r.regime, Regime::WaveLikeCritical);
        // n = 2, mu1 = 2: p_S(4) = 2 but p > 2/(n - 1) fails
        let r = classify(&ModelParams::new(2, 2.0, 0.0, 2.0, 0.1, 0.5)).unwrap();
        assert!(!r.hypothesis_flags.thm2_ok);
        assert!(!r.hypothesis_flags.beta_p_admissible);
    }

    #[test]
    fn classify_rejects_bad_params() {
        assert!(classify(&ModelParams::new(1, 1.0, 1.0, 2.0, 0.1, 1.0)).is_err());
        assert!(classify(&ModelParams::new(1, 1.0, 0.0, 1.0, 0.1, 1.0)).is_err());
        assert!(classify(&ModelParams::new(1, 1.0, 0.0, 2.0, 0.0, 1.0)).is_err());
        assert!(classify(&ModelParams::new(0, 1.0, 0.0, 2.0, 0.1, 1.0)).is_err());
    }

    #[test]
    fn strauss_infinite_in_dimension_one_without_damping() {
        let r = classify(&ModelParams::new(1, 0.0, 0.0, 7.0, 0.1, 1.0)).unwrap();
        assert!(r.p_s.is_infinite());
        assert_eq!(r.regime, Regime::WaveLikeSubcritical);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["pS"], "inf");
    }

    #[test]
    fn lifespan_bound_examples() {
        let sub = ModelParams::new(1, 2.0, 0.0, 2.0, 0.1, 1.0);
        let v = lifespan_bound(&sub, 1.0, LifespanCase::Subcritical).unwrap();
        assert!((v - 100.0).abs() < 1e-9);
        let v = lifespan_bound(&sub.with_eps(1.0), 3.7, LifespanCase::Subcritical).unwrap();
        assert!((v - 3.7).abs() < 1e-15);
        let crit = ModelParams::new(3, 1.0, 0.0, 2.0, 1.0, 0.5);
        let v = lifespan_bound(&crit, 1.0, LifespanCase::Critical).unwrap();
        assert!((v - std::f64::consts::E).abs() < 1e-15);
        assert!(lifespan_bound(&sub, 1.0, LifespanCase::Critical).is_err());
        assert!(lifespan_bound(&crit, 1.0, LifespanCase::Subcritical).is_err());
    }

    proptest! {
        #[test]
        fn strauss_is_root(r in 1.0001f64..20.0) {
            let p = strauss(r).unwrap();
            prop_assert!(gamma(p, r).abs() < 1e-12 * (1.0 + r * p * p));
            prop_assert!(p > 1.0);
        }

        #[test]
        fn roots_reproduce_symmetric_functions(mu1 in 0.0f64..8.0, frac in 0.0f64..1.0) {
            let mu2sq = frac * (mu1 - 1.0).powi(2) / 4.0;
            let (r1, r2) = characteristic_roots(mu1, mu2sq).unwrap();
            prop_assert!(r1 <= r2);
            prop_assert!((r1 + r2 - (mu1 - 1.0)).abs() <= 1e-12 * (1.0 + mu1));
            prop_assert!((r1 * r2 - mu2sq).abs() <= 1e-12 * (1.0 + mu1 * mu1));
            prop_assert!(r1 + 1.0 > 0.0 && r2 + 1.0 > 0.0);
        }

        #[test]
        fn classify_is_pure(n in 1usize..6, mu1 in 0.0f64..5.0, p in 1.01f64..5.0) {
            let params = ModelParams::new(n, mu1, 0.0, p, 0.3, 1.0);
            prop_assert_eq!(classify(&params).unwrap(), classify(&params).unwrap());
        }
    }
}
