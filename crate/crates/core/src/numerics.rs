//! Shared quadrature and differencing kernels.
//!
//! Everything here is deliberately small: Lanczos gamma, Gauss-Legendre
//! panels, composite Simpson with panel doubling, trapezoid sums over
//! sampled data, and Richardson-extrapolated central differences.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (Lanczos, g = 7).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Surface measure of the unit sphere in `R^n` (`2` for `n = 1`).
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Lebesgue measure of the unit ball in `R^n`.
pub fn ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn g16() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * h;
            let half = 0.5 * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + half * x);
            }
            total += s * half;
        }
        total
    }
}

/// Composite Simpson rule with an even number of panels.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// Simpson with panel doubling until successive results agree to `rel_tol`.
pub fn simpson_converged<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    start_panels: usize,
    rel_tol: f64,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut panels = start_panels.max(2);
    let mut prev = simpson(&f, a, b, panels);
    for _ in 0..8 {
        panels *= 2;
        let next = simpson(&f, a, b, panels);
        if (next - prev).abs() <= rel_tol * next.abs() || next == prev {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy(format!(
        "Simpson quadrature on [{a}, {b}] did not reach {rel_tol:e} with {panels} panels"
    )))
}

/// Panel count used by radial quadrature of analytic integrands.
pub const RADIAL_PANELS: usize = 2048;
/// Relative agreement required between successive radial quadratures.
pub const RADIAL_TOL: f64 = 1e-10;

/// `∫_{|x| ≤ r_max} h(|x|) dx` in `R^n` for a radial integrand `h`.
pub fn radial_integral<F: Fn(f64) -> f64>(n: usize, r_max: f64, h: F) -> Result<f64> {
    let k = n as i32 - 1;
    let inner = simpson_converged(|r| h(r) * r.powi(k), 0.0, r_max, RADIAL_PANELS, RADIAL_TOL)?;
    Ok(sphere_area(n) * inner)
}

/// Trapezoid weights for radial integration on the nodes `r_i = i·dr`.
///
/// `Σ w_i u_i ≈ ∫_{R^n} u(|x|) dx` for data vanishing at the last node.
pub fn radial_weights(n: usize, dr: f64, nodes: usize) -> Vec<f64> {
    let area = sphere_area(n);
    let k = n as i32 - 1;
    (0..nodes)
        .map(|i| {
            let r = i as f64 * dr;
            let end = if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
            area * end * dr * r.powi(k)
        })
        .collect()
}

/// Central second difference.
pub fn central_second<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Central first difference.
pub fn central_first<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Two-level Richardson extrapolation of step-`h`, `h/2`, `h/4` estimates
/// whose error expands in even powers of the step.
pub fn richardson3(d_h: f64, d_h2: f64, d_h4: f64) -> f64 {
    let r1 = (4.0 * d_h2 - d_h) / 3.0;
    let r2 = (4.0 * d_h4 - d_h2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

pub fn richardson_first<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    richardson3(
        central_first(f, x, h),
        central_first(f, x, h / 2.0),
        central_first(f, x, h / 4.0),
    )
}

pub fn richardson_second<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    richardson3(
        central_second(f, x, h),
        central_second(f, x, h / 2.0),
        central_second(f, x, h / 4.0),
    )
}

/// Cumulative trapezoid integral of samples `y` over times `t`.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Cumulative trapezoid with the Euler-Maclaurin end correction
/// `−Δ²/12·(y′(t) − y′(0))`, fourth order on uniform samples.
pub fn cumulative_corrected(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = cumulative_trapezoid(t, y);
    let m = t.len();
    if m < 3 {
        return out;
    }
    let h = t[1] - t[0];
    let slope = |k: usize| {
        if k == 0 {
            (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
        } else if k == m - 1 {
            (3.0 * y[k] - 4.0 * y[k - 1] + y[k - 2]) / (2.0 * h)
        } else {
            (y[k + 1] - y[k - 1]) / (2.0 * h)
        }
    };
    let d0 = slope(0);
    for (k, v) in out.iter_mut().enumerate().skip(1) {
        *v -= h * h / 12.0 * (slope(k) - d0);
    }
    out
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, a, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-14);
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sphere_and_ball() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-13);
        assert!((ball_volume(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        // degree 15 is exact for 8 points
        let v = rule.integrate(|x| x.powi(14) + x.powi(3), -1.0, 1.0, 1);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w = GaussLegendre::g16().integrate(f64::exp, 0.0, 1.0, 2);
        assert!((w - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn richardson_beats_plain_difference() {
        let f = |x: f64| x.sin();
        let plain = central_second(&f, 1.0, 0.1);
        let rich = richardson_second(&f, 1.0, 0.1);
        assert!((rich + 1f64.sin()).abs() < 1e-9);
        assert!((rich + 1f64.sin()).abs() < (plain + 1f64.sin()).abs() * 1e-3);
    }

    #[test]
    fn radial_integral_of_unit_ball() {
        let v = radial_integral(3, 1.0, |_| 1.0).unwrap();
        assert!((v - 4.0 / 3.0 * PI).abs() < 1e-12);
        let v1 = radial_integral(1, 2.0, |_| 1.0).unwrap();
        assert!((v1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn corrected_trapezoid_is_fourth_order() {
        let err = |m: usize| {
            let t: Vec<f64> = (0..=m).map(|k| k as f64 * 2.0 / m as f64).collect();
            let y: Vec<f64> = t.iter().map(|v| v.exp()).collect();
            (cumulative_corrected(&t, &y)[m] - (2f64.exp() - 1.0)).abs()
        };
        let ratio = err(40) / err(80);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let (b, a, r2) = linear_fit(&x, &y);
        assert!((b + 3.0).abs() < 1e-14 && (a - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}
