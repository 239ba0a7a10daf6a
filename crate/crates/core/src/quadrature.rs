//! Quadrature rules.
//!
//! [`SingularQuadrature`] is the log-uniform rule for the semigroup
//! `t`-integrals. [`tanh_sinh`] and [`exp_sinh`] are double-exponential rules
//! whose integrands receive the distances to the interval ends, so endpoint
//! singularities can be evaluated without cancellation.

use serde::Serialize;

use crate::error::{Error, Result};

/// Which power weight the rule integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerWeight {
    /// `dt / t^{1+σ}`
    OnePlus,
    /// `dt / t^{1−σ}`
    OneMinus,
}

/// Substitution used to map `(0, ∞)` to a finite node set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Substitution {
    /// `t = e^τ` with uniform `τ` nodes (trapezoid rule).
    LogUniform,
}

/// Trapezoid rule in `τ = ln t` on `[ln t_min, ln t_max]` for
/// `∫ g(t) dt/t^{1±σ}`; the callers add closed-form corrections for the
/// two truncated tails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularQuadrature {
    pub sigma: f64,
    pub weight: PowerWeight,
    pub substitution: Substitution,
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `t_min·λ_max` for rules built by [`SingularQuadrature::for_spectrum`].
pub const T_MIN_FACTOR: f64 = 1e-8;
/// `t_max·λ_min`; `e^{−37} < 10^{−16}`.
pub const T_MAX_FACTOR: f64 = 37.0;

impl SingularQuadrature {
    pub fn new(sigma: f64, weight: PowerWeight, t_min: f64, t_max: f64, step: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::OutOfRange {
                name: "t_min",
                value: t_min,
                range: "0 < t_min < t_max < ∞",
            });
        }
        if !(step > 0.0) {
            return Err(Error::OutOfRange {
                name: "step",
                value: step,
                range: "(0, ∞)",
            });
        }
        let span = (t_max / t_min).ln();
        let m = (span / step).ceil().max(1.0) as usize;
        let dtau = span / m as f64;
        let p = match weight {
            PowerWeight::OnePlus => -sigma,
            PowerWeight::OneMinus => sigma,
        };
        let mut nodes = Vec::with_capacity(m + 1);
        let mut weights = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let t = t_min * (k as f64 * dtau).exp();
            let end = if k == 0 || k == m { 0.5 } else { 1.0 };
            nodes.push(t);
            // dt/t^{1∓σ} = t^{∓σ} dτ
            weights.push(end * dtau * t.powf(p));
        }
        Ok(Self {
            sigma,
            weight,
            substitution: Substitution::LogUniform,
            t_min,
            t_max,
            step: dtau,
            nodes,
            weights,
        })
    }

    /// Truncation set from the spectrum: `t_min = 10⁻⁸/λ_max` resolves
    /// `e^{−tλ_max}`, `t_max = 37/λ_min` puts `e^{−tλ_min}` below `10⁻¹⁶`.
    pub fn for_spectrum(sigma: f64, weight: PowerWeight, lambda_min: f64, lambda_max: f64, step: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
            return Err(Error::OutOfRange {
                name: "lambda_min",
                value: lambda_min,
                range: "0 < λ_min ≤ λ_max",
            });
        }
        Self::new(sigma, weight, T_MIN_FACTOR / lambda_max, T_MAX_FACTOR / lambda_min, step)
    }

    /// `Σ w_k g(t_k)` (plain truncated trapezoid).
    pub fn sum(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * g(t)).sum()
    }

    /// Power of the weight in the `τ`-integrand: `dt/t^{1±σ} = t^{∓σ} dτ`.
    fn weight_power(&self) -> f64 {
        match self.weight {
            PowerWeight::OnePlus => -self.sigma,
            PowerWeight::OneMinus => self.sigma,
        }
    }

    /// `∫_0^∞ g(t) dt/t^{1±σ}` where `g ≈ Σ c·t^m` near `t = 0` (`low`) and
    /// near `t = ∞` (`high`).
    ///
    /// The trapezoid sum is continued over the infinite `τ`-lattice: beyond
    /// each end the leading terms are summed as geometric series. For
    /// integrands analytic in a strip this keeps the exponential accuracy
    /// of the trapezoid rule instead of the `O(h²)` endpoint error.
    pub fn integrate(&self, g: impl Fn(f64) -> f64, low: &[(f64, f64)], high: &[(f64, f64)]) -> f64 {
        let p = self.weight_power();
        let h = self.step;
        let m = self.nodes.len() - 1;
        let mut total = self.sum(&g);
        // restore full weights at the two end nodes
        total += self.weights[0] * g(self.nodes[0]) + self.weights[m] * g(self.nodes[m]);
        for &(c, e) in low {
            let q = e + p;
            debug_assert!(q > 0.0, "low-end term must decay");
            let r = (-q * h).exp();
            total += c * h * self.t_min.powf(q) * r / (1.0 - r);
        }
        for &(c, e) in high {
            let q = e + p;
            debug_assert!(q < 0.0, "high-end term must decay");
            let r = (q * h).exp();
            total += c * h * self.t_max.powf(q) * r / (1.0 - r);
        }
        total
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The same truncation with step halved.
    pub fn refined(&self) -> Self {
        Self::new(self.sigma, self.weight, self.t_min, self.t_max, self.step / 2.0).expect("valid parameters")
    }
}

/// Result of an adaptive double-exponential rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const TANH_SINH_T_MAX: f64 = 5.0;
const EXP_SINH_T_MAX: f64 = 6.0;
const DE_MAX_LEVEL: usize = 12;

/// `∫_a^b f`, with `f(x, x − a, b − x)`.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<QuadResult> {
    let half = 0.5 * (b - a);
    let width = b - a;
    let term = |t: f64| {
        let u = 0.5 * std::f64::consts::PI * t.sinh();
        let dl = width / (1.0 + (-2.0 * u).exp());
        let dr = width / (1.0 + (2.0 * u).exp());
        let cu = u.cosh();
        let w = half * 0.5 * std::f64::consts::PI * t.cosh() / (cu * cu);
        if w == 0.0 || dl == 0.0 || dr == 0.0 {
            return 0.0;
        }
        let x = if t < 0.0 { a + dl } else { b - dr };
        w * f(x, dl, dr)
    };
    adaptive(term, TANH_SINH_T_MAX, rel_tol)
}

/// `∫_a^∞ f`, with `f(x, x − a)`.
pub fn exp_sinh(f: impl Fn(f64, f64) -> f64, a: f64, rel_tol: f64) -> Result<QuadResult> {
    let term = |t: f64| {
        let e = (0.5 * std::f64::consts::PI * t.sinh()).exp();
        let w = 0.5 * std::f64::consts::PI * t.cosh() * e;
        if e == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let v = w * f(a + e, e);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive(term, EXP_SINH_T_MAX, rel_tol)
}

fn adaptive(term: impl Fn(f64) -> f64, hi: f64, rel_tol: f64) -> Result<QuadResult> {
    let mut h = 0.5;
    let mut n_half = (hi / h).round() as i64;
    let mut sum: f64 = (-n_half..=n_half).map(|j| term(j as f64 * h)).sum();
    let mut evals = (2 * n_half + 1) as usize;
    let mut prev = sum * h;
    for _ in 0..DE_MAX_LEVEL {
        h *= 0.5;
        n_half *= 2;
        let mut add = 0.0;
        let mut j = -n_half + 1;
        while j <= n_half {
            add += term(j as f64 * h);
            j += 2;
        }
        evals += n_half as usize;
        sum += add;
        let cur = sum * h;
        let err = (cur - prev).abs();
        if !cur.is_finite() {
            return Err(Error::Numerical("double-exponential quadrature produced a non-finite value".into()));
        }
        if err <= rel_tol * cur.abs() || err == 0.0 {
            return Ok(QuadResult {
                value: cur,
                error: err,
                evaluations: evals,
            });
        }
        prev = cur;
    }
    Err(Error::Numerical(format!(
        "double-exponential quadrature did not reach relative tolerance {rel_tol:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_rule_integrates_power_times_exponential() {
        // ∫_0^∞ e^{−t} t^{s−1} dt = Γ(s) with the small-t tail added.
        let s = 0.3;
        let q = SingularQuadrature::new(s, PowerWeight::OneMinus, 1e-10, 60.0, 0.2).unwrap();
        let v = q.integrate(|t| (-t).exp(), &[(1.0, 0.0), (-1.0, 1.0), (0.5, 2.0)], &[]);
        assert!((v - crate::special::gamma(s)).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{−1/2} dx = 2 using the exact distance to the left end.
        let r = tanh_sinh(|_, dl, _| dl.powf(-0.5), 0.0, 1.0, 1e-13).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        // ∫_0^1 ln(1 − x) dx = −1 using the distance to the right end.
        let r = tanh_sinh(|_, _, dr| dr.ln(), 0.0, 1.0, 1e-13).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_sinh_half_line() {
        let r = exp_sinh(|x, _| 1.0 / (1.0 + x * x), 0.0, 1e-12).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
        let r = exp_sinh(|x, _| (-x).exp() * x.powf(-0.7), 0.0, 1e-12).unwrap();
        assert!((r.value - crate::special::gamma(0.3)).abs() < 1e-10);
    }
}
