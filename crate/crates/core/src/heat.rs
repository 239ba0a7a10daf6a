//! The heat semigroup `e^{−tL}` and the semigroup route to `L^{±s}`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::eigen::EigenBasis;
use crate::error::{check_fraction, Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{smallest_eigenvalue, BandedCholesky};
use crate::operator::DiscreteOperator;
use crate::quadrature::{PowerWeight, SingularQuadrature};
use crate::special::gamma_neg;
use crate::spectral::check_compatible;

/// Calibration target for the scalar identity `λ^s`.
pub const CALIBRATION_TOL: f64 = 1e-8;

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "[0, ∞)",
        })
    }
}

/// `e^{−tL} u = Σ e^{−tλ_k} u_k φ_k`.
pub fn heat_apply(basis: &EigenBasis, u: &GridFunction, t: f64) -> Result<GridFunction> {
    check_time(t)?;
    let op = basis.operator();
    let x = op.restrict(u)?;
    if t == 0.0 {
        return op.extend(&x);
    }
    op.extend(&basis.apply_filter(&x, |l| (-t * l).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// First order, monotone: preserves `0 ≤ u ≤ 1`.
    ImplicitEuler,
    /// Second order (trapezoidal), not monotone for large steps.
    CrankNicolson,
}

/// `steps` uniform steps of an implicit scheme for `u' = −M u`.
pub fn heat_apply_stepped(
    op: &DiscreteOperator,
    u: &GridFunction,
    t: f64,
    steps: usize,
    scheme: TimeScheme,
) -> Result<GridFunction> {
    check_time(t)?;
    if steps == 0 {
        return Err(Error::OutOfRange {
            name: "steps",
            value: 0.0,
            range: "≥ 1",
        });
    }
    let dt = t / steps as f64;
    let theta = match scheme {
        TimeScheme::ImplicitEuler => 1.0,
        TimeScheme::CrankNicolson => 0.5,
    };
    let chol = BandedCholesky::factor_shifted(op.matrix(), theta * dt, 1.0)?;
    let mut x = op.restrict(u)?;
    for _ in 0..steps {
        let rhs = if theta < 1.0 {
            let mx = op.matrix().matvec(&x);
            x.iter().zip(&mx).map(|(a, b)| a - (1.0 - theta) * dt * b).collect()
        } else {
            x.clone()
        };
        x = chol.solve(&rhs);
    }
    op.extend(&x)
}

/// `(1/Γ(−s)) ∫ (e^{−tλ} − 1) dt/t^{1+s}` with the rule `q` (weight `dt/t^{1+s}`).
///
/// Beyond `t_min` the integrand is `−λt + λ²t²/2`, beyond `t_max` it is `−1`;
/// both tails are summed on the continued trapezoid lattice.
pub fn balakrishnan_scalar(lambda: f64, s: f64, q: &SingularQuadrature) -> f64 {
    let v = q.integrate(
        |t| (-t * lambda).exp_m1(),
        &[(-lambda, 1.0), (0.5 * lambda * lambda, 2.0)],
        &[(-1.0, 0.0)],
    );
    v / gamma_neg(s)
}

/// Relative residuals `|balakrishnan_scalar(λ) − λ^s| / λ^s` at `λ_min`,
/// `λ_max` and the worst over 64 log-spaced points between them.
pub fn calibration_residuals(q: &SingularQuadrature, s: f64, lambda_min: f64, lambda_max: f64) -> (f64, f64, f64) {
    let res = |l: f64| (balakrishnan_scalar(l, s, q) - l.powf(s)).abs() / l.powf(s);
    let (r0, r1) = (res(lambda_min), res(lambda_max));
    let ratio = (lambda_max / lambda_min).max(1.0);
    let worst = (0..64)
        .map(|k| lambda_min * ratio.powf(k as f64 / 63.0))
        .map(res)
        .fold(r0.max(r1), f64::max);
    (r0, r1, worst)
}

/// Rule for `dt/t^{1+s}` whose scalar residual over `[λ_min, λ_max]` is
/// below `tol`, halving the log-step from 0.5 as needed.
pub fn calibrate(s: f64, lambda_min: f64, lambda_max: f64, tol: f64) -> Result<SingularQuadrature> {
    check_fraction("s", s)?;
    let mut q = SingularQuadrature::for_spectrum(s, PowerWeight::OnePlus, lambda_min, lambda_max, 0.5)?;
    for _ in 0..6 {
        let (r0, r1, worst) = calibration_residuals(&q, s, lambda_min, lambda_max);
        if worst <= tol {
            return Ok(q);
        }
        if q.step < 0.02 {
            return Err(Error::Uncalibrated {
                residual_min: r0,
                residual_max: r1,
                worst,
            });
        }
        q = q.refined();
    }
    let (r0, r1, worst) = calibration_residuals(&q, s, lambda_min, lambda_max);
    if worst <= tol {
        Ok(q)
    } else {
        Err(Error::Uncalibrated {
            residual_min: r0,
            residual_max: r1,
            worst,
        })
    }
}

/// `(1/Γ(−s)) ∫ (e^{−tL}u − u) dt/t^{1+s}`, summing heat-semigroup
/// applications at the nodes of `q`. The small-`t` tail uses `Lu` and `L²u`.
///
/// Fails with [`Error::Uncalibrated`] unless `q` reproduces `λ^s` to
/// [`CALIBRATION_TOL`] at the ends of the positive spectrum.
pub fn balakrishnan_apply(basis: &EigenBasis, u: &GridFunction, s: f64, q: &SingularQuadrature) -> Result<GridFunction> {
    check_fraction("s", s)?;
    if q.weight != PowerWeight::OnePlus || (q.sigma - s).abs() > 1e-15 {
        return Err(Error::Unsupported(format!(
            "rule integrates dt/t^{{1±{}}}, need dt/t^{{1+{s}}}",
            q.sigma
        )));
    }
    let (lmin, lmax) = (basis.lambda_min_positive(), basis.lambda_max());
    let (r0, r1, worst) = calibration_residuals(q, s, lmin, lmax);
    if worst > CALIBRATION_TOL {
        return Err(Error::Uncalibrated {
            residual_min: r0,
            residual_max: r1,
            worst,
        });
    }
    let op = basis.operator();
    let mut x = op.restrict(u)?;
    if basis.is_pure_neumann() {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= m);
    }
    let c = basis.analyze(&x);
    let lam = basis.eigenvalues();
    let h = q.step;
    let m = q.nodes.len() - 1;
    let mut acc = vec![0.0; x.len()];
    let mut coeffs = vec![0.0; c.len()];
    for (k, (&t, &w)) in q.nodes.iter().zip(&q.weights).enumerate() {
        // full trapezoid weight at the ends: the lattice continues below
        let w = if k == 0 || k == m { 2.0 * w } else { w };
        for j in 0..c.len() {
            coeffs[j] = c[j] * (-t * lam[j]).exp();
        }
        let heat = basis.synthesize(&coeffs);
        for i in 0..x.len() {
            acc[i] += w * (heat[i] - x[i]);
        }
    }
    // e^{−tL}u − u ≈ −tLu + t²L²u/2 below t_min, ≈ −u above t_max.
    let lx = op.matrix().matvec(&x);
    let llx = op.matrix().matvec(&lx);
    let geo = |t0: f64, q: f64| {
        let r = (-q.abs() * h).exp();
        h * t0.powf(q) * r / (1.0 - r)
    };
    let c1 = -geo(q.t_min, 1.0 - s);
    let c2 = 0.5 * geo(q.t_min, 2.0 - s);
    let c3 = -geo(q.t_max, -s);
    let g = gamma_neg(s);
    let y: Vec<f64> = (0..x.len())
        .map(|i| (acc[i] + c1 * lx[i] + c2 * llx[i] + c3 * x[i]) / g)
        .collect();
    op.extend(&y)
}

/// Trapezoid rule for `λ^{−s} = (sin πs/π) ∫ e^{(1−s)y} / (e^y + λ) dy`.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventQuadrature {
    pub s: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ResolventQuadrature {
    pub fn new(s: f64, lambda_lo: f64, lambda_hi: f64, step: f64) -> Result<Self> {
        check_fraction("s", s)?;
        let lo = lambda_lo.ln() - 40.0 / (1.0 - s);
        let hi = lambda_hi.ln() + 40.0 / s;
        let m = ((hi - lo) / step).ceil() as usize;
        let dy = (hi - lo) / m as f64;
        let pre = (PI * s).sin() / PI;
        let mut nodes = Vec::with_capacity(m + 1);
        let mut weights = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let y = lo + k as f64 * dy;
            let end = if k == 0 || k == m { 0.5 } else { 1.0 };
            nodes.push(y.exp());
            weights.push(end * pre * dy * ((1.0 - s) * y).exp());
        }
        Ok(Self {
            s,
            lambda_lo,
            lambda_hi,
            nodes,
            weights,
        })
    }

    pub fn scalar(&self, lambda: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&mu, &w)| w / (mu + lambda))
            .sum()
    }

    /// Worst relative error of [`scalar`](Self::scalar) against `λ^{−s}`.
    pub fn residual(&self) -> f64 {
        let ratio = self.lambda_hi / self.lambda_lo;
        (0..64)
            .map(|k| self.lambda_lo * ratio.powf(k as f64 / 63.0))
            .map(|l| (self.scalar(l) * l.powf(self.s) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `L^{−s} f` without an eigendecomposition: one shifted banded Cholesky
/// solve per quadrature node. Intended for long 1D grids where a dense
/// eigensolver is out of reach. Pure Neumann operators are not supported.
pub fn resolvent_fractional_solve(op: &DiscreteOperator, f: &GridFunction, s: f64) -> Result<GridFunction> {
    check_fraction("s", s)?;
    if op.is_pure_neumann() {
        return Err(Error::Unsupported(
            "resolvent route needs a positive definite operator".into(),
        ));
    }
    let lambda_hi = op.matrix().gershgorin_max();
    let lambda_lo = 0.5 * smallest_eigenvalue(op.matrix(), 60)?;
    let mut q = ResolventQuadrature::new(s, lambda_lo, lambda_hi, 0.35)?;
    while q.residual() > CALIBRATION_TOL {
        let step = 0.5 * (q.nodes[1] / q.nodes[0]).ln();
        if step < 0.01 {
            return Err(Error::Uncalibrated {
                residual_min: q.residual(),
                residual_max: q.residual(),
                worst: q.residual(),
            });
        }
        q = ResolventQuadrature::new(s, lambda_lo, lambda_hi, step)?;
    }
    let x = op.restrict(f)?;
    let mut acc = vec![0.0; x.len()];
    for (&mu, &w) in q.nodes.iter().zip(&q.weights) {
        let chol = BandedCholesky::factor_shifted(op.matrix(), 1.0, mu)?;
        let y = chol.solve(&x);
        for (a, b) in acc.iter_mut().zip(&y) {
            *a += w * b;
        }
    }
    op.extend(&acc)
}

/// `L^{−s} f` through the same Balakrishnan-type integral
/// `(1/Γ(s)) ∫ e^{−tL} f dt/t^{1−s}` (spectral semigroup, log-uniform rule).
pub fn semigroup_fractional_solve(basis: &EigenBasis, f: &GridFunction, s: f64, q: &SingularQuadrature) -> Result<GridFunction> {
    check_fraction("s", s)?;
    let op = basis.operator();
    let x = op.restrict(f)?;
    if basis.is_pure_neumann() {
        check_compatible(&x)?;
    }
    let w: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|&l| if l > 0.0 { inverse_power_scalar(l, s, q) } else { 0.0 })
        .collect();
    op.extend(&basis.apply_weights(&x, &w))
}

/// `(1/Γ(s)) ∫ e^{−tλ} dt/t^{1−s}` with rule `q` (weight `dt/t^{1−s}`).
pub fn inverse_power_scalar(lambda: f64, s: f64, q: &SingularQuadrature) -> f64 {
    let v = q.integrate(
        |t| (-t * lambda).exp(),
        &[(1.0, 0.0), (-lambda, 1.0), (0.5 * lambda * lambda, 2.0)],
        &[],
    );
    v / crate::special::gamma(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_identity_targets() {
        for &s in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let q = calibrate(s, 1.0, 4.0, 1e-10).unwrap();
            assert!((balakrishnan_scalar(1.0, s, &q) - 1.0).abs() < 1e-8);
        }
        let q = calibrate(0.5, 1.0, 4.0, 1e-10).unwrap();
        assert!((balakrishnan_scalar(4.0, 0.5, &q) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn refinement_lowers_residual() {
        let s = 0.6;
        let q = SingularQuadrature::for_spectrum(s, PowerWeight::OnePlus, 10.0, 1e4, 1.2).unwrap();
        let coarse = calibration_residuals(&q, s, 10.0, 1e4).2;
        let fine = calibration_residuals(&q.refined(), s, 10.0, 1e4).2;
        assert!(fine < coarse);
    }

    #[test]
    fn inverse_power_scalar_matches() {
        let s = 0.3;
        let q = SingularQuadrature::for_spectrum(s, PowerWeight::OneMinus, 2.0, 3e3, 0.3).unwrap();
        for &l in &[2.0, 50.0, 3e3] {
            let v = inverse_power_scalar(l, s, &q);
            assert!((v * l.powf(s) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resolvent_scalar_rule() {
        let q = ResolventQuadrature::new(0.25, 1.0, 1e8, 0.35).unwrap();
        assert!(q.residual() < 1e-8);
    }
}
