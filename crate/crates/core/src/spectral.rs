//! The spectral route: `L^s u = Σ λ_k^s u_k φ_k` and `L^{−s} f = Σ λ_k^{−s} f_k φ_k`.

use serde::Serialize;

use crate::eigen::EigenBasis;
use crate::error::{check_fraction, Error, Result};
use crate::grid::GridFunction;

/// Relative size of the mean a Neumann datum may carry.
pub const NEUMANN_MEAN_TOL: f64 = 1e-10;

fn check_power(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "s",
            value: s,
            range: "(0, 1]",
        })
    }
}

/// `L^s u`. For pure Neumann operators the mean of `u` is removed first
/// (the `λ_0 = 0` term contributes nothing). `s = 1` reproduces `apply`.
pub fn fractional_apply(basis: &EigenBasis, u: &GridFunction, s: f64) -> Result<GridFunction> {
    check_power(s)?;
    let op = basis.operator();
    let x = op.restrict(u)?;
    let y = basis.apply_filter(&x, |l| if l > 0.0 { l.powf(s) } else { 0.0 });
    op.extend(&y)
}

/// `L^{−s} f`; Neumann data must have zero mean and the result has zero mean.
pub fn fractional_solve(basis: &EigenBasis, f: &GridFunction, s: f64) -> Result<GridFunction> {
    check_power(s)?;
    let op = basis.operator();
    let x = op.restrict(f)?;
    if basis.is_pure_neumann() {
        check_compatible(&x)?;
    }
    let y = basis.apply_filter(&x, |l| if l > 0.0 { l.powf(-s) } else { 0.0 });
    op.extend(&y)
}

/// Rejects Neumann data whose mean exceeds `10⁻¹⁰` of its RMS size.
pub fn check_compatible(values: &[f64]) -> Result<()> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let tolerance = NEUMANN_MEAN_TOL * rms;
    if mean.abs() > tolerance {
        return Err(Error::Incompatible {
            mean,
            tolerance,
        });
    }
    Ok(())
}

/// `‖u‖_{H^s} = (Σ λ_k^s u_k²)^{1/2} = ‖L^{s/2} u‖_{L²}`.
pub fn hs_energy_norm(basis: &EigenBasis, u: &GridFunction, s: f64) -> Result<f64> {
    check_fraction("s", s)?;
    let c = basis.coefficients(u)?;
    let sum: f64 = c
        .values
        .iter()
        .zip(basis.eigenvalues())
        .map(|(ck, &l)| if l > 0.0 { l.powf(s) * ck * ck } else { 0.0 })
        .sum();
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub factor: f64,
    pub s: f64,
    pub max_relative_deviation: f64,
    pub nodes_compared: usize,
}

/// Compares `L_λ^s u_λ` with `λ^{2s} (L^s u)(λ·)`.
///
/// `original` lives on `Ω`; `scaled` must be built on `Ω/λ` with coefficients
/// `A(λx)`, and every scaled node `x'` must map to an original node `λx'`.
/// The deviation is `max |a − b| / max |b|` over the scaled nodes.
pub fn scaling_check(
    original: &EigenBasis,
    scaled: &EigenBasis,
    u: &GridFunction,
    s: f64,
    factor: f64,
) -> Result<ScalingReport> {
    check_power(s)?;
    let g0 = original.grid();
    let g1 = scaled.grid();
    if g0.dim() != g1.dim() {
        return Err(Error::IncompatibleGrids("dimensions differ".into()));
    }
    let mut map = Vec::with_capacity(g1.len());
    for i in 0..g1.len() {
        let p = g1.coord(i);
        let image: Vec<f64> = p[..g1.dim()].iter().map(|c| c * factor).collect();
        let j = g0.nearest(&image);
        let q = g0.coord(j);
        let tol = 1e-9 * (0..g0.dim()).map(|d| g0.spacing(d)).fold(f64::INFINITY, f64::min);
        if (0..g0.dim()).any(|d| (q[d] - image[d]).abs() > tol) {
            return Err(Error::IncompatibleGrids(format!(
                "scaled node {i} maps to {image:?}, which is not an original node"
            )));
        }
        map.push(j);
    }
    let u_scaled = GridFunction::new(g1, map.iter().map(|&j| u[j]).collect())?;
    let lhs = fractional_apply(scaled, &u_scaled, s)?;
    let rhs_full = fractional_apply(original, u, s)?;
    let c = factor.powf(2.0 * s);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, &j) in map.iter().enumerate() {
        let b = c * rhs_full[j];
        worst = worst.max((lhs[i] - b).abs());
        scale = scale.max(b.abs());
    }
    Ok(ScalingReport {
        factor,
        s,
        max_relative_deviation: if scale > 0.0 { worst / scale } else { worst },
        nodes_compared: map.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{CoefficientField, CoefficientSpec};
    use crate::eigen::eigendecompose;
    use crate::grid::Grid;
    use crate::operator::{apply, assemble, BoundaryCondition};

    fn basis(n: usize, bc: BoundaryCondition) -> EigenBasis {
        let g = Grid::new_1d(1.0, n).unwrap();
        let c = CoefficientField::sample(
            &g,
            &CoefficientSpec::Sine {
                amplitude: 0.5,
                frequency: 1.0,
            },
        )
        .unwrap();
        eigendecompose(&assemble(&g, &c, bc).unwrap()).unwrap()
    }

    fn field(b: &EigenBasis) -> GridFunction {
        GridFunction::from_fn(b.grid(), |x| (5.0 * x[0]).sin() + x[0] * x[0]).with_zero_boundary()
    }

    #[test]
    fn power_one_is_the_operator() {
        let b = basis(33, BoundaryCondition::Dirichlet);
        let u = field(&b);
        let a = fractional_apply(&b, &u, 1.0).unwrap();
        let m = apply(b.operator(), &u).unwrap();
        assert!(a.rel_error(&m).unwrap() < 1e-6);
    }

    #[test]
    fn half_powers_compose() {
        let b = basis(33, BoundaryCondition::Dirichlet);
        let u = field(&b);
        let twice = fractional_apply(&b, &fractional_apply(&b, &u, 0.5).unwrap(), 0.5).unwrap();
        let once = fractional_apply(&b, &u, 1.0).unwrap();
        assert!(twice.rel_error(&once).unwrap() < 1e-8);
    }

    #[test]
    fn neumann_rejects_nonzero_mean() {
        let b = basis(17, BoundaryCondition::Neumann);
        let one = GridFunction::constant(b.grid(), 1.0);
        assert!(matches!(fractional_solve(&b, &one, 0.5), Err(Error::Incompatible { .. })));
        let f = GridFunction::from_fn(b.grid(), |x| (3.0 * x[0]).cos()).remove_mean();
        let u = fractional_solve(&b, &f, 0.4).unwrap();
        assert!(u.mean().abs() < 1e-12);
        let back = fractional_apply(&b, &u, 0.4).unwrap();
        assert!(back.rel_error(&f).unwrap() < 1e-8);
    }

    #[test]
    fn energy_norm_is_pairing() {
        let b = basis(25, BoundaryCondition::Dirichlet);
        let u = field(&b);
        let s = 0.35;
        let e = hs_energy_norm(&b, &u, s).unwrap();
        let pairing = fractional_apply(&b, &u, s).unwrap().inner(&u).unwrap();
        assert!((e * e - pairing).abs() < 1e-10 * pairing);
    }

    #[test]
    fn out_of_range_powers() {
        let b = basis(9, BoundaryCondition::Dirichlet);
        let u = field(&b);
        assert!(fractional_apply(&b, &u, 0.0).is_err());
        assert!(fractional_apply(&b, &u, 1.2).is_err());
        assert!(hs_energy_norm(&b, &u, 1.0).is_err());
    }
}
