//! Half-line and half-space oracles built on the reflection method:
//! odd reflection for Dirichlet, even reflection for Neumann.

use serde::{Deserialize, Serialize};

use crate::coefficient::{CoefficientField, CoefficientSpec};
use crate::eigen::{eigendecompose, EigenBasis};
use crate::error::{check_fraction, Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::{assemble_per_axis, BoundaryCondition};
use crate::quadrature::{exp_sinh, tanh_sinh};
use crate::special::frac_laplacian_constant;
use crate::spectral::{fractional_apply, fractional_solve};

/// `∫₀² (ln|1+ω| − ln|1−ω|) dω = 3 ln 3`, the constant of the `s = 1/2` form.
pub fn log_constant() -> f64 {
    3.0 * 3f64.ln()
}

/// The same constant by split double-exponential quadrature.
pub fn log_constant_oracle() -> Result<f64> {
    let f = |w: f64, dist_to_one: f64| (1.0 + w).ln() - dist_to_one.ln();
    let left = tanh_sinh(|w, _, dr| f(w, dr), 0.0, 1.0, 1e-14)?;
    let right = tanh_sinh(|w, dl, _| f(w, dl), 1.0, 2.0, 1e-14)?;
    Ok(left.value + right.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfLineRhs {
    /// `f ≡ 1` on the whole half-line (needs `s < 1/2`).
    One,
    /// `f = χ_{[0,1]}`.
    IndicatorUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfLineBc {
    DirichletOdd,
    NeumannEven,
}

/// `(−Δ)^s u = f` on `(0, ∞)` with a wall condition at `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLineProblem {
    pub s: f64,
    pub rhs: HalfLineRhs,
    pub bc: HalfLineBc,
    /// Length of the truncated half-line used by discrete comparisons.
    pub truncation: f64,
}

impl HalfLineProblem {
    pub fn new(s: f64, rhs: HalfLineRhs, bc: HalfLineBc) -> Result<Self> {
        check_fraction("s", s)?;
        if rhs == HalfLineRhs::One {
            if s >= 0.5 {
                return Err(Error::OutOfRange {
                    name: "s",
                    value: s,
                    range: "(0, 1/2) for f ≡ 1",
                });
            }
            if bc == HalfLineBc::NeumannEven {
                return Err(Error::Unsupported(
                    "f ≡ 1 has no decaying Neumann half-line solution".into(),
                ));
            }
        }
        Ok(Self {
            s,
            rhs,
            bc,
            truncation: 16.0,
        })
    }

    fn sign(&self) -> f64 {
        match self.bc {
            HalfLineBc::DirichletOdd => -1.0,
            HalfLineBc::NeumannEven => 1.0,
        }
    }
}

/// `∫ (k(|x−z|) ∓ k(x+z)) f(z) dz` with `k(r) = r^{2s−1}` (or `−ln r` at
/// `s = 1/2`), integrated on `[0, x]`, `[x, b]` and, for `f ≡ 1`, `[2x, ∞)`
/// with the difference formed without cancellation. Multiplicative
/// constants `d_{1,s}` are omitted.
pub fn halfline_inverse_quadrature(problem: &HalfLineProblem, xs: &[f64]) -> Result<Vec<f64>> {
    let s = problem.s;
    let sign = problem.sign();
    let p = 2.0 * s - 1.0;
    let log_case = (s - 0.5).abs() < 1e-15;
    let kernel = |r: f64| if log_case { -r.ln() } else { r.powf(p) };
    let tol = 1e-13;
    xs.iter()
        .map(|&x| {
            if !(x > 0.0) {
                return Err(Error::OutOfRange {
                    name: "x",
                    value: x,
                    range: "(0, ∞)",
                });
            }
            match problem.rhs {
                HalfLineRhs::IndicatorUnit => {
                    if x >= 1.0 {
                        return Err(Error::OutOfRange {
                            name: "x",
                            value: x,
                            range: "(0, 1)",
                        });
                    }
                    let a = tanh_sinh(|z, _, dr| kernel(dr) + sign * kernel(x + z), 0.0, x, tol)?;
                    let b = tanh_sinh(|z, dl, _| kernel(dl) + sign * kernel(x + z), x, 1.0, tol)?;
                    Ok(a.value + b.value)
                }
                HalfLineRhs::One => {
                    let a = tanh_sinh(|z, _, dr| kernel(dr) - kernel(x + z), 0.0, x, tol)?;
                    let b = tanh_sinh(|z, dl, _| kernel(dl) - kernel(x + z), x, 2.0 * x, tol)?;
                    // beyond 2x: d^p − (d + 2x)^p = −d^p · expm1(p·ln(1 + 2x/d)), d = z − x
                    let c = exp_sinh(
                        |_, e| {
                            let d = x + e;
                            -d.powf(p) * (p * (2.0 * x / d).ln_1p()).exp_m1()
                        },
                        2.0 * x,
                        tol,
                    )?;
                    Ok(a.value + b.value + c.value)
                }
            }
        })
        .collect()
}

/// `F(ω) = (ω+1) ln(ω+1) − (ω−1) ln(ω−1)`, `ω ≥ 1`.
fn f_log(w: f64) -> f64 {
    let m = w - 1.0;
    (w + 1.0) * (w + 1.0).ln() - if m > 0.0 { m * m.ln() } else { 0.0 }
}

/// The closed forms, normalised to leading coefficient 1.
///
/// Dirichlet: `x^{2s}` (`f ≡ 1`), `2x^{2s} + (1−x)^{2s} − (1+x)^{2s}`
/// (`χ`, `s ≠ 1/2`) and `x (C + F(1/x) − F(2))` with `C = 3 ln 3` at
/// `s = 1/2`, which expands to `(1+x)ln(1+x) − (1−x)ln(1−x) − 2x ln x`.
/// Neumann (`χ` only): `(1−x)^{2s} + (1+x)^{2s}` and
/// `2 − (1−x)ln(1−x) − (1+x)ln(1+x)`.
pub fn closed_form_halfline(problem: &HalfLineProblem, x: f64) -> Result<f64> {
    let s = problem.s;
    let t = 2.0 * s;
    let log_case = (s - 0.5).abs() < 1e-15;
    match problem.rhs {
        HalfLineRhs::One => {
            if !(x > 0.0) {
                return Err(Error::OutOfRange {
                    name: "x",
                    value: x,
                    range: "(0, ∞)",
                });
            }
            Ok(x.powf(t))
        }
        HalfLineRhs::IndicatorUnit => {
            if !(x > 0.0 && x < 0.5) {
                return Err(Error::OutOfRange {
                    name: "x",
                    value: x,
                    range: "(0, 1/2)",
                });
            }
            Ok(match (problem.bc, log_case) {
                (HalfLineBc::DirichletOdd, true) => x * (log_constant() + f_log(1.0 / x) - f_log(2.0)),
                (HalfLineBc::DirichletOdd, false) => 2.0 * x.powf(t) + (1.0 - x).powf(t) - (1.0 + x).powf(t),
                (HalfLineBc::NeumannEven, true) => 2.0 - (1.0 - x) * (1.0 - x).ln() - (1.0 + x) * (1.0 + x).ln(),
                (HalfLineBc::NeumannEven, false) => (1.0 - x).powf(t) + (1.0 + x).powf(t),
            })
        }
    }
}

/// Multiplier relating the quadrature (kernel without `d_{1,s}`) to the
/// normalised closed form: `quadrature = factor · closed form`.
pub fn closed_form_factor(problem: &HalfLineProblem) -> f64 {
    let s = problem.s;
    if (s - 0.5).abs() < 1e-15 {
        1.0
    } else if problem.rhs == HalfLineRhs::One {
        1.0 / s
    } else {
        1.0 / (2.0 * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryGrowth {
    /// `min(2s, 1)`.
    pub exponent: f64,
    /// `s = 1/2`: the profile is `x ln(1/x)`, not a pure power.
    pub log_correction: bool,
}

/// Boundary growth `w ∼ x_n^{min(2s,1)}` of the half-space solution.
pub fn boundary_growth_oracle(s: f64) -> Result<BoundaryGrowth> {
    check_fraction("s", s)?;
    Ok(BoundaryGrowth {
        exponent: (2.0 * s).min(1.0),
        log_correction: (s - 0.5).abs() < 1e-15,
    })
}

/// `c_{n,s} (|x−z|^{−(n+2s)} ∓ |x−z*|^{−(n+2s)})`, `z* = (z′, −z_n)`:
/// minus for Dirichlet, plus for Neumann. This is the kernel of the
/// pointwise formula; the jump kernel of the bilinear form is half of it.
pub fn halfspace_kernel(x: &[f64], z: &[f64], s: f64, bc: BoundaryCondition) -> Result<f64> {
    check_fraction("s", s)?;
    if x.len() != z.len() || x.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            found: z.len(),
        });
    }
    let n = x.len();
    if x[n - 1] <= 0.0 || z[n - 1] <= 0.0 {
        return Err(Error::OutOfRange {
            name: "x_n",
            value: x[n - 1].min(z[n - 1]),
            range: "(0, ∞)",
        });
    }
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
    if d2 == 0.0 {
        return Err(Error::Numerical("coincident points".into()));
    }
    let m2 = d2 - (x[n - 1] - z[n - 1]).powi(2) + (x[n - 1] + z[n - 1]).powi(2);
    let p = -(n as f64 + 2.0 * s) / 2.0;
    let sign = match bc {
        BoundaryCondition::Dirichlet => -1.0,
        BoundaryCondition::Neumann => 1.0,
    };
    Ok(frac_laplacian_constant(n, s) * (d2.powf(p) + sign * m2.powf(p)))
}

// ---------------------------------------------------------------------------
// reflection

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

/// A field on a grid symmetric about `x_n = 0`, mirrored from its upper half.
#[derive(Debug, Clone)]
pub struct ReflectedFunction {
    pub parity: Parity,
    pub values: GridFunction,
}

/// Mirrors `u` (given on a grid whose last axis starts at `0`) across
/// `x_n = 0` node by node.
pub fn reflect(u: &GridFunction, parity: Parity) -> Result<ReflectedFunction> {
    let g = u.grid();
    let dim = g.dim();
    let ax = dim - 1;
    if g.origin()[ax] != 0.0 {
        return Err(Error::InvalidGrid("the reflected axis must start at 0".into()));
    }
    let n = g.nodes()[ax];
    let scale = u.max_abs();
    if parity == Parity::Odd {
        for i in 0..g.len() {
            if g.multi_index(i)[ax] == 0 && u[i].abs() > 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidCoefficient(format!(
                    "odd reflection needs u = 0 on the wall; u = {} at node {i}",
                    u[i]
                )));
            }
        }
    }
    let mut origin = g.origin().to_vec();
    let mut extents = g.extents().to_vec();
    let mut nodes = g.nodes().to_vec();
    origin[ax] = -extents[ax];
    extents[ax] *= 2.0;
    nodes[ax] = 2 * n - 1;
    let full = Grid::new(&origin, &extents, &nodes)?;
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
    };
    let values: Vec<f64> = (0..full.len())
        .map(|i| {
            let mut m = full.multi_index(i);
            let k = m[ax] as i64 - (n as i64 - 1);
            m[ax] = k.unsigned_abs() as usize;
            let v = u[g.index(&m[..dim])];
            if k < 0 {
                sign * v
            } else if k == 0 && parity == Parity::Odd {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(ReflectedFunction {
        parity,
        values: GridFunction::new(&full, values)?,
    })
}

/// Upper half (`x_n ≥ 0`) of a field on a symmetric grid.
pub fn upper_half(f: &GridFunction) -> Result<GridFunction> {
    let g = f.grid();
    let dim = g.dim();
    let ax = dim - 1;
    let nn = g.nodes()[ax];
    if nn % 2 == 0 || (g.origin()[ax] + 0.5 * g.extents()[ax]).abs() > 1e-12 * g.extents()[ax] {
        return Err(Error::InvalidGrid("grid is not symmetric about x_n = 0".into()));
    }
    let n = (nn + 1) / 2;
    let mut origin = g.origin().to_vec();
    let mut extents = g.extents().to_vec();
    let mut nodes = g.nodes().to_vec();
    origin[ax] = 0.0;
    extents[ax] *= 0.5;
    nodes[ax] = n;
    let half = Grid::new(&origin, &extents, &nodes)?;
    let values = (0..half.len())
        .map(|i| {
            let mut m = half.multi_index(i);
            m[ax] += n - 1;
            f[g.index(&m[..dim])]
        })
        .collect();
    GridFunction::new(&half, values)
}

/// `max |F(x) − σ F(x*)| / max |F|` for `F = L^s` of the reflected field on
/// the symmetric basis, `σ = ±1` by parity. Zero up to round-off when the
/// symmetric operator commutes with the mirror.
pub fn parity_defect(symmetric: &EigenBasis, f: &ReflectedFunction, s: f64) -> Result<f64> {
    let out = fractional_apply(symmetric, &f.values, s)?;
    let g = out.grid();
    let dim = g.dim();
    let ax = dim - 1;
    let nn = g.nodes()[ax];
    let sign = match f.parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
    };
    let mut worst: f64 = 0.0;
    for i in 0..g.len() {
        let mut m = g.multi_index(i);
        m[ax] = nn - 1 - m[ax];
        let j = g.index(&m[..dim]);
        worst = worst.max((out[i] - sign * out[j]).abs());
    }
    Ok(worst / out.max_abs().max(f64::MIN_POSITIVE))
}

/// `(−Δ_D^+)^s u` against `(−Δ)^s u_o` restricted to `x_n > 0`: the half
/// basis carries Dirichlet at the wall, the symmetric basis lives on the
/// mirrored grid. Returns the relative max deviation.
pub fn odd_reflection_check(half: &EigenBasis, symmetric: &EigenBasis, u: &GridFunction, s: f64) -> Result<f64> {
    let direct = fractional_apply(half, u, s)?;
    let odd = reflect(u, Parity::Odd)?;
    let mirrored = upper_half(&fractional_apply(symmetric, &odd.values, s)?)?;
    direct.grid().check_same(mirrored.grid())?;
    let scale = direct.max_abs().max(f64::MIN_POSITIVE);
    Ok(direct.sub(&mirrored)?.max_abs() / scale)
}

/// Basis for `L = −Δ` on a grid with the given per-axis conditions.
pub fn laplacian_basis(grid: &Grid, bcs: &[BoundaryCondition]) -> Result<EigenBasis> {
    let c = CoefficientField::sample(grid, &CoefficientSpec::Identity)?;
    eigendecompose(&assemble_per_axis(grid, &c, bcs)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub s: f64,
    pub max_deviation: f64,
    pub nodes_compared: usize,
}

/// Solves `L^s u = φ(x_n)` on a 2D strip (Neumann across `x′`, `normal`
/// along `x_n`) and on the `x_n` axis alone; reports the worst deviation
/// of the 2D solution from the 1D one over all `x′`.
pub fn reduction_1d_check(
    strip: &Grid,
    normal: BoundaryCondition,
    phi: impl Fn(f64) -> f64,
    s: f64,
) -> Result<ReductionReport> {
    if strip.dim() != 2 {
        return Err(Error::InvalidGrid("reduction needs a 2D strip".into()));
    }
    let b2 = laplacian_basis(strip, &[BoundaryCondition::Neumann, normal])?;
    let line = Grid::new(&[strip.origin()[1]], &[strip.extents()[1]], &[strip.nodes()[1]])?;
    let b1 = laplacian_basis(&line, &[normal])?;
    let mut f2 = GridFunction::from_fn(strip, |x| phi(x[1]));
    let mut f1 = GridFunction::from_fn(&line, |x| phi(x[0]));
    if normal == BoundaryCondition::Dirichlet {
        f2 = b2.operator().extend(&b2.operator().restrict(&f2)?)?;
        f1 = f1.with_zero_boundary();
    }
    let u2 = fractional_solve(&b2, &f2, s)?;
    let u1 = fractional_solve(&b1, &f1, s)?;
    let scale = u1.max_abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 0..strip.len() {
        let m = strip.multi_index(i);
        worst = worst.max((u2[i] - u1[m[1]]).abs());
    }
    Ok(ReductionReport {
        s,
        max_deviation: worst / scale,
        nodes_compared: strip.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_constant_matches_oracle() {
        assert!((log_constant_oracle().unwrap() - log_constant()).abs() < 1e-10);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let xs = [0.01, 0.1, 0.2, 0.3, 0.45];
        for (s, rhs, bc) in [
            (0.25, HalfLineRhs::One, HalfLineBc::DirichletOdd),
            (0.75, HalfLineRhs::IndicatorUnit, HalfLineBc::DirichletOdd),
            (0.5, HalfLineRhs::IndicatorUnit, HalfLineBc::DirichletOdd),
            (0.3, HalfLineRhs::IndicatorUnit, HalfLineBc::NeumannEven),
            (0.5, HalfLineRhs::IndicatorUnit, HalfLineBc::NeumannEven),
        ] {
            let p = HalfLineProblem::new(s, rhs, bc).unwrap();
            let q = halfline_inverse_quadrature(&p, &xs).unwrap();
            for (x, v) in xs.iter().zip(q) {
                let c = closed_form_factor(&p) * closed_form_halfline(&p, *x).unwrap();
                assert!((v - c).abs() < 1e-10 * c.abs(), "s={s} {rhs:?} {bc:?} x={x}: {v} vs {c}");
            }
        }
    }

    #[test]
    fn invalid_problems() {
        assert!(HalfLineProblem::new(0.6, HalfLineRhs::One, HalfLineBc::DirichletOdd).is_err());
        assert!(HalfLineProblem::new(0.2, HalfLineRhs::One, HalfLineBc::NeumannEven).is_err());
        let p = HalfLineProblem::new(0.75, HalfLineRhs::IndicatorUnit, HalfLineBc::DirichletOdd).unwrap();
        assert!(closed_form_halfline(&p, 0.7).is_err());
    }

    #[test]
    fn kernel_ordering() {
        let s = 0.4;
        let (x, z) = ([0.2, 0.3], [0.5, 0.1]);
        let d = halfspace_kernel(&x, &z, s, BoundaryCondition::Dirichlet).unwrap();
        let nn = halfspace_kernel(&x, &z, s, BoundaryCondition::Neumann).unwrap();
        let free = frac_laplacian_constant(2, s) * ((0.09f64 + 0.04).powf(-(2.0 + 2.0 * s) / 2.0));
        assert!(0.0 < d && d < free && free < nn);
        let swapped = halfspace_kernel(&z, &x, s, BoundaryCondition::Dirichlet).unwrap();
        assert!((d - swapped).abs() < 1e-14 * d);
        let wall = halfspace_kernel(&[1e-9], &[0.5], s, BoundaryCondition::Dirichlet).unwrap();
        assert!(wall.abs() < 1e-6);
    }

    #[test]
    fn reflection_shapes() {
        let g = Grid::new_1d(1.0, 5).unwrap();
        let u = GridFunction::from_fn(&g, |x| x[0]);
        let r = reflect(&u, Parity::Odd).unwrap();
        let fg = r.values.grid();
        for i in 0..fg.len() {
            assert!((r.values[i] - fg.coord(i)[0]).abs() < 1e-15);
        }
        let one = GridFunction::constant(&g, 1.0);
        assert!(reflect(&one, Parity::Odd).is_err());
        assert!(reflect(&one, Parity::Even).unwrap().values.values().iter().all(|&v| v == 1.0));
        let back = upper_half(&r.values).unwrap();
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn odd_reflection_identity_is_exact() {
        let half = Grid::new_1d(1.0, 33).unwrap();
        let sym = Grid::new(&[-1.0], &[2.0], &[65]).unwrap();
        let bh = laplacian_basis(&half, &[BoundaryCondition::Dirichlet]).unwrap();
        let bs = laplacian_basis(&sym, &[BoundaryCondition::Dirichlet]).unwrap();
        let u = GridFunction::from_fn(&half, |x| x[0] * (1.0 - x[0]) * (2.0 + x[0]).exp());
        assert!(odd_reflection_check(&bh, &bs, &u, 0.35).unwrap() < 1e-8);
        let even = reflect(&GridFunction::from_fn(&half, |x| (2.0 * x[0]).cos()), Parity::Even).unwrap();
        assert!(parity_defect(&bs, &even, 0.6).unwrap() < 1e-12);
    }

    #[test]
    fn strip_reduction() {
        let strip = Grid::new_2d([0.5, 1.0], [9, 33]).unwrap();
        let r = reduction_1d_check(&strip, BoundaryCondition::Dirichlet, |t| (t * 7.0).sin() + t, 0.4).unwrap();
        assert!(r.max_deviation < 1e-8);
        assert!(reduction_1d_check(&strip, BoundaryCondition::Neumann, |_| 1.0, 0.4).is_err());
    }

    #[test]
    fn growth_exponents() {
        assert_eq!(boundary_growth_oracle(0.25).unwrap().exponent, 0.5);
        assert!(boundary_growth_oracle(0.5).unwrap().log_correction);
        assert_eq!(boundary_growth_oracle(0.9).unwrap().exponent, 1.0);
    }
}
