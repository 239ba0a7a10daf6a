//! Coefficient matrices `A(x)` and their ellipticity bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Analytic description of a symmetric coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// `A ≡ I`.
    Identity,
    /// Constant `[[a11, a12], [a12, a22]]`; in 1D only `a11` is used.
    Constant { a11: f64, a12: f64, a22: f64 },
    /// `A(x) = (1 + amplitude · Π_d sin(2π · frequency · x_d)) · I`.
    Sine { amplitude: f64, frequency: f64 },
}

impl CoefficientSpec {
    /// `[a11, a12, a22]` at a point.
    pub fn eval(&self, x: &[f64]) -> [f64; 3] {
        match *self {
            CoefficientSpec::Identity => [1.0, 0.0, 1.0],
            CoefficientSpec::Constant { a11, a12, a22 } => [a11, a12, a22],
            CoefficientSpec::Sine {
                amplitude,
                frequency,
            } => {
                let prod: f64 = x
                    .iter()
                    .map(|&xd| (2.0 * std::f64::consts::PI * frequency * xd).sin())
                    .product();
                let a = 1.0 + amplitude * prod;
                [a, 0.0, a]
            }
        }
    }

    /// Bounds the field is declared to satisfy.
    pub fn declared_bounds(&self, dim: usize) -> (f64, f64) {
        match *self {
            CoefficientSpec::Identity => (1.0, 1.0),
            CoefficientSpec::Constant { a11, a12, a22 } => {
                if dim == 1 {
                    (a11, a11)
                } else {
                    sym_eigs(a11, a12, a22)
                }
            }
            CoefficientSpec::Sine { amplitude, .. } => (1.0 - amplitude.abs(), 1.0 + amplitude.abs()),
        }
    }

    /// The field of `x ↦ A(factor · x)`.
    pub fn rescaled(&self, factor: f64) -> Self {
        match *self {
            CoefficientSpec::Sine {
                amplitude,
                frequency,
            } => CoefficientSpec::Sine {
                amplitude,
                frequency: frequency * factor,
            },
            ref other => other.clone(),
        }
    }

    /// Whether `A` is constant in space.
    pub fn is_constant(&self) -> bool {
        !matches!(self, CoefficientSpec::Sine { amplitude, .. } if *amplitude != 0.0)
    }
}

fn sym_eigs(a11: f64, a12: f64, a22: f64) -> (f64, f64) {
    let m = 0.5 * (a11 + a22);
    let r = (0.25 * (a11 - a22).powi(2) + a12 * a12).sqrt();
    (m - r, m + r)
}

/// Nodal samples of a symmetric `A` with declared ellipticity constants `Λ₁ ≤ Λ₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    /// `[a11, a12, a22]` per node.
    samples: Vec<[f64; 3]>,
    lambda1: f64,
    lambda2: f64,
    spec: Option<CoefficientSpec>,
}

impl CoefficientField {
    pub fn sample(grid: &Grid, spec: &CoefficientSpec) -> Result<Self> {
        let samples = (0..grid.len())
            .map(|i| {
                let p = grid.coord(i);
                spec.eval(&p[..grid.dim()])
            })
            .collect();
        let (lambda1, lambda2) = spec.declared_bounds(grid.dim());
        let mut field = Self::from_samples(grid, samples, lambda1, lambda2)?;
        field.spec = Some(spec.clone());
        Ok(field)
    }

    /// Builds a field from full `[[a11, a12], [a21, a22]]` nodal samples.
    ///
    /// Rejects non-symmetric samples and non-positive `Λ₁`.
    pub fn from_matrices(grid: &Grid, matrices: &[[[f64; 2]; 2]], lambda1: f64, lambda2: f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(matrices.len());
        for (i, m) in matrices.iter().enumerate() {
            if m[0][1] != m[1][0] {
                return Err(Error::InvalidCoefficient(format!(
                    "sample {i} is not symmetric: a12 = {}, a21 = {}",
                    m[0][1], m[1][0]
                )));
            }
            samples.push([m[0][0], m[0][1], m[1][1]]);
        }
        Self::from_samples(grid, samples, lambda1, lambda2)
    }

    fn from_samples(grid: &Grid, samples: Vec<[f64; 3]>, lambda1: f64, lambda2: f64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: samples.len(),
            });
        }
        if !(lambda1 > 0.0) || lambda2 < lambda1 || !lambda2.is_finite() {
            return Err(Error::InvalidCoefficient(format!(
                "ellipticity constants Λ₁ = {lambda1}, Λ₂ = {lambda2}"
            )));
        }
        Ok(Self {
            dim: grid.dim(),
            samples,
            lambda1,
            lambda2,
            spec: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn spec(&self) -> Option<&CoefficientSpec> {
        self.spec.as_ref()
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    /// Diffusivity on the face between nodes `i` and `j` along `axis`
    /// (arithmetic mean of the nodal values).
    pub fn face(&self, i: usize, j: usize, axis: usize) -> f64 {
        let c = if axis == 0 { 0 } else { 2 };
        0.5 * (self.samples[i][c] + self.samples[j][c])
    }

    pub fn has_cross_terms(&self) -> bool {
        self.dim == 2 && self.samples.iter().any(|s| s[1] != 0.0)
    }

    /// `Some((a11, a22))` when every sample is the same diagonal matrix.
    pub fn constant_diagonal(&self) -> Option<(f64, f64)> {
        let first = self.samples[0];
        if first[1] != 0.0 || self.samples.iter().any(|s| *s != first) {
            None
        } else {
            Some((first[0], first[2]))
        }
    }
}

/// Observed Rayleigh-quotient range of the sampled `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub lambda1_observed: f64,
    pub lambda2_observed: f64,
    pub lambda1_declared: f64,
    pub lambda2_declared: f64,
    pub pass: bool,
}

/// Rayleigh quotients `A ξ·ξ` over all samples and a direction set:
/// 64 directions on the unit circle in 2D, `±1` in 1D.
pub fn ellipticity_check(a: &CoefficientField) -> EllipticityReport {
    let dirs: Vec<[f64; 2]> = if a.dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..64)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                [t.cos(), t.sin()]
            })
            .collect()
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &a.samples {
        for d in &dirs {
            let q = if a.dim == 1 {
                s[0] * d[0] * d[0]
            } else {
                s[0] * d[0] * d[0] + 2.0 * s[1] * d[0] * d[1] + s[2] * d[1] * d[1]
            };
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    let slack = 1e-12 * a.lambda2.abs().max(1.0);
    EllipticityReport {
        lambda1_observed: lo,
        lambda2_observed: hi,
        lambda1_declared: a.lambda1,
        lambda2_declared: a.lambda2,
        pass: a.lambda1 > 0.0 && lo >= a.lambda1 - slack && hi <= a.lambda2 + slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_bounds() {
        let g = Grid::new_2d([1.0, 1.0], [5, 5]).unwrap();
        let r = ellipticity_check(&CoefficientField::sample(&g, &CoefficientSpec::Identity).unwrap());
        assert!((r.lambda1_observed - 1.0).abs() < 1e-15);
        assert!((r.lambda2_observed - 1.0).abs() < 1e-15);
        assert!(r.pass);
    }

    #[test]
    fn diagonal_constant_bounds() {
        let g = Grid::new_2d([1.0, 1.0], [4, 4]).unwrap();
        let spec = CoefficientSpec::Constant {
            a11: 2.0,
            a12: 0.0,
            a22: 0.5,
        };
        let r = ellipticity_check(&CoefficientField::sample(&g, &spec).unwrap());
        assert!((r.lambda1_observed - 0.5).abs() < 1e-14);
        assert!((r.lambda2_observed - 2.0).abs() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn sine_extremes_are_sampled() {
        let g = Grid::new_1d(1.0, 17).unwrap();
        let spec = CoefficientSpec::Sine {
            amplitude: 0.5,
            frequency: 1.0,
        };
        let r = ellipticity_check(&CoefficientField::sample(&g, &spec).unwrap());
        assert!((r.lambda1_observed - 0.5).abs() < 1e-14);
        assert!((r.lambda2_observed - 1.5).abs() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn rejects_asymmetric_and_nonpositive() {
        let g = Grid::new_1d(1.0, 3).unwrap();
        let asym = vec![[[1.0, 0.1], [0.0, 1.0]]; 3];
        assert!(CoefficientField::from_matrices(&g, &asym, 0.5, 2.0).is_err());
        let sym = vec![[[1.0, 0.0], [0.0, 1.0]]; 3];
        assert!(CoefficientField::from_matrices(&g, &sym, 0.0, 2.0).is_err());
    }

    #[test]
    fn understated_bounds_fail_the_check() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let m = vec![[[3.0, 0.0], [0.0, 3.0]]; 9];
        let f = CoefficientField::from_matrices(&g, &m, 1.0, 2.0).unwrap();
        assert!(!ellipticity_check(&f).pass);
    }
}
