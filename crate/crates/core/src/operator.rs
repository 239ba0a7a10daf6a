//! Flux-form finite-difference assembly of `L = −div(A ∇)`.

use serde::{Deserialize, Serialize};

use crate::coefficient::{ellipticity_check, CoefficientField, EllipticityReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// `u = 0` on the face; boundary nodes are eliminated.
    Dirichlet,
    /// Zero conormal flux `A∇u·ν = 0`; boundary nodes stay unknowns.
    Neumann,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            other => Err(Error::Parse(format!("unknown boundary condition `{other}`"))),
        }
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
        })
    }
}

/// The assembled symmetric matrix acting on the active nodes.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    bcs: Vec<BoundaryCondition>,
    coef: CoefficientField,
    matrix: CsrMatrix,
    active: Vec<usize>,
    position: Vec<Option<usize>>,
    ellipticity: EllipticityReport,
}

/// Same boundary condition on every face.
pub fn assemble(grid: &Grid, coef: &CoefficientField, bc: BoundaryCondition) -> Result<DiscreteOperator> {
    assemble_per_axis(grid, coef, &vec![bc; grid.dim()])
}

/// One boundary condition per axis, applied to both faces normal to it.
pub fn assemble_per_axis(
    grid: &Grid,
    coef: &CoefficientField,
    bcs: &[BoundaryCondition],
) -> Result<DiscreteOperator> {
    if bcs.len() != grid.dim() {
        return Err(Error::ShapeMismatch {
            expected: grid.dim(),
            found: bcs.len(),
        });
    }
    if coef.dim() != grid.dim() || coef.samples().len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: coef.samples().len(),
        });
    }
    let ellipticity = ellipticity_check(coef);
    if !ellipticity.pass {
        return Err(Error::InvalidCoefficient(format!(
            "sampled A has Rayleigh quotients in [{}, {}], outside the declared [{}, {}]",
            ellipticity.lambda1_observed,
            ellipticity.lambda2_observed,
            ellipticity.lambda1_declared,
            ellipticity.lambda2_declared
        )));
    }
    if coef.has_cross_terms() {
        return Err(Error::Unsupported(
            "off-diagonal coefficients a12 ≠ 0 are not supported by the 5-point stencil".into(),
        ));
    }

    let nodes = grid.nodes();
    let is_active = |idx: usize| {
        let m = grid.multi_index(idx);
        (0..grid.dim()).all(|d| bcs[d] == BoundaryCondition::Neumann || (m[d] > 0 && m[d] < nodes[d] - 1))
    };
    let mut position = vec![None; grid.len()];
    let mut active = Vec::new();
    for idx in 0..grid.len() {
        if is_active(idx) {
            position[idx] = Some(active.len());
            active.push(idx);
        }
    }

    let mut triplets = Vec::with_capacity(active.len() * (1 + 2 * grid.dim()));
    for (row, &p) in active.iter().enumerate() {
        let m = grid.multi_index(p);
        let mut diag = 0.0;
        for d in 0..grid.dim() {
            let h2 = grid.spacing(d).powi(2);
            for step in [-1i64, 1] {
                let k = m[d] as i64 + step;
                if k < 0 || k >= nodes[d] as i64 {
                    continue; // no face beyond the box: zero flux
                }
                let mut mq = m;
                mq[d] = k as usize;
                let q = grid.index(&mq);
                let a = coef.face(p, q, d) / h2;
                diag += a;
                if let Some(col) = position[q] {
                    triplets.push((row, col, -a));
                }
            }
        }
        triplets.push((row, row, diag));
    }
    let matrix = CsrMatrix::from_triplets(active.len(), &triplets);

    Ok(DiscreteOperator {
        grid: grid.clone(),
        bcs: bcs.to_vec(),
        coef: coef.clone(),
        matrix,
        active,
        position,
        ellipticity,
    })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bcs(&self) -> &[BoundaryCondition] {
        &self.bcs
    }

    /// The common boundary condition, or `None` for mixed per-axis conditions.
    pub fn bc(&self) -> Option<BoundaryCondition> {
        let first = self.bcs[0];
        self.bcs.iter().all(|&b| b == first).then_some(first)
    }

    /// True when constants lie in the kernel (Neumann on every face).
    pub fn is_pure_neumann(&self) -> bool {
        self.bcs.iter().all(|&b| b == BoundaryCondition::Neumann)
    }

    pub fn coefficient(&self) -> &CoefficientField {
        &self.coef
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn ellipticity(&self) -> &EllipticityReport {
        &self.ellipticity
    }

    /// Grid indices of the unknowns, in matrix order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn size(&self) -> usize {
        self.active.len()
    }

    pub fn position(&self, grid_index: usize) -> Option<usize> {
        self.position[grid_index]
    }

    /// Active-node values of `u`.
    pub fn restrict(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.grid.check_same(u.grid())?;
        Ok(self.active.iter().map(|&i| u[i]).collect())
    }

    /// Full-grid field from active values, zero on eliminated nodes.
    pub fn extend(&self, values: &[f64]) -> Result<GridFunction> {
        if values.len() != self.active.len() {
            return Err(Error::ShapeMismatch {
                expected: self.active.len(),
                found: values.len(),
            });
        }
        let mut full = vec![0.0; self.grid.len()];
        for (&i, &v) in self.active.iter().zip(values) {
            full[i] = v;
        }
        GridFunction::new(&self.grid, full)
    }
}

/// `M u` on the active nodes; eliminated nodes of the result are zero.
pub fn apply(op: &DiscreteOperator, u: &GridFunction) -> Result<GridFunction> {
    if u.len() != op.grid.len() {
        return Err(Error::ShapeMismatch {
            expected: op.grid.len(),
            found: u.len(),
        });
    }
    let x = op.restrict(u)?;
    op.extend(&op.matrix.matvec(&x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::CoefficientSpec;

    fn op1d(n: usize, bc: BoundaryCondition, spec: &CoefficientSpec) -> DiscreteOperator {
        let g = Grid::new_1d(1.0, n).unwrap();
        let c = CoefficientField::sample(&g, spec).unwrap();
        assemble(&g, &c, bc).unwrap()
    }

    #[test]
    fn five_node_dirichlet_stencil() {
        let op = op1d(5, BoundaryCondition::Dirichlet, &CoefficientSpec::Identity);
        let m = op.matrix().to_dense();
        assert_eq!(m.nrows(), 3);
        for i in 0..3 {
            assert_eq!(m[(i, i)], 32.0);
            if i + 1 < 3 {
                assert_eq!(m[(i, i + 1)], -16.0);
                assert_eq!(m[(i + 1, i)], -16.0);
            }
        }
        assert_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn neumann_annihilates_constants() {
        let spec = CoefficientSpec::Sine {
            amplitude: 0.5,
            frequency: 1.0,
        };
        let op = op1d(17, BoundaryCondition::Neumann, &spec);
        let ones = vec![1.0; op.size()];
        assert!(op.matrix().matvec(&ones).iter().all(|v| v.abs() < 1e-12 * op.matrix().gershgorin_max()));
        assert_eq!(op.matrix().asymmetry(), 0.0);
    }

    #[test]
    fn sine_is_a_discrete_eigenvector() {
        let n = 33;
        let op = op1d(n, BoundaryCondition::Dirichlet, &CoefficientSpec::Identity);
        let u = GridFunction::from_fn(op.grid(), |x| (std::f64::consts::PI * x[0]).sin()).with_zero_boundary();
        let h = op.grid().spacing(0);
        let lam = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let mu = apply(&op, &u).unwrap();
        for i in 1..n - 1 {
            assert!((mu[i] - lam * u[i]).abs() < 1e-10 * lam);
        }
    }

    #[test]
    fn mixed_conditions_keep_neumann_faces() {
        let g = Grid::new_2d([1.0, 1.0], [5, 6]).unwrap();
        let c = CoefficientField::sample(&g, &CoefficientSpec::Identity).unwrap();
        let op = assemble_per_axis(&g, &c, &[BoundaryCondition::Neumann, BoundaryCondition::Dirichlet]).unwrap();
        assert_eq!(op.size(), 5 * 4);
        assert!(op.bc().is_none());
        assert!(!op.is_pure_neumann());
    }

    #[test]
    fn cross_terms_are_rejected() {
        let g = Grid::new_2d([1.0, 1.0], [4, 4]).unwrap();
        let spec = CoefficientSpec::Constant {
            a11: 2.0,
            a12: 0.5,
            a22: 2.0,
        };
        let c = CoefficientField::sample(&g, &spec).unwrap();
        assert!(matches!(
            assemble(&g, &c, BoundaryCondition::Dirichlet),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn shape_mismatch_in_apply() {
        let op = op1d(9, BoundaryCondition::Dirichlet, &CoefficientSpec::Identity);
        let other = GridFunction::zeros(&Grid::new_1d(1.0, 10).unwrap());
        assert!(apply(&op, &other).is_err());
    }
}
