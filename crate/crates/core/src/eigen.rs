//! Full eigendecomposition of the discrete operator.
//!
//! Eigenvectors are stored orthonormal in the Euclidean sense; the
//! discrete-L² orthonormal eigenfunctions are `φ_k = v_k / √vol`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::{assemble_per_axis, BoundaryCondition, DiscreteOperator};
use crate::coefficient::{CoefficientField, CoefficientSpec};

/// Largest operator handled by the dense solver.
pub const DENSE_LIMIT: usize = 5000;

const RESIDUAL_TOL: f64 = 1e-8;
const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
struct AxisBasis {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense { vectors: DMatrix<f64> },
    /// `M = a11·T_x ⊗ I + a22·I ⊗ T_y` for constant diagonal `A` on a 2D box;
    /// `modes[k] = (i, j)` pairs the 1D modes in ascending order of `λ`.
    Tensor {
        x: AxisBasis,
        y: AxisBasis,
        a: (f64, f64),
        modes: Vec<(usize, usize)>,
    },
}

/// Ascending eigenpairs of a [`DiscreteOperator`].
#[derive(Debug, Clone)]
pub struct EigenBasis {
    op: DiscreteOperator,
    values: Vec<f64>,
    repr: Repr,
}

/// Discrete-L² coefficients `u_k = ⟨u, φ_k⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub values: Vec<f64>,
}

impl SpectralCoefficients {
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c * c).sum()
    }
}

/// Eigendecomposition, using the tensor-product fast path when the operator
/// separates (2D, constant diagonal `A`).
pub fn eigendecompose(op: &DiscreteOperator) -> Result<EigenBasis> {
    if op.grid().dim() == 2 {
        if let Some(a) = op.coefficient().constant_diagonal() {
            return tensor(op, a);
        }
    }
    eigendecompose_dense(op)
}

/// Dense symmetric eigendecomposition regardless of structure.
pub fn eigendecompose_dense(op: &DiscreteOperator) -> Result<EigenBasis> {
    let n = op.size();
    if n > DENSE_LIMIT {
        return Err(Error::Unsupported(format!(
            "{n} unknowns exceed the dense eigensolver limit of {DENSE_LIMIT}"
        )));
    }
    let (values, vectors) = dense_pairs(op.matrix().to_dense(), op.is_pure_neumann())?;
    let basis = EigenBasis {
        op: op.clone(),
        values,
        repr: Repr::Dense { vectors },
    };
    basis.verify()?;
    Ok(basis)
}

fn dense_pairs(m: DMatrix<f64>, constant_kernel: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let eig = m
        .try_symmetric_eigen(1e-15, 0)
        .ok_or_else(|| Error::Eigen("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        normalize_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    if constant_kernel {
        values[0] = 0.0;
        vectors.set_column(0, &DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    }
    Ok((values, vectors))
}

/// Makes the sum of entries positive; ties fall back to the first nonzero entry.
fn normalize_sign(v: &mut DVector<f64>) {
    let sum: f64 = v.iter().sum();
    let scale = v.amax();
    let flip = if sum.abs() > 1e-10 * scale * (v.len() as f64).sqrt() {
        sum < 0.0
    } else {
        v.iter().find(|x| x.abs() > 1e-8 * scale).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.neg_mut();
    }
}

fn tensor(op: &DiscreteOperator, a: (f64, f64)) -> Result<EigenBasis> {
    let grid = op.grid();
    let axis = |d: usize| -> Result<AxisBasis> {
        let g = Grid::new(&[grid.origin()[d]], &[grid.extents()[d]], &[grid.nodes()[d]])?;
        let c = CoefficientField::sample(&g, &CoefficientSpec::Identity)?;
        let op1 = assemble_per_axis(&g, &c, &[op.bcs()[d]])?;
        let (values, vectors) = dense_pairs(op1.matrix().to_dense(), op1.is_pure_neumann())?;
        Ok(AxisBasis { values, vectors })
    };
    let (x, y) = (axis(0)?, axis(1)?);
    let mut modes: Vec<(usize, usize)> = (0..y.values.len())
        .flat_map(|j| (0..x.values.len()).map(move |i| (i, j)))
        .collect();
    let lam = |&(i, j): &(usize, usize)| a.0 * x.values[i] + a.1 * y.values[j];
    modes.sort_by(|p, q| lam(p).total_cmp(&lam(q)).then(p.1.cmp(&q.1)).then(p.0.cmp(&q.0)));
    let values = modes.iter().map(lam).collect();
    let basis = EigenBasis {
        op: op.clone(),
        values,
        repr: Repr::Tensor { x, y, a, modes },
    };
    basis.verify()?;
    Ok(basis)
}

impl EigenBasis {
    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Smallest nonzero eigenvalue.
    pub fn lambda_min_positive(&self) -> f64 {
        self.values.iter().copied().find(|&l| l > 0.0).unwrap_or(f64::NAN)
    }

    pub fn is_pure_neumann(&self) -> bool {
        self.op.is_pure_neumann()
    }

    pub fn bc(&self) -> Option<BoundaryCondition> {
        self.op.bc()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid().cell_volume()
    }

    pub fn is_tensor(&self) -> bool {
        matches!(self.repr, Repr::Tensor { .. })
    }

    /// Euclidean-normalized eigenvector `k` on the active nodes.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { vectors } => vectors.column(k).iter().copied().collect(),
            Repr::Tensor { x, y, modes, .. } => {
                let (i, j) = modes[k];
                let nx = x.values.len();
                (0..self.len())
                    .map(|p| x.vectors[(p % nx, i)] * y.vectors[(p / nx, j)])
                    .collect()
            }
        }
    }

    /// The L²-normalized eigenfunction `φ_k` on the full grid.
    pub fn eigenfunction(&self, k: usize) -> GridFunction {
        let scale = 1.0 / self.cell_volume().sqrt();
        let v: Vec<f64> = self.vector(k).iter().map(|x| x * scale).collect();
        self.op.extend(&v).expect("basis vector has operator size")
    }

    /// Euclidean coefficients `c_k = v_k · x` of an active-node vector.
    pub fn analyze(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { vectors } => (vectors.transpose() * DVector::from_column_slice(x)).data.into(),
            Repr::Tensor { x: bx, y: by, modes, .. } => {
                let c = bx.vectors.transpose() * self.reshape(x) * &by.vectors;
                modes.iter().map(|&(i, j)| c[(i, j)]).collect()
            }
        }
    }

    /// `Σ c_k v_k`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { vectors } => (vectors * DVector::from_column_slice(c)).data.into(),
            Repr::Tensor { x, y, modes, .. } => {
                let mut grid_c = DMatrix::zeros(x.values.len(), y.values.len());
                for (k, &(i, j)) in modes.iter().enumerate() {
                    grid_c[(i, j)] = c[k];
                }
                let u = &x.vectors * grid_c * y.vectors.transpose();
                u.as_slice().to_vec()
            }
        }
    }

    /// `V diag(g(λ_k)) Vᵀ x`.
    pub fn apply_filter(&self, x: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
        let weights: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        self.apply_weights(x, &weights)
    }

    /// `V diag(w) Vᵀ x` with one weight per eigenpair.
    pub fn apply_weights(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut c = self.analyze(x);
        for (ck, wk) in c.iter_mut().zip(w) {
            *ck *= wk;
        }
        self.synthesize(&c)
    }

    /// Selected rows of `V diag(w) Vᵀ`, one output row per entry of `rows`
    /// (active positions).
    pub fn filter_rows(&self, rows: &[usize], w: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        match &self.repr {
            Repr::Dense { vectors } => {
                let mut left = DMatrix::zeros(rows.len(), n);
                for (r, &p) in rows.iter().enumerate() {
                    for k in 0..n {
                        left[(r, k)] = vectors[(p, k)] * w[k];
                    }
                }
                left * vectors.transpose()
            }
            Repr::Tensor { .. } => {
                let mut out = DMatrix::zeros(rows.len(), n);
                let mut e = vec![0.0; n];
                for (r, &p) in rows.iter().enumerate() {
                    e[p] = 1.0;
                    let row = self.apply_weights(&e, w);
                    e[p] = 0.0;
                    out.row_mut(r).copy_from_slice(&row);
                }
                out
            }
        }
    }

    /// Full `V diag(w) Vᵀ`.
    pub fn filter_matrix(&self, w: &[f64]) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense { vectors } => {
                let mut left = vectors.clone();
                for (k, mut col) in left.column_iter_mut().enumerate() {
                    col *= w[k];
                }
                left * vectors.transpose()
            }
            Repr::Tensor { .. } => {
                let rows: Vec<usize> = (0..self.len()).collect();
                self.filter_rows(&rows, w)
            }
        }
    }

    /// Discrete-L² spectral coefficients of a full-grid field.
    pub fn coefficients(&self, u: &GridFunction) -> Result<SpectralCoefficients> {
        let x = self.op.restrict(u)?;
        let scale = self.cell_volume().sqrt();
        Ok(SpectralCoefficients {
            values: self.analyze(&x).into_iter().map(|c| c * scale).collect(),
        })
    }

    /// Inverse of [`coefficients`](Self::coefficients).
    pub fn field(&self, coeffs: &SpectralCoefficients) -> Result<GridFunction> {
        if coeffs.values.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                found: coeffs.values.len(),
            });
        }
        let scale = 1.0 / self.cell_volume().sqrt();
        let c: Vec<f64> = coeffs.values.iter().map(|v| v * scale).collect();
        self.op.extend(&self.synthesize(&c))
    }

    /// Worst `‖M v_k − λ_k v_k‖₂` and worst `|v_jᵀ v_k − δ_jk|`.
    pub fn diagnostics(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Dense { vectors } => {
                let m = self.op.matrix();
                let mut res: f64 = 0.0;
                for k in 0..self.len() {
                    let v: Vec<f64> = vectors.column(k).iter().copied().collect();
                    let mv = m.matvec(&v);
                    let r: f64 = mv
                        .iter()
                        .zip(&v)
                        .map(|(a, b)| (a - self.values[k] * b).powi(2))
                        .sum();
                    res = res.max(r.sqrt());
                }
                (res, ortho_defect(vectors))
            }
            Repr::Tensor { x, y, a, .. } => {
                // Residuals of separable modes are bounded by the 1D residuals.
                let axis_res = |b: &AxisBasis, d: usize, coef: f64| {
                    let g = self.grid();
                    let h2 = g.spacing(d).powi(2);
                    let n = b.values.len();
                    let neumann = self.op.bcs()[d] == BoundaryCondition::Neumann;
                    let mut worst: f64 = 0.0;
                    for k in 0..n {
                        let v = b.vectors.column(k);
                        let mut r2 = 0.0;
                        for i in 0..n {
                            let mut mv = 0.0;
                            let mut diag = 0.0;
                            if i > 0 {
                                mv -= v[i - 1];
                                diag += 1.0;
                            } else if !neumann {
                                diag += 1.0;
                            }
                            if i + 1 < n {
                                mv -= v[i + 1];
                                diag += 1.0;
                            } else if !neumann {
                                diag += 1.0;
                            }
                            mv += diag * v[i];
                            r2 += (mv / h2 - b.values[k] * v[i]).powi(2);
                        }
                        worst = worst.max(r2.sqrt());
                    }
                    coef * worst
                };
                let res = axis_res(x, 0, a.0) + axis_res(y, 1, a.1);
                let ortho = ortho_defect(&x.vectors) + ortho_defect(&y.vectors);
                (res, ortho)
            }
        }
    }

    fn verify(&self) -> Result<()> {
        let (res, ortho) = self.diagnostics();
        let lmax = self.lambda_max().abs().max(1.0);
        if res > RESIDUAL_TOL * lmax || ortho > ORTHO_TOL {
            return Err(Error::Eigen(format!(
                "residual {res:e} (limit {:e}), orthonormality defect {ortho:e}",
                RESIDUAL_TOL * lmax
            )));
        }
        if !self.is_pure_neumann() && !(self.values[0] > 0.0) {
            return Err(Error::Eigen(format!(
                "Dirichlet operator has nonpositive eigenvalue {}",
                self.values[0]
            )));
        }
        Ok(())
    }

    fn reshape(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.repr {
            Repr::Tensor { x: bx, y: by, .. } => {
                DMatrix::from_column_slice(bx.values.len(), by.values.len(), x)
            }
            Repr::Dense { .. } => DMatrix::from_column_slice(x.len(), 1, x),
        }
    }
}

fn ortho_defect(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
