//! Sparse storage and the direct solvers used by the time-stepping and
//! resolvent routes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// columns sorted within each row.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let j = r[k].0;
                let mut v = 0.0;
                while k < r.len() && r[k].0 == j {
                    v += r[k].1;
                    k += 1;
                }
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `max |M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn gershgorin_max(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Cholesky factor of a symmetric positive definite banded matrix, stored by
/// lower diagonals: `l[i][k] = L[i, i − k]` for `k ≤ bandwidth`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors `shift·I + scale·M`.
    pub fn factor_shifted(m: &CsrMatrix, scale: f64, shift: f64) -> Result<Self> {
        let n = m.size();
        let bw = m.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in m.row(i) {
                if j <= i {
                    l[i * w + (i - j)] += scale * v;
                }
            }
            l[i * w] += shift;
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = l[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if j == i {
                    if !(sum > 0.0) {
                        return Err(Error::LinearSolve(format!(
                            "matrix not positive definite at pivot {i} ({sum:e})"
                        )));
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        Self::factor_shifted(m, 1.0, 0.0)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        x
    }
}

/// Solves the symmetric tridiagonal system with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i + 1`).
pub fn solve_tridiagonal(d: &[f64], e: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    let mut piv = d[0];
    if piv == 0.0 {
        return Err(Error::LinearSolve("zero pivot in tridiagonal solve".into()));
    }
    x[0] /= piv;
    for i in 1..n {
        c[i - 1] = e[i - 1] / piv;
        piv = d[i] - e[i - 1] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot at row {i}")));
        }
        x[i] = (x[i] - e[i - 1] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Smallest eigenvalue of an SPD matrix by inverse iteration.
pub fn smallest_eigenvalue(m: &CsrMatrix, iterations: usize) -> Result<f64> {
    let chol = BandedCholesky::factor(m)?;
    let n = m.size();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let mut est = 0.0;
    for _ in 0..iterations {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let w = chol.solve(&v);
        let dot: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        est = 1.0 / dot;
        v = w;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn banded_cholesky_solves() {
        // 2D 5-point Laplacian: bandwidth 4.
        let k = 4;
        let n = k * k;
        let mut t = Vec::new();
        for j in 0..k {
            for i in 0..k {
                let p = i + k * j;
                t.push((p, p, 4.0));
                if i + 1 < k {
                    t.push((p, p + 1, -1.0));
                    t.push((p + 1, p, -1.0));
                }
                if j + 1 < k {
                    t.push((p, p + k, -1.0));
                    t.push((p + k, p, -1.0));
                }
            }
        }
        let m = CsrMatrix::from_triplets(n, &t);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.matvec(&x);
        let y = BandedCholesky::factor(&m).unwrap().solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_matches_banded() {
        let m = laplace(9);
        let b: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let x1 = BandedCholesky::factor(&m).unwrap().solve(&b);
        let x2 = solve_tridiagonal(&[2.0; 9], &[-1.0; 8], &b).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(BandedCholesky::factor(&m).is_err());
    }

    #[test]
    fn inverse_iteration_finds_lowest_mode() {
        let n = 31;
        let lam = smallest_eigenvalue(&laplace(n), 50).unwrap();
        let h = std::f64::consts::PI / (n + 1) as f64;
        let exact = 4.0 * (h / 2.0).sin().powi(2);
        assert!((lam - exact).abs() < 1e-10 * exact.max(1.0));
    }
}
