//! Structured box grids and nodal fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node coordinate. In 1D the second component is zero.
pub type Point = [f64; 2];

/// Uniform node grid on an axis-aligned box `Π [origin_d, origin_d + extent_d]`.
///
/// Nodes are ordered with the first axis running fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Vec<f64>,
    extents: Vec<f64>,
    nodes: Vec<usize>,
}

impl Grid {
    pub fn new(origin: &[f64], extents: &[f64], nodes: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if origin.len() != dim || nodes.len() != dim {
            return Err(Error::InvalidGrid(
                "origin, extents and node counts must have the same length".into(),
            ));
        }
        for d in 0..dim {
            if !(extents[d] > 0.0) || !extents[d].is_finite() {
                return Err(Error::InvalidGrid(format!("extent {} on axis {d}", extents[d])));
            }
            if nodes[d] < 3 {
                return Err(Error::InvalidGrid(format!(
                    "{} nodes on axis {d}; at least 3 required",
                    nodes[d]
                )));
            }
            if !origin[d].is_finite() {
                return Err(Error::InvalidGrid(format!("origin {} on axis {d}", origin[d])));
            }
        }
        Ok(Self {
            origin: origin.to_vec(),
            extents: extents.to_vec(),
            nodes: nodes.to_vec(),
        })
    }

    /// `[0, extent]` with `nodes` nodes.
    pub fn new_1d(extent: f64, nodes: usize) -> Result<Self> {
        Self::new(&[0.0], &[extent], &[nodes])
    }

    /// `[0, ex] × [0, ey]`.
    pub fn new_2d(extents: [f64; 2], nodes: [usize; 2]) -> Result<Self> {
        Self::new(&[0.0, 0.0], &extents, &nodes)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Uniform discrete L² weight `Π h_d`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.spacing(d)).product()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        match self.dim() {
            1 => multi[0],
            _ => multi[0] + self.nodes[0] * multi[1],
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.dim() {
            1 => [idx, 0],
            _ => [idx % self.nodes[0], idx / self.nodes[0]],
        }
    }

    /// Coordinate along one axis of the node with axis index `i`.
    ///
    /// Computed as `origin + i·extent/(n−1)`, so it is exactly reproducible.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.extents[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn coord(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut p = [0.0; 2];
        for (d, pd) in p.iter_mut().enumerate().take(self.dim()) {
            *pd = self.axis_coord(d, m[d]);
        }
        p
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim()).any(|d| m[d] == 0 || m[d] == self.nodes[d] - 1)
    }

    /// True on every node lying on a box face.
    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_boundary(i)).collect()
    }

    /// The grid of `x ↦ x / factor`: every node coordinate divided by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::OutOfRange {
                name: "factor",
                value: factor,
                range: "(0, ∞)",
            });
        }
        let origin: Vec<f64> = self.origin.iter().map(|o| o / factor).collect();
        let extents: Vec<f64> = self.extents.iter().map(|e| e / factor).collect();
        Self::new(&origin, &extents, &self.nodes)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coord(i), self.coord(j));
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Distance from node `idx` to the nearest box face.
    pub fn distance_to_boundary(&self, idx: usize) -> f64 {
        let p = self.coord(idx);
        (0..self.dim())
            .map(|d| (p[d] - self.origin[d]).min(self.origin[d] + self.extents[d] - p[d]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Node closest to `p`.
    pub fn nearest(&self, p: &[f64]) -> usize {
        let mut m = [0usize; 2];
        for d in 0..self.dim() {
            let t = ((p[d] - self.origin[d]) / self.spacing(d)).round();
            m[d] = t.clamp(0.0, (self.nodes[d] - 1) as f64) as usize;
        }
        self.index(&m)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids(format!(
                "nodes {:?} vs {:?}",
                self.nodes, other.nodes
            )))
        }
    }
}

/// Real values at every node of a grid.
///
/// Fields used with Dirichlet operators carry zeros on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.coord(i);
                f(&p[..grid.dim()])
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zeroes boundary entries.
    pub fn with_zero_boundary(mut self) -> Self {
        for i in 0..self.values.len() {
            if self.grid.is_boundary(i) {
                self.values[i] = 0.0;
            }
        }
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + alpha * b)
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Discrete L² inner product `Σ u_i v_i · h^dim`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(dot * self.grid.cell_volume())
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = self.values.iter().map(|v| v * v).sum();
        (sq * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mean with respect to the uniform node measure.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn remove_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Relative distance `‖self − other‖ / ‖other‖` (absolute if `other` vanishes).
    pub fn rel_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?.norm();
        let r = reference.norm();
        Ok(if r > 0.0 { diff / r } else { diff })
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
