//! Kernels of functions of `L`, stored as densities (matrix entries divided
//! by the cell volume) so that power-law exponents match the continuum.
//!
//! Every kernel here is a spectral filter `V diag(w) Vᵀ / vol`; only the
//! weights differ:
//!
//! | kernel  | weight `w(λ)` |
//! |---------|---------------|
//! | `W_t`   | `e^{−tλ}` |
//! | `K_s`   | `(1/(2|Γ(−s)|)) ∫ (e^{−tλ} − 1) dt/t^{1+s}` (off-diagonal) |
//! | `G_s`   | `λ^{−s}` or `(1/Γ(s)) ∫ e^{−tλ} dt/t^{1−s}` |
//! | `P_y^s` | `(y^{2s}/(4^s Γ(s))) ∫ e^{−y²/4t} e^{−tλ} dt/t^{1+s}` |

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eigen::EigenBasis;
use crate::error::{check_fraction, Error, Result};
use crate::fit::{fit_line, fit_log, fit_loglog, ExponentFit};
use crate::grid::{Grid, GridFunction};
use crate::heat::{calibration_residuals, inverse_power_scalar, CALIBRATION_TOL};
use crate::quadrature::{PowerWeight, SingularQuadrature};
use crate::special::{bessel_k, gamma, gamma_neg};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Heat { t: f64 },
    Ks { s: f64 },
    KsNeumann { s: f64 },
    Gs { s: f64 },
    Poisson { s: f64, y: f64 },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Heat { .. } => "heat",
            Self::Ks { .. } => "ks",
            Self::KsNeumann { .. } => "ks_neumann",
            Self::Gs { .. } => "gs",
            Self::Poisson { .. } => "poisson",
        }
    }

    /// The fractional power, when the kernel has one.
    pub fn s(&self) -> Option<f64> {
        match *self {
            Self::Heat { .. } => None,
            Self::Ks { s } | Self::KsNeumann { s } | Self::Gs { s } | Self::Poisson { s, .. } => Some(s),
        }
    }
}

/// Selected rows of a kernel on the active nodes. `rows` holds active
/// positions; columns run over all active nodes.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    kind: KernelKind,
    grid: Grid,
    active: Vec<usize>,
    rows: Vec<usize>,
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Active positions of the stored rows.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Grid indices of the columns (the active nodes).
    pub fn columns(&self) -> &[usize] {
        &self.active
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.active.len()
    }

    /// `K(x_{rows[r]}, x_c)` for stored row `r` and active column `c`.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[(r, c)]
    }

    fn scale(&self) -> f64 {
        self.entries.amax()
    }

    /// `max |K(x,z) − K(z,x)| / max |K|` over pairs of stored rows.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, &pa) in self.rows.iter().enumerate() {
            for (b, &pb) in self.rows.iter().enumerate().skip(a + 1) {
                worst = worst.max((self.entries[(a, pb)] - self.entries[(b, pa)]).abs());
            }
        }
        worst / self.scale().max(f64::MIN_POSITIVE)
    }

    /// Most negative off-diagonal entry relative to `max |K|` (zero when all
    /// entries are nonnegative).
    pub fn negativity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, &p) in self.rows.iter().enumerate() {
            for c in 0..self.active.len() {
                if c != p {
                    worst = worst.min(self.entries[(r, c)]);
                }
            }
        }
        -worst / self.scale().max(f64::MIN_POSITIVE)
    }

    /// `Σ_z K(x,z)·vol` for each stored row.
    pub fn row_integrals(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.entries.row_iter().map(|r| r.sum() * vol).collect()
    }

    /// `(i, j, K)` with grid indices, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.entries.len());
        for (r, &p) in self.rows.iter().enumerate() {
            for (c, &j) in self.active.iter().enumerate() {
                out.push((self.active[p], j, self.entries[(r, c)]));
            }
        }
        out
    }

    /// `Σ_z K(x,z) u(z) vol` for each stored row.
    pub fn integrate_against(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.grid.check_same(u.grid())?;
        let vol = self.grid.cell_volume();
        Ok(self
            .entries
            .row_iter()
            .map(|row| row.iter().zip(&self.active).map(|(k, &j)| k * u[j]).sum::<f64>() * vol)
            .collect())
    }

    /// `max |K − other| / max |K|` over the common rows.
    pub fn max_relative_difference(&self, other: &KernelMatrix) -> Result<f64> {
        if self.rows != other.rows || self.active != other.active {
            return Err(Error::IncompatibleGrids("kernels are stored on different rows".into()));
        }
        Ok((&self.entries - &other.entries).amax() / self.scale().max(f64::MIN_POSITIVE))
    }
}

fn all_rows(basis: &EigenBasis) -> Vec<usize> {
    (0..basis.len()).collect()
}

fn check_rows(basis: &EigenBasis, rows: &[usize]) -> Result<()> {
    match rows.iter().find(|&&r| r >= basis.len()) {
        Some(&r) => Err(Error::ShapeMismatch {
            expected: basis.len(),
            found: r + 1,
        }),
        None => Ok(()),
    }
}

fn build(basis: &EigenBasis, kind: KernelKind, rows: &[usize], w: &[f64]) -> Result<KernelMatrix> {
    check_rows(basis, rows)?;
    let vol = basis.cell_volume();
    let entries = if rows.len() == basis.len() && rows.iter().enumerate().all(|(a, &b)| a == b) {
        basis.filter_matrix(w)
    } else {
        basis.filter_rows(rows, w)
    } / vol;
    Ok(KernelMatrix {
        kind,
        grid: basis.grid().clone(),
        active: basis.operator().active().to_vec(),
        rows: rows.to_vec(),
        entries,
    })
}

/// Active position of the node nearest to `p`.
pub fn nearest_active(basis: &EigenBasis, p: &[f64]) -> Result<usize> {
    let op = basis.operator();
    let g = op.grid();
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (k, &idx) in op.active().iter().enumerate() {
        let c = g.coord(idx);
        let d: f64 = (0..g.dim()).map(|a| (c[a] - p[a]).powi(2)).sum();
        if d < best_d {
            best_d = d;
            best = Some(k);
        }
    }
    best.ok_or_else(|| Error::InvalidGrid("operator has no unknowns".into()))
}

// ---------------------------------------------------------------------------
// heat kernel

/// `W_t(x,z) = Σ e^{−tλ_k} φ_k(x) φ_k(z)`.
pub fn heat_kernel(basis: &EigenBasis, t: f64) -> Result<KernelMatrix> {
    heat_kernel_rows(basis, t, &all_rows(basis))
}

pub fn heat_kernel_rows(basis: &EigenBasis, t: f64, rows: &[usize]) -> Result<KernelMatrix> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "(0, ∞)",
        });
    }
    let w: Vec<f64> = basis.eigenvalues().iter().map(|&l| (-t * l).exp()).collect();
    build(basis, KernelKind::Heat { t }, rows, &w)
}

// ---------------------------------------------------------------------------
// K_s and B_s

fn check_rule(q: &SingularQuadrature, s: f64, weight: PowerWeight) -> Result<()> {
    if q.weight != weight || (q.sigma - s).abs() > 1e-15 {
        return Err(Error::Unsupported(format!(
            "rule has σ = {} and weight {:?}, need σ = {s} with {:?}",
            q.sigma, q.weight, weight
        )));
    }
    Ok(())
}

/// `∫ (e^{−tλ_k} − 1) dt/t^{1+s}` for every eigenvalue, after checking
/// that `q` reproduces `λ^s` on the positive spectrum.
fn jump_weights(basis: &EigenBasis, s: f64, q: &SingularQuadrature) -> Result<Vec<f64>> {
    check_fraction("s", s)?;
    check_rule(q, s, PowerWeight::OnePlus)?;
    let (r0, r1, worst) = calibration_residuals(q, s, basis.lambda_min_positive(), basis.lambda_max());
    if worst > CALIBRATION_TOL {
        return Err(Error::Uncalibrated {
            residual_min: r0,
            residual_max: r1,
            worst,
        });
    }
    Ok(basis
        .eigenvalues()
        .iter()
        .map(|&l| {
            if l > 0.0 {
                q.integrate(|t| (-t * l).exp_m1(), &[(-l, 1.0), (0.5 * l * l, 2.0)], &[(-1.0, 0.0)])
            } else {
                0.0
            }
        })
        .collect())
}

/// `K_s(x,z) = (1/(2|Γ(−s)|)) ∫ W_t(x,z) dt/t^{1+s}` for `x ≠ z`.
///
/// The diagonal is undefined (the continuum kernel is singular there) and
/// is stored as zero. On a pure Neumann basis the kind is `KsNeumann`.
pub fn kernel_ks(basis: &EigenBasis, s: f64, q: &SingularQuadrature) -> Result<KernelMatrix> {
    kernel_ks_rows(basis, s, q, &all_rows(basis))
}

pub fn kernel_ks_rows(basis: &EigenBasis, s: f64, q: &SingularQuadrature, rows: &[usize]) -> Result<KernelMatrix> {
    let g = jump_weights(basis, s, q)?;
    let c = 1.0 / (2.0 * gamma_neg(s).abs());
    let w: Vec<f64> = g.iter().map(|v| v * c).collect();
    let kind = if basis.is_pure_neumann() {
        KernelKind::KsNeumann { s }
    } else {
        KernelKind::Ks { s }
    };
    let mut k = build(basis, kind, rows, &w)?;
    for (r, &p) in rows.iter().enumerate() {
        k.entries[(r, p)] = 0.0;
    }
    Ok(k)
}

/// The killing term `B_s(x) = (1/|Γ(−s)|) ∫ (1 − e^{−tL}1(x)) dt/t^{1+s}`.
#[derive(Debug, Clone)]
pub struct BsFunction {
    pub s: f64,
    pub values: GridFunction,
}

impl BsFunction {
    /// Smallest value on the active nodes.
    pub fn min(&self, basis: &EigenBasis) -> f64 {
        basis
            .operator()
            .active()
            .iter()
            .map(|&i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }

    /// Fraction of steps, walking from the centre of a 1D grid outwards,
    /// along which `B_s` increases. Report-only.
    pub fn outward_increase_fraction(&self) -> Option<f64> {
        let g = self.values.grid();
        if g.dim() != 1 {
            return None;
        }
        let n = g.len();
        let mid = n / 2;
        let (mut up, mut total) = (0usize, 0usize);
        for i in mid..n - 2 {
            total += 1;
            up += usize::from(self.values[i + 1] > self.values[i]);
        }
        for i in (2..=mid).rev() {
            total += 1;
            up += usize::from(self.values[i - 1] > self.values[i]);
        }
        (total > 0).then(|| up as f64 / total as f64)
    }
}

pub fn function_bs(basis: &EigenBasis, s: f64, q: &SingularQuadrature) -> Result<BsFunction> {
    let g = jump_weights(basis, s, q)?;
    let c = -1.0 / gamma_neg(s).abs();
    let w: Vec<f64> = g.iter().map(|v| v * c).collect();
    let ones = vec![1.0; basis.len()];
    let values = basis.operator().extend(&basis.apply_weights(&ones, &w))?;
    Ok(BsFunction { s, values })
}

/// `Σ_{x≠z} (u(x)−u(z))(ψ(x)−ψ(z)) K_s(x,z) vol² + Σ u ψ B_s vol`, the
/// discrete form of `⟨L^s u, ψ⟩`. Needs the full kernel.
pub fn bilinear_form(u: &GridFunction, psi: &GridFunction, ks: &KernelMatrix, bs: &BsFunction) -> Result<f64> {
    if !ks.is_full() {
        return Err(Error::Unsupported("the bilinear form needs every kernel row".into()));
    }
    let g = ks.grid();
    g.check_same(u.grid())?;
    g.check_same(psi.grid())?;
    g.check_same(bs.values.grid())?;
    let vol = g.cell_volume();
    let idx = ks.columns();
    let mut jump = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        let mut row = 0.0;
        for (b, &j) in idx.iter().enumerate() {
            if a != b {
                row += (u[i] - u[j]) * (psi[i] - psi[j]) * ks.entries[(a, b)];
            }
        }
        jump += row;
    }
    let killing: f64 = idx.iter().map(|&i| u[i] * psi[i] * bs.values[i]).sum();
    Ok(jump * vol * vol + killing * vol)
}

// ---------------------------------------------------------------------------
// G_s

fn check_dirichlet_like(basis: &EigenBasis) -> Result<()> {
    if basis.is_pure_neumann() {
        return Err(Error::Unsupported(
            "L^{-s} has no kernel on the pure Neumann space; use fractional_solve on mean-free data".into(),
        ));
    }
    Ok(())
}

/// `G_s(x,z) = Σ λ_k^{−s} φ_k(x) φ_k(z)`.
pub fn greens_function(basis: &EigenBasis, s: f64) -> Result<KernelMatrix> {
    greens_function_rows(basis, s, &all_rows(basis))
}

pub fn greens_function_rows(basis: &EigenBasis, s: f64, rows: &[usize]) -> Result<KernelMatrix> {
    check_fraction("s", s)?;
    check_dirichlet_like(basis)?;
    let w: Vec<f64> = basis.eigenvalues().iter().map(|&l| l.powf(-s)).collect();
    build(basis, KernelKind::Gs { s }, rows, &w)
}

/// `G_s(x,z) = (1/Γ(s)) ∫ W_t(x,z) dt/t^{1−s}`; `q` must carry `dt/t^{1−s}`.
pub fn greens_function_semigroup(basis: &EigenBasis, s: f64, q: &SingularQuadrature, rows: &[usize]) -> Result<KernelMatrix> {
    check_fraction("s", s)?;
    check_dirichlet_like(basis)?;
    check_rule(q, s, PowerWeight::OneMinus)?;
    let w: Vec<f64> = basis.eigenvalues().iter().map(|&l| inverse_power_scalar(l, s, q)).collect();
    build(basis, KernelKind::Gs { s }, rows, &w)
}

// ---------------------------------------------------------------------------
// Poisson kernel

/// `(2^{1−s}/Γ(s)) (√λ y)^s K_s(√λ y)`, the Bessel form of the Poisson weight.
pub fn poisson_weight_bessel(lambda: f64, s: f64, y: f64) -> Result<f64> {
    if lambda <= 0.0 || y == 0.0 {
        return Ok(1.0);
    }
    let z = lambda.sqrt() * y;
    if z > 700.0 {
        return Ok(0.0);
    }
    Ok(2f64.powf(1.0 - s) / gamma(s) * z.powf(s) * bessel_k(s, z)?)
}

/// `(y^{2s}/(4^s Γ(s))) ∫ e^{−y²/4t} e^{−tλ} dt/t^{1+s}` by a log-uniform rule.
pub fn poisson_weight(lambda: f64, s: f64, y: f64, q: &SingularQuadrature) -> f64 {
    let a = y * y / 4.0;
    // e^{−a/t} ≈ 1 − a/t + a²/(2t²) beyond t_max (only relevant for λ = 0)
    let high: &[(f64, f64)] = if lambda * q.t_max < 40.0 {
        &[(1.0, 0.0), (-a, -1.0), (0.5 * a * a, -2.0)]
    } else {
        &[]
    };
    let v = q.integrate(|t| (-a / t - t * lambda).exp(), &[], high);
    y.powf(2.0 * s) / (4f64.powf(s) * gamma(s)) * v
}

/// Rule for [`poisson_weight`] at height `y` over the spectrum of `basis`.
pub fn poisson_rule(basis: &EigenBasis, s: f64, y: f64) -> Result<SingularQuadrature> {
    let a = y * y / 4.0;
    let t_min = a / 800.0;
    let lmin = basis.lambda_min_positive();
    let t_max = (40.0 / lmin).max(1e4 * a).max(10.0 * t_min);
    SingularQuadrature::new(s, PowerWeight::OnePlus, t_min, t_max, 0.05)
}

/// `P_y^s(x,z) = (y^{2s}/(4^s Γ(s))) ∫ e^{−y²/(4t)} W_t(x,z) dt/t^{1+s}`.
///
/// Every weight is cross-checked against the Bessel form; a discrepancy
/// above `10⁻⁹` is a quadrature failure.
pub fn poisson_kernel(basis: &EigenBasis, s: f64, y: f64) -> Result<KernelMatrix> {
    poisson_kernel_rows(basis, s, y, &all_rows(basis))
}

pub fn poisson_kernel_rows(basis: &EigenBasis, s: f64, y: f64, rows: &[usize]) -> Result<KernelMatrix> {
    check_fraction("s", s)?;
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::OutOfRange {
            name: "y",
            value: y,
            range: "(0, ∞)",
        });
    }
    let w = poisson_weights(basis, s, y)?;
    build(basis, KernelKind::Poisson { s, y }, rows, &w)
}

fn poisson_weights(basis: &EigenBasis, s: f64, y: f64) -> Result<Vec<f64>> {
    let q = poisson_rule(basis, s, y)?;
    let mut w = Vec::with_capacity(basis.len());
    for &l in basis.eigenvalues() {
        let v = poisson_weight(l, s, y, &q);
        let b = poisson_weight_bessel(l, s, y)?;
        if (v - b).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "Poisson weight at λ = {l}, y = {y}: quadrature {v} vs Bessel {b}"
            )));
        }
        w.push(v);
    }
    Ok(w)
}

/// `U(·,y) = ∫ P_y^s(·,z) u(z) dz` without forming the kernel.
pub fn poisson_extension(basis: &EigenBasis, u: &GridFunction, s: f64, y: f64) -> Result<GridFunction> {
    check_fraction("s", s)?;
    let op = basis.operator();
    let x = op.restrict(u)?;
    let w = poisson_weights(basis, s, y)?;
    op.extend(&basis.apply_weights(&x, &w))
}

// ---------------------------------------------------------------------------
// fits and reports

/// Which pairs `(x, z)` enter a decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairWindow {
    pub r_min: f64,
    pub r_max: f64,
    /// Minimum distance of both points from `∂Ω`.
    pub margin: f64,
}

impl PairWindow {
    /// Interior window: `[2h, extent/8]` with both points at least
    /// `extent/4` from the boundary.
    pub fn interior(grid: &Grid) -> Self {
        let h = (0..grid.dim()).map(|d| grid.spacing(d)).fold(0.0, f64::max);
        let ext = grid.extents().iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            r_min: 2.0 * h,
            r_max: ext / 8.0,
            margin: ext / 4.0,
        }
    }
}

fn window_pairs(k: &KernelMatrix, window: &PairWindow) -> (Vec<f64>, Vec<f64>) {
    let g = k.grid();
    let (mut r, mut v) = (Vec::new(), Vec::new());
    for (a, &p) in k.rows.iter().enumerate() {
        let i = k.active[p];
        if g.distance_to_boundary(i) < window.margin {
            continue;
        }
        for (c, &j) in k.active.iter().enumerate() {
            if c == p || g.distance_to_boundary(j) < window.margin {
                continue;
            }
            let d = g.distance(i, j);
            if d >= window.r_min * (1.0 - 1e-12) && d <= window.r_max * (1.0 + 1e-12) {
                r.push(d);
                v.push(k.entries[(a, c)]);
            }
        }
    }
    (r, v)
}

/// Log–log fit of `K(x,z)` against `|x−z|` over the window.
pub fn kernel_slope(k: &KernelMatrix, window: &PairWindow) -> Result<ExponentFit> {
    let (r, v) = window_pairs(k, window);
    if r.len() < 4 {
        return Err(Error::Probe(format!("only {} pairs in the fit window", r.len())));
    }
    fit_loglog(&r, &v)
}

/// Fit of `K(x,z) ≈ a·ln(1/|x−z|) + b` over the window.
pub fn kernel_log_fit(k: &KernelMatrix, window: &PairWindow) -> Result<ExponentFit> {
    let (r, v) = window_pairs(k, window);
    if r.len() < 4 {
        return Err(Error::Probe(format!("only {} pairs in the fit window", r.len())));
    }
    fit_log(&r, &v)
}

/// `max K(x,z)·|x−z|^{n+2s}` over off-diagonal pairs of the stored rows.
pub fn normalized_ks_max(k: &KernelMatrix) -> Result<f64> {
    let s = match k.kind {
        KernelKind::Ks { s } | KernelKind::KsNeumann { s } => s,
        other => return Err(Error::Unsupported(format!("{} is not a jump kernel", other.name()))),
    };
    let g = k.grid();
    let p = g.dim() as f64 + 2.0 * s;
    let mut worst: f64 = 0.0;
    for (a, &row) in k.rows.iter().enumerate() {
        let i = k.active[row];
        for (c, &j) in k.active.iter().enumerate() {
            if c != row {
                worst = worst.max(k.entries[(a, c)] * g.distance(i, j).powf(p));
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianBoundReport {
    /// Fitted `c` in `W_t ≤ C e^{−|x−z|²/(ct)} / t^{n/2}`.
    pub c: f64,
    /// Smallest `C` making the bound hold at every sample for that `c`.
    pub constant: f64,
    /// Slope of the upper envelope of `ln(W t^{n/2})` against `|x−z|²/t`.
    pub envelope_slope: f64,
    pub samples: usize,
}

/// Fits the Gaussian upper bound over a sweep of times, using the stored
/// rows of heat kernels built at each `t`.
pub fn gaussian_bound_fit(basis: &EigenBasis, times: &[f64], rows: &[usize]) -> Result<GaussianBoundReport> {
    let n = basis.grid().dim() as f64;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for &t in times {
        let k = heat_kernel_rows(basis, t, rows)?;
        let g = k.grid();
        for (a, &p) in rows.iter().enumerate() {
            let i = k.active[p];
            for (c, &j) in k.active.iter().enumerate() {
                let w = k.entries[(a, c)];
                if w > 1e-300 {
                    samples.push((g.distance(i, j).powi(2) / t, w * t.powf(n / 2.0)));
                }
            }
        }
    }
    if samples.len() < 4 {
        return Err(Error::Probe("too few positive heat-kernel samples".into()));
    }
    // upper envelope: maximum of ln(W t^{n/2}) in 16 bins of the Gaussian variable
    let xmax = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let bins = 16;
    let mut env = vec![f64::NEG_INFINITY; bins];
    for &(x, w) in &samples {
        let b = ((x / xmax * bins as f64) as usize).min(bins - 1);
        env[b] = env[b].max(w.ln());
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = env
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(b, &v)| ((b as f64 + 0.5) * xmax / bins as f64, v))
        .unzip();
    let line = fit_line(&xs, &ys)?;
    if line.slope >= 0.0 {
        return Err(Error::Probe(format!(
            "heat kernel envelope does not decay (slope {})",
            line.slope
        )));
    }
    let c = -1.0 / line.slope;
    let constant = samples
        .iter()
        .map(|&(x, w)| w * (x / c).exp())
        .fold(0.0, f64::max);
    Ok(GaussianBoundReport {
        c,
        constant,
        envelope_slope: line.slope,
        samples: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFactorReport {
    /// `max K|x−z|^{n+2s} · |x−z|² / (φ₀(x)φ₀(z))` (normalised `φ₀`).
    pub constant: f64,
    /// Slope of `ln(K|x−z|^{n+2s})` against `ln(φ₀(x)φ₀(z)/|x−z|²)` over
    /// pairs where the latter is below 1.
    pub effective_exponent: Option<f64>,
    pub pairs: usize,
}

/// Compares `K_s` near the boundary with the `φ₀(x)φ₀(z)/|x−z|²` shape,
/// `φ₀` scaled to unit maximum. Report-only.
pub fn boundary_factor_fit(k: &KernelMatrix, basis: &EigenBasis) -> Result<BoundaryFactorReport> {
    let s = match k.kind {
        KernelKind::Ks { s } => s,
        other => return Err(Error::Unsupported(format!("{} is not a Dirichlet jump kernel", other.name()))),
    };
    let phi = basis.vector(0);
    let pmax = phi.iter().copied().fold(0.0, f64::max);
    let g = k.grid();
    let p = g.dim() as f64 + 2.0 * s;
    let mut constant: f64 = 0.0;
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    let mut pairs = 0;
    for (a, &row) in k.rows.iter().enumerate() {
        let i = k.active[row];
        for (c, &j) in k.active.iter().enumerate() {
            if c == row {
                continue;
            }
            let d = g.distance(i, j);
            let shape = (phi[row] / pmax) * (phi[c] / pmax) / (d * d);
            let normalized = k.entries[(a, c)] * d.powf(p);
            if normalized <= 0.0 || shape <= 0.0 {
                continue;
            }
            pairs += 1;
            constant = constant.max(normalized / shape);
            if shape < 1.0 {
                lx.push(shape.ln());
                ly.push(normalized.ln());
            }
        }
    }
    let effective_exponent = fit_line(&lx, &ly).ok().map(|f| f.slope);
    Ok(BoundaryFactorReport {
        constant,
        effective_exponent,
        pairs,
    })
}
